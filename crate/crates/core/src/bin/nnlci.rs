use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nnlci::dataset::Dataset;
use nnlci::evaluation::{format_table, predict_field, summary_rows, write_report_csv, write_report_vtk};
use nnlci::geometry::{CaseRole, CaseSpec};
use nnlci::interpolation::build_stencil;
use nnlci::mesh::Level;
use nnlci::nn::{load_checkpoint, save_checkpoint};
use nnlci::pipeline::*;
use nnlci::{Error, Result};

/// Local converging-input neural surrogates for supersonic channel flow.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Pipeline configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-case stages.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the coarse, finer and finest meshes.
    Mesh {
        /// Single case file; all configured cases otherwise.
        #[arg(long)]
        case: Option<PathBuf>,
        /// Output directory for a single case.
        #[arg(long, requires = "case")]
        mesh_out: Option<PathBuf>,
    },
    /// Compute steady solutions.
    Solve {
        /// Single case file, solved on `--mesh`; all configured cases otherwise.
        #[arg(long, requires_all = ["mesh", "out"])]
        case: Option<PathBuf>,
        /// Mesh file to solve on.
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Solution file to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble training records.
    Dataset {
        #[command(subcommand)]
        action: DatasetAction,
    },
    /// Train the network.
    Train {
        /// Dataset to train on; the configured path otherwise.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Checkpoint to write; the configured model path otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict the finest-mesh field of a case and time it.
    Predict {
        #[command(flatten)]
        target: Target,
        /// Predicted field as CSV; next to the evaluation outputs otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict and score a case; writes CSV, VTK and metrics.
    Evaluate {
        #[command(flatten)]
        target: Target,
        /// Output path prefix; the configured evaluation prefix otherwise.
        #[arg(long)]
        out_prefix: Option<PathBuf>,
    },
    /// Tabulate metrics of the evaluated testing cases.
    Report {
        /// Metrics files; the configured testing cases otherwise.
        #[arg(long, num_args = 1..)]
        metrics: Vec<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DatasetAction {
    /// Sample stencils from solved cases into one dataset file.
    Build {
        /// Case matrix file (`presets`/`extra`); configured training cases otherwise.
        #[arg(long)]
        cases: Option<PathBuf>,
        /// Dataset file; the configured path otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write every stencil's lattice points as CSV.
        #[arg(long)]
        dump_stencils: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Target {
    /// Checkpoint; the configured model path otherwise.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Case file (TOML).
    #[arg(long)]
    case: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::read(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let jobs = cli.jobs;
    match cli.command {
        Command::Mesh { case, mesh_out } => match case {
            Some(path) => {
                let case = read_case(&path)?;
                let dir = mesh_out.unwrap_or_else(|| cfg.case_dir(&case));
                let meshes = nnlci::mesh::MeshLevels::build(&case, &cfg.mesh)?;
                for level in Level::ALL {
                    meshes.get(level).write(&dir.join(format!("{level}.mesh")))?;
                }
                println!("wrote meshes of {} to {}", case.id(), dir.display());
                Ok(())
            }
            None => {
                let cases = cfg.cases.all();
                run_parallel(&cases, jobs, |c| write_meshes(&cfg, c).map(|_| ()))?;
                println!("wrote meshes of {} cases under {}", cases.len(), cfg.work_dir.display());
                Ok(())
            }
        },
        Command::Solve { case, mesh, out } => match (case, mesh, out) {
            (Some(case), Some(mesh), Some(out)) => {
                let case = read_case(&case)?;
                let converged = solve_mesh_file(&case, &mesh, &out, &cfg.solver)?;
                println!("wrote {} (converged: {converged})", out.display());
                Ok(())
            }
            _ => {
                let cases = cfg.cases.all();
                run_parallel(&cases, jobs, |c| solve_case_files(&cfg, c))?;
                println!("solved {} cases", cases.len());
                Ok(())
            }
        },
        Command::Dataset {
            action: DatasetAction::Build {
                cases,
                out,
                dump_stencils,
            },
        } => {
            let matrix = match cases {
                Some(p) => read_case_matrix(&p)?,
                None => cfg.cases.clone(),
            };
            let cases = matrix.with_role(CaseRole::Training);
            let data = run_parallel(&cases, jobs, |c| load_case_data(&cfg, c))?;
            let ds = build_dataset(&data)?;
            let out = out.unwrap_or_else(|| cfg.dataset_path());
            ds.write(&out)?;
            println!("wrote {} records to {}", ds.samples.len(), out.display());
            if let Some(path) = dump_stencils {
                dump_stencil_points(&data, &ds, &path)?;
            }
            Ok(())
        }
        Command::Train { dataset, out } => {
            let path = dataset.unwrap_or_else(|| cfg.dataset_path());
            let ds = Dataset::read(&path)?;
            let start = Instant::now();
            let (model, history) = train_on_dataset(&cfg, &ds)?;
            let out = out.unwrap_or_else(|| cfg.model_path());
            save_checkpoint(&model, &out)?;
            println!(
                "trained {} epochs in {:.1} s, final loss {:.4e}; wrote {}",
                history.len(),
                start.elapsed().as_secs_f64(),
                model.meta.final_loss,
                out.display()
            );
            Ok(())
        }
        Command::Predict { target, out } => {
            let (model, data) = load_target(&cfg, &target)?;
            let start = Instant::now();
            let report = predict_field(&model, &data, cfg.solver.gamma)?;
            let elapsed = start.elapsed();
            let out = out.unwrap_or_else(|| cfg.eval_path(&data.case, "pred.csv"));
            write_report_csv(&report, &out)?;
            println!(
                "predicted {} points ({} excluded) in {:.3} s; wrote {}",
                report.len(),
                report.excluded,
                elapsed.as_secs_f64(),
                out.display()
            );
            Ok(())
        }
        Command::Evaluate { target, out_prefix } => {
            let (model, data) = load_target(&cfg, &target)?;
            let report = predict_field(&model, &data, cfg.solver.gamma)?;
            let prefix = out_prefix.unwrap_or_else(|| cfg.eval_prefix(&data.case));
            write_report_csv(&report, &with_suffix(&prefix, "csv"))?;
            write_report_vtk(&report, &data, &with_suffix(&prefix, "vtk"))?;
            let metrics = CaseMetrics::of(&report)?;
            metrics.write(&with_suffix(&prefix, "metrics.json"))?;
            println!(
                "{}: relative L1 {:.3}%, RRMSE {:.3}%, low-fidelity L1 {:.3}%",
                metrics.case_id,
                100.0 * metrics.relative_l1,
                100.0 * metrics.rrmse,
                100.0 * metrics.baseline_l1
            );
            Ok(())
        }
        Command::Report { metrics } => {
            let paths: Vec<PathBuf> = if metrics.is_empty() {
                cfg.cases
                    .with_role(CaseRole::Testing)
                    .iter()
                    .map(|c| cfg.eval_path(c, "metrics.json"))
                    .collect()
            } else {
                metrics
            };
            let cases = paths
                .iter()
                .map(|p| CaseMetrics::read(p).map(|m| (m.case_id, m.sums)))
                .collect::<Result<Vec<_>>>()?;
            let table = format_table(&summary_rows(&cases)?);
            print!("{table}");
            write_file(&cfg.work_dir.join("report.txt"), table.as_bytes())
        }
    }
}

fn read_case_matrix(path: &Path) -> Result<CaseMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn load_target(cfg: &PipelineConfig, target: &Target) -> Result<(nnlci::nn::MlpModel, nnlci::dataset::CaseData)> {
    let case: CaseSpec = read_case(&target.case)?;
    let model = load_checkpoint(&target.model.clone().unwrap_or_else(|| cfg.model_path()))?;
    let data = load_case_data(cfg, &case)?;
    Ok((model, data))
}

fn dump_stencil_points(data: &[nnlci::dataset::CaseData], ds: &Dataset, path: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::from("case,center_x,center_y,k,x,y\n");
    for d in data {
        let id = d.case.id();
        for s in ds.samples.iter().filter(|s| s.case_id == id) {
            let st = build_stencil(s.center, &d.meshes.coarse, &d.trees[0], &d.meshes.finer, &d.trees[1])?;
            for (k, q) in st.points.iter().enumerate() {
                let _ = writeln!(out, "{id},{:e},{:e},{k},{:e},{:e}", s.center.x, s.center.y, q.x, q.y);
            }
        }
    }
    write_file(path, out.as_bytes())
}
