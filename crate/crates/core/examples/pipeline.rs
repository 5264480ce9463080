//! The whole pipeline from a configuration file, through the same stages
//! as the `nnlci` subcommands: mesh, solve, dataset, train, evaluate, report.
//!
//! ```text
//! cargo run --release --example pipeline -- [config.toml]
//! ```
//!
//! Without an argument a tiny configuration runs in a temporary directory.

use nnlci::evaluation::{format_table, summary_rows};
use nnlci::geometry::{CaseRole, CaseSpec};
use nnlci::nn::{load_checkpoint, save_checkpoint};
use nnlci::pipeline::*;

fn main() -> nnlci::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => PipelineConfig::read(path.as_ref())?,
        None => {
            let mut cfg = PipelineConfig::desk();
            cfg.work_dir = std::env::temp_dir().join("nnlci-pipeline-example");
            cfg.cases = CaseMatrix {
                presets: vec![],
                extra: vec![
                    CaseSpec::translated(-0.2, 0.0, CaseRole::Training),
                    CaseSpec::translated(0.2, 0.0, CaseRole::Training),
                    CaseSpec::translated(0.0, 0.0, CaseRole::Testing),
                ],
            };
            cfg.solver.max_steps = 200;
            cfg.network.hidden = vec![16];
            cfg.training.epochs = 100;
            cfg.training.log_every = 0;
            cfg
        }
    };
    let all = cfg.cases.all();
    run_parallel(&all, 1, |c| write_meshes(&cfg, c).map(|_| ()))?;
    run_parallel(&all, 1, |c| solve_case_files(&cfg, c))?;

    let training = run_parallel(&cfg.cases.with_role(CaseRole::Training), 1, |c| load_case_data(&cfg, c))?;
    let dataset = build_dataset(&training)?;
    dataset.write(&cfg.dataset_path())?;

    let (model, _) = train_on_dataset(&cfg, &dataset)?;
    save_checkpoint(&model, &cfg.model_path())?;
    let model = load_checkpoint(&cfg.model_path())?;

    let mut rows = Vec::new();
    for case in cfg.cases.with_role(CaseRole::Testing) {
        let data = load_case_data(&cfg, &case)?;
        let (report, sums) = evaluate_case(&model, &data, cfg.solver.gamma)?;
        CaseMetrics::of(&report)?.write(&cfg.eval_path(&case, "metrics.json"))?;
        rows.push((case.id(), sums));
    }
    print!("{}", format_table(&summary_rows(&rows)?));
    println!("artifacts in {}", cfg.work_dir.display());
    Ok(())
}
