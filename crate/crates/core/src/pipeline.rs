//! Configuration and on-disk layout of a pipeline run, plus the glue that
//! takes cases from geometry to trained model and scored predictions.
//!
//! A run directory looks like
//!
//! ```text
//! <work_dir>/cases/<case id>/{coarse,finer,finest}.mesh
//! <work_dir>/cases/<case id>/{coarse,finer,finest}.sol
//! <work_dir>/dataset.txt
//! <work_dir>/model.bin
//! <work_dir>/eval/<case id>.{csv,vtk,metrics.json}
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{build_corpus, fit_normalizer, CaseData, Dataset, INPUT_LEN, OUTPUT_LEN};
use crate::error::{Error, Result};
use crate::evaluation::{predict_field, FieldReport, MetricSums};
use crate::geometry::{
    shape_testing_cases, shape_training_cases, translation_testing_cases, translation_training_cases,
    CaseRole, CaseSpec,
};
use crate::mesh::{Level, Mesh, MeshLevels, MeshResolution};
use crate::nn::{train, LossHistory, MlpModel, TrainConfig};
use crate::solver::{read_solution, solve_steady, write_solution, SolutionHeader, SolverConfig};
use crate::state::ConservedState;

pub const SCHEMA_VERSION: u32 = 1;

/// Named case matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CasePreset {
    /// Translated upper bump: 27 training and 4 testing cases.
    Translation,
    /// Gaussian-variance and wedge shapes: 21 training and 2 testing cases.
    Shape,
}

impl CasePreset {
    pub fn cases(self) -> Vec<CaseSpec> {
        match self {
            CasePreset::Translation => {
                let mut c = translation_training_cases();
                c.extend(translation_testing_cases());
                c
            }
            CasePreset::Shape => {
                let mut c = shape_training_cases();
                c.extend(shape_testing_cases());
                c
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseMatrix {
    pub presets: Vec<CasePreset>,
    /// Additional hand-written cases.
    pub extra: Vec<CaseSpec>,
}

impl Default for CaseMatrix {
    fn default() -> Self {
        CaseMatrix {
            presets: vec![CasePreset::Translation],
            extra: Vec::new(),
        }
    }
}

impl CaseMatrix {
    pub fn all(&self) -> Vec<CaseSpec> {
        let mut cases: Vec<CaseSpec> = self.presets.iter().flat_map(|p| p.cases()).collect();
        cases.extend(self.extra.iter().copied());
        cases
    }

    pub fn with_role(&self, role: CaseRole) -> Vec<CaseSpec> {
        self.all().into_iter().filter(|c| c.role == role).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Widths of the hidden tanh layers.
    pub hidden: Vec<usize>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig { hidden: vec![500; 10] }
    }
}

impl NetworkConfig {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![INPUT_LEN];
        s.extend(&self.hidden);
        s.push(OUTPUT_LEN);
        s
    }
}

fn default_work_dir() -> PathBuf {
    PathBuf::from("run")
}

fn default_mesh() -> MeshResolution {
    MeshResolution::FULL
}

/// Everything a run needs; read from TOML with unknown keys rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    /// Source of all randomness: network initialization and batch order.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_work_dir")]
    pub work_dir: PathBuf,
    #[serde(default)]
    pub cases: CaseMatrix,
    #[serde(default = "default_mesh")]
    pub mesh: MeshResolution,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub training: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            work_dir: default_work_dir(),
            cases: CaseMatrix::default(),
            mesh: MeshResolution::FULL,
            solver: SolverConfig::default(),
            network: NetworkConfig::default(),
            training: TrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Reduced setup that runs end to end on one laptop core: 3200-cell
    /// finest meshes, a small network and fewer solver steps.
    pub fn desk() -> Self {
        PipelineConfig {
            mesh: MeshResolution::DESK,
            solver: SolverConfig {
                max_steps: 6000,
                ..Default::default()
            },
            network: NetworkConfig {
                hidden: vec![64, 64, 64],
            },
            training: TrainConfig {
                epochs: 30_000,
                adam: crate::nn::AdamConfig {
                    learning_rate: 2e-3,
                    ..Default::default()
                },
                ..Default::default()
            },
            ..Default::default()
        }
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|m| Error::Config(format!("{}: {m}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.mesh.validate()?;
        self.solver.validate()?;
        self.training.validate()?;
        if self.network.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        for c in self.cases.all() {
            c.validate()?;
        }
        Ok(())
    }

    /// Training settings with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.training
        }
    }

    pub fn case_dir(&self, case: &CaseSpec) -> PathBuf {
        self.work_dir.join("cases").join(case.id())
    }

    pub fn mesh_path(&self, case: &CaseSpec, level: Level) -> PathBuf {
        self.case_dir(case).join(format!("{level}.mesh"))
    }

    pub fn solution_path(&self, case: &CaseSpec, level: Level) -> PathBuf {
        self.case_dir(case).join(format!("{level}.sol"))
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.work_dir.join("dataset.txt")
    }

    pub fn model_path(&self) -> PathBuf {
        self.work_dir.join("model.bin")
    }

    pub fn eval_prefix(&self, case: &CaseSpec) -> PathBuf {
        self.work_dir.join("eval").join(case.id())
    }

    /// `<eval prefix>.<suffix>`, e.g. `suffix = "metrics.json"`.
    pub fn eval_path(&self, case: &CaseSpec, suffix: &str) -> PathBuf {
        with_suffix(&self.eval_prefix(case), suffix)
    }
}

/// `prefix` with `.suffix` appended; unlike `Path::with_extension` this
/// keeps dots already in the name.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

/// A single case read from its own TOML file.
pub fn read_case(path: &Path) -> Result<CaseSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let case: CaseSpec =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    case.validate()?;
    Ok(case)
}

/// Runs `f` over `items` on a pool of `jobs` threads, keeping input order.
pub fn run_parallel<T, R, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Argument(e.to_string()))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

fn solution_header(mesh_label: String, case: &CaseSpec, sol: &crate::solver::SteadySolution) -> SolutionHeader {
    SolutionHeader {
        mesh: mesh_label,
        case: *case,
        converged: sol.converged,
        steps: sol.steps,
        final_residual: sol.history.last().copied().unwrap_or(0.0),
    }
}

/// Builds the three meshes of `case` and solves on each.
pub fn solve_case(case: &CaseSpec, res: &MeshResolution, solver: &SolverConfig) -> Result<CaseData> {
    let meshes = MeshLevels::build(case, res)?;
    let states = solve_levels(case, &meshes, solver)?;
    CaseData::new(*case, meshes, states)
}

fn solve_levels(case: &CaseSpec, meshes: &MeshLevels, solver: &SolverConfig) -> Result<[Vec<ConservedState>; 3]> {
    let mut out: [Vec<ConservedState>; 3] = Default::default();
    for level in Level::ALL {
        let sol = solve_steady(meshes.get(level), case, solver)?;
        log::info!(
            "{} {level}: {} steps, converged {}",
            case.id(),
            sol.steps,
            sol.converged
        );
        out[level as usize] = sol.states;
    }
    Ok(out)
}

/// Writes the three meshes of `case` into the run directory.
pub fn write_meshes(cfg: &PipelineConfig, case: &CaseSpec) -> Result<MeshLevels> {
    let meshes = MeshLevels::build(case, &cfg.mesh)?;
    for level in Level::ALL {
        meshes.get(level).write(&cfg.mesh_path(case, level))?;
    }
    Ok(meshes)
}

pub fn read_meshes(cfg: &PipelineConfig, case: &CaseSpec) -> Result<MeshLevels> {
    let read = |l: Level| -> Result<Mesh> {
        let path = cfg.mesh_path(case, l);
        if !path.exists() {
            return Err(Error::MissingArtifact {
                path,
                command: "mesh".into(),
            });
        }
        Mesh::read(&path)
    };
    Ok(MeshLevels {
        coarse: read(Level::Coarse)?,
        finer: read(Level::Finer)?,
        finest: read(Level::Finest)?,
    })
}

/// Solves one mesh file and writes the solution file.
pub fn solve_mesh_file(case: &CaseSpec, mesh_path: &Path, out: &Path, solver: &SolverConfig) -> Result<bool> {
    if !mesh_path.exists() {
        return Err(Error::MissingArtifact {
            path: mesh_path.to_path_buf(),
            command: "mesh".into(),
        });
    }
    let mesh = Mesh::read(mesh_path)?;
    let sol = solve_steady(&mesh, case, solver)?;
    let label = mesh_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    write_solution(out, &solution_header(label, case, &sol), &sol.states)?;
    Ok(sol.converged)
}

/// Solves every level of `case` from its mesh files into solution files.
pub fn solve_case_files(cfg: &PipelineConfig, case: &CaseSpec) -> Result<()> {
    for level in Level::ALL {
        solve_mesh_file(
            case,
            &cfg.mesh_path(case, level),
            &cfg.solution_path(case, level),
            &cfg.solver,
        )?;
    }
    Ok(())
}

/// Meshes and solutions of `case` from the run directory.
pub fn load_case_data(cfg: &PipelineConfig, case: &CaseSpec) -> Result<CaseData> {
    let meshes = read_meshes(cfg, case)?;
    let mut states: [Vec<ConservedState>; 3] = Default::default();
    for level in Level::ALL {
        let (header, s) = read_solution(&cfg.solution_path(case, level))?;
        if header.case != *case {
            return Err(Error::format(
                cfg.solution_path(case, level),
                "solution belongs to a different case",
            ));
        }
        states[level as usize] = s;
    }
    CaseData::new(*case, meshes, states)
}

/// Training records of `cases` with the normalizer fitted on them.
pub fn build_dataset(cases: &[CaseData]) -> Result<Dataset> {
    let samples = build_corpus(cases);
    let normalizer = fit_normalizer(&samples)?;
    Ok(Dataset {
        normalizer: Some(normalizer),
        samples,
    })
}

/// Fresh network of the configured shape trained on `dataset`.
pub fn train_on_dataset(cfg: &PipelineConfig, dataset: &Dataset) -> Result<(MlpModel, LossHistory)> {
    let normalizer = dataset
        .normalizer
        .ok_or_else(|| Error::Argument("dataset has no normalizer".into()))?;
    let model = MlpModel::new(&cfg.network.sizes(), cfg.seed)?;
    train(model, &dataset.samples, normalizer, &cfg.train_config())
}

/// Prediction report plus its additive metric sums.
pub fn evaluate_case(model: &MlpModel, data: &CaseData, gamma: f64) -> Result<(FieldReport, MetricSums)> {
    let report = predict_field(model, data, gamma)?;
    let sums = report.sums();
    Ok((report, sums))
}

/// Metrics of one evaluated case, as stored next to its field exports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub case_id: String,
    pub relative_l1: f64,
    pub rrmse: f64,
    pub baseline_l1: f64,
    pub per_variable_l1: [f64; 4],
    /// `None` when a predicted state is unphysical.
    pub mach_relative_l1: Option<f64>,
    pub mach_baseline_l1: Option<f64>,
    pub sums: MetricSums,
}

impl CaseMetrics {
    pub fn of(report: &FieldReport) -> Result<Self> {
        use crate::evaluation::{per_variable_l1, MetricMode};
        let sums = report.sums();
        let mach_sums = MetricSums::with_mode(report, MetricMode::Mach);
        Ok(CaseMetrics {
            case_id: report.case_id.clone(),
            relative_l1: sums.relative_l1()?,
            rrmse: sums.rrmse()?,
            baseline_l1: sums.baseline_l1()?,
            per_variable_l1: per_variable_l1(report)?,
            mach_relative_l1: mach_sums.relative_l1().ok(),
            mach_baseline_l1: mach_sums.baseline_l1().ok(),
            sums,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("metrics serialize");
        crate::io::write_atomic(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path, "evaluate")?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Writes `bytes` atomically, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    crate::io::write_atomic(path, bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        for cfg in [PipelineConfig::default(), PipelineConfig::desk()] {
            let text = cfg.to_toml();
            assert_eq!(PipelineConfig::parse(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = PipelineConfig::parse("schema_version = 1\n").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.network.sizes(), crate::nn::full_architecture());
        assert_eq!(cfg.cases.with_role(CaseRole::Testing).len(), 4);
    }

    #[test]
    fn unknown_keys_and_versions_are_rejected() {
        assert!(PipelineConfig::parse("schema_version = 1\nfoo = 2\n").is_err());
        assert!(PipelineConfig::parse("schema_version = 1\n[solver]\ncfl = 0.3\nbogus = 1\n").is_err());
        assert!(PipelineConfig::parse("schema_version = 2\n").is_err());
        assert!(PipelineConfig::parse("seed = 1\n").is_err());
    }

    #[test]
    fn case_presets_have_full_sizes() {
        let m = CaseMatrix {
            presets: vec![CasePreset::Translation, CasePreset::Shape],
            extra: vec![],
        };
        assert_eq!(m.with_role(CaseRole::Training).len(), 48);
        assert_eq!(m.with_role(CaseRole::Testing).len(), 6);
    }

    #[test]
    fn missing_mesh_names_the_mesh_command() {
        let cfg = PipelineConfig {
            work_dir: PathBuf::from("/nonexistent/run"),
            ..PipelineConfig::desk()
        };
        let case = CaseSpec::translated(0.0, 0.0, CaseRole::Training);
        let err = load_case_data(&cfg, &case).unwrap_err();
        assert!(err.to_string().contains("nnlci mesh"), "{err}");
    }

    #[test]
    fn parallel_runner_keeps_order() {
        let items: Vec<u32> = (0..20).collect();
        let out = run_parallel(&items, 3, |x| Ok(x * 2)).unwrap();
        assert_eq!(out, (0..20).map(|x| x * 2).collect::<Vec<_>>());
        assert!(run_parallel(&items, 2, |&x| if x == 7 { Err(Error::Argument("x".into())) } else { Ok(x) }).is_err());
    }
}
