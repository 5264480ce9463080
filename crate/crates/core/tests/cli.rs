use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nnlci::geometry::{CaseRole, CaseSpec};
use nnlci::pipeline::{CaseMatrix, PipelineConfig};

fn nnlci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnlci"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

struct Run {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
    test_case: PathBuf,
    cfg: PipelineConfig,
}

fn tiny_run() -> Run {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let mut cfg = PipelineConfig::desk();
    cfg.work_dir = root.join("work");
    cfg.cases = CaseMatrix {
        presets: vec![],
        extra: vec![
            CaseSpec::translated(-0.2, 0.0, CaseRole::Training),
            CaseSpec::translated(0.2, 0.0, CaseRole::Training),
            CaseSpec::translated(0.0, 0.0, CaseRole::Testing),
        ],
    };
    cfg.solver.max_steps = 60;
    cfg.network.hidden = vec![8];
    cfg.training.epochs = 20;
    cfg.training.log_every = 0;
    let config = root.join("config.toml");
    std::fs::write(&config, cfg.to_toml()).unwrap();
    let test_case = root.join("test_case.toml");
    std::fs::write(&test_case, toml::to_string(&cfg.cases.extra[2]).unwrap()).unwrap();
    Run {
        _dir: dir,
        root,
        config,
        test_case,
        cfg,
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_pipeline_through_the_cli() {
    let run = tiny_run();
    let c = s(&run.config);
    ok(&nnlci(&["mesh", "--config", c]));
    ok(&nnlci(&["solve", "--config", c, "--jobs", "2"]));
    let out = ok(&nnlci(&["dataset", "build", "--config", c, "--dump-stencils", s(&run.root.join("st.csv"))]));
    assert!(out.contains("records"));
    assert!(run.cfg.dataset_path().exists());
    let stencil_lines = std::fs::read_to_string(run.root.join("st.csv")).unwrap().lines().count();
    assert_eq!((stencil_lines - 1) % 25, 0);

    ok(&nnlci(&["train", "--config", c]));
    assert!(run.cfg.model_path().exists());
    let out = ok(&nnlci(&["predict", "--config", c, "--case", s(&run.test_case)]));
    assert!(out.contains("predicted"));
    let prefix = run.root.join("eval/test");
    ok(&nnlci(&["evaluate", "--config", c, "--case", s(&run.test_case), "--out-prefix", s(&prefix)]));
    for ext in ["csv", "vtk", "metrics.json"] {
        assert!(run.root.join(format!("eval/test.{ext}")).exists(), "{ext}");
    }
    let out = ok(&nnlci(&["report", "--config", c, "--metrics", s(&run.root.join("eval/test.metrics.json"))]));
    assert_eq!(out.lines().count(), 3, "{out}");
    assert!(out.lines().last().unwrap().starts_with("Total"));
}

#[test]
fn solve_is_byte_identical_across_runs() {
    let run = tiny_run();
    let c = s(&run.config);
    let mesh_dir = run.root.join("m");
    ok(&nnlci(&["mesh", "--config", c, "--case", s(&run.test_case), "--mesh-out", s(&mesh_dir)]));
    let mesh = mesh_dir.join("coarse.mesh");
    let a = run.root.join("a.sol");
    let b = run.root.join("b.sol");
    for out in [&a, &b] {
        ok(&nnlci(&["solve", "--config", c, "--case", s(&run.test_case), "--mesh", s(&mesh), "--out", s(out)]));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn missing_upstream_artifact_is_a_data_error() {
    let run = tiny_run();
    let out = nnlci(&["dataset", "build", "--config", s(&run.config)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nnlci mesh"), "{err}");

    let out = nnlci(&["train", "--config", s(&run.config)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nnlci dataset build"));
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    assert_eq!(nnlci(&["frobnicate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 1\nunknown_key = 3\n").unwrap();
    let out = nnlci(&["mesh", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(nnlci(&["--help"]).status.code(), Some(0));
}

#[test]
fn shipped_configurations_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_owned();
        if name.starts_with("case_") {
            let case = nnlci::pipeline::read_case(&path).unwrap();
            assert_eq!(format!("case_{}.toml", case.id()), name);
        } else {
            PipelineConfig::read(&path).unwrap().validate().unwrap();
        }
        n += 1;
    }
    assert_eq!(n, 9);
    let desk = PipelineConfig::read(&dir.join("desk.toml")).unwrap();
    assert_eq!(desk.training, PipelineConfig::desk().training);
}
