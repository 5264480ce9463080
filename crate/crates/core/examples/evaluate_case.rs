//! Miniature end-to-end run: trains on a handful of translated-bump cases,
//! predicts an unseen one and writes CSV and VTK fields.
//!
//! ```text
//! cargo run --release --example evaluate_case -- [max_steps] [epochs]
//! ```

use nnlci::evaluation::{baseline_error, relative_l1, rrmse, write_report_csv, write_report_vtk};
use nnlci::geometry::{CaseRole, CaseSpec};
use nnlci::pipeline::{build_dataset, evaluate_case, solve_case, train_on_dataset, PipelineConfig};

fn main() -> nnlci::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut cfg = PipelineConfig::desk();
    cfg.solver.max_steps = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    cfg.training.epochs = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(300);
    cfg.training.log_every = 0;
    cfg.network.hidden = vec![32, 32];

    let training: Vec<CaseSpec> = [-0.3, -0.1, 0.1, 0.3]
        .iter()
        .map(|&dx| CaseSpec::translated(dx, 0.0, CaseRole::Training))
        .collect();
    let test = CaseSpec::translated(0.0, 0.0, CaseRole::Testing);
    let data = training
        .iter()
        .map(|c| solve_case(c, &cfg.mesh, &cfg.solver))
        .collect::<nnlci::Result<Vec<_>>>()?;
    let test_data = solve_case(&test, &cfg.mesh, &cfg.solver)?;

    let dataset = build_dataset(&data)?;
    let (model, history) = train_on_dataset(&cfg, &dataset)?;
    println!(
        "{} records, loss {:.3e} -> {:.3e}",
        dataset.samples.len(),
        history[0],
        history.last().unwrap()
    );

    let (report, _) = evaluate_case(&model, &test_data, cfg.solver.gamma)?;
    println!(
        "{}: {} points ({} excluded)\n  NNLCI relative L1 {:.3}%  RRMSE {:.3}%\n  low-fidelity relative L1 {:.3}%",
        report.case_id,
        report.len(),
        report.excluded,
        100.0 * relative_l1(&report)?,
        100.0 * rrmse(&report)?,
        100.0 * baseline_error(&report)?
    );
    let dir = std::env::temp_dir();
    write_report_csv(&report, &dir.join("nnlci-example.csv"))?;
    write_report_vtk(&report, &test_data, &dir.join("nnlci-example.vtk"))?;
    println!("fields written to {}", dir.display());
    Ok(())
}
