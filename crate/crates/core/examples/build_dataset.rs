//! Solves a few translated-bump cases and assembles their training records.
//!
//! ```text
//! cargo run --release --example build_dataset -- [max_steps] [out_file]
//! ```

use nnlci::dataset::{fit_normalizer, Dataset, INPUT_LEN};
use nnlci::geometry::{CaseRole, CaseSpec};
use nnlci::mesh::MeshResolution;
use nnlci::pipeline::{build_dataset, solve_case};
use nnlci::solver::SolverConfig;

fn main() -> nnlci::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let max_steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let out = args
        .get(2)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("nnlci-dataset.txt"));

    let solver = SolverConfig {
        max_steps,
        ..Default::default()
    };
    let cases: Vec<CaseSpec> = [-0.2, 0.0, 0.2]
        .iter()
        .map(|&dx| CaseSpec::translated(dx, 0.0, CaseRole::Training))
        .collect();
    let data = cases
        .iter()
        .map(|c| solve_case(c, &MeshResolution::DESK, &solver))
        .collect::<nnlci::Result<Vec<_>>>()?;

    let dataset: Dataset = build_dataset(&data)?;
    let norm = fit_normalizer(&dataset.samples)?;
    println!("{} records of {INPUT_LEN} inputs", dataset.samples.len());
    println!("density range   [{:.4}, {:.4}]", norm.state_min[0], norm.state_max[0]);
    println!("energy range    [{:.4}, {:.4}]", norm.state_min[3], norm.state_max[3]);
    println!("h_coarse range  [{:.4}, {:.4}]", norm.h_min[0], norm.h_max[0]);
    let s = &dataset.samples[0];
    println!(
        "first record at ({:.3}, {:.3}): baseline rho {:.5}, target rho {:.5}",
        s.center.x,
        s.center.y,
        s.baseline()[0],
        s.target[0]
    );
    dataset.write(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}
