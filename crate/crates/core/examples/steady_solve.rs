//! Steady Euler solution on the coarse and finer meshes of a bumped channel,
//! with the Mach number along the centreline.
//!
//! ```text
//! cargo run --release --example steady_solve -- [delta_x] [max_steps]
//! ```

use nnlci::evaluation::centerline_profile;
use nnlci::geometry::{CaseRole, CaseSpec};
use nnlci::mesh::{Level, MeshLevels, MeshResolution};
use nnlci::solver::{solve_steady, SolverConfig};
use nnlci::spatial::CentroidTree;

fn main() -> nnlci::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let delta_x: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let max_steps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1500);

    let case = CaseSpec::translated(delta_x, 0.0, CaseRole::Training);
    let levels = MeshLevels::build(&case, &MeshResolution::DESK)?;
    let config = SolverConfig {
        max_steps,
        ..Default::default()
    };
    for level in [Level::Coarse, Level::Finer] {
        let mesh = levels.get(level);
        let sol = solve_steady(mesh, &case, &config)?;
        let r0 = sol.history[0];
        println!(
            "{level}: {} steps, converged {}, residual drop {:.2e}",
            sol.steps,
            sol.converged,
            sol.history.last().unwrap() / r0
        );
        let tree = CentroidTree::build(mesh);
        let profile = centerline_profile(mesh, &tree, &sol.states, 0.4, config.gamma)?;
        let (m_min, m_max) = profile
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(_, m)| (lo.min(m), hi.max(m)));
        println!("  centreline Mach in [{m_min:.3}, {m_max:.3}]");
        for (x, m) in profile.iter().step_by((profile.len() / 8).max(1)) {
            println!("  x = {x:+.3}  M = {m:.4}");
        }
    }
    Ok(())
}
