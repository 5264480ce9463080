//! Minmod-limited interpolation and the 5×5 sampling stencil.
//!
//! Interpolates an affine field at random interior points (exact up to
//! round-off) and reports how many coarse centroids carry a valid stencil.

use nnlci::geometry::{CaseRole, CaseSpec, Point};
use nnlci::interpolation::{build_stencil, interpolate_state, STENCIL_CENTER};
use nnlci::mesh::{MeshLevels, MeshResolution};
use nnlci::spatial::CentroidTree;
use nnlci::state::ConservedState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn affine(p: Point) -> ConservedState {
    ConservedState::new(1.0 + 0.3 * p.x, 2.0 - p.y, 0.5 * p.x + 0.2 * p.y, 5.0 + p.x - 2.0 * p.y)
}

fn main() -> nnlci::Result<()> {
    let case = CaseSpec::translated(0.2, 0.0, CaseRole::Training);
    let levels = MeshLevels::build(&case, &MeshResolution::DESK)?;
    let finer = &levels.finer;
    let tree = CentroidTree::build(finer);
    let states: Vec<ConservedState> = finer.centroids.iter().map(|&c| affine(c)).collect();

    // cells whose neighbours are all interior reproduce affine data exactly
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut tested = 0;
    while tested < 1000 {
        let p = Point::new(rng.random_range(-1.2..1.2), rng.random_range(0.2..0.6));
        let Some(cell) = tree.locate(finer, p) else { continue };
        if finer.edge_neighbors(cell).count() < 3 {
            continue;
        }
        let u = interpolate_state(finer, &states, &tree, p)?;
        worst = worst.max((u - affine(p)).norm_l1());
        tested += 1;
    }
    println!("affine reproduction at {tested} points: max |error| = {worst:.2e}");

    let ctree = CentroidTree::build(&levels.coarse);
    let mut valid = 0;
    for &c in &levels.coarse.centroids {
        let s = build_stencil(c, &levels.coarse, &ctree, finer, &tree)?;
        if s.valid {
            valid += 1;
            assert_eq!(s.points[STENCIL_CENTER], c);
        }
    }
    println!(
        "{valid} of {} coarse centroids have a stencil inside both meshes",
        levels.coarse.n_cells()
    );
    Ok(())
}
