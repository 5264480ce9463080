//! Builds the coarse / finer / finest meshes of one channel and writes them
//! as text files.
//!
//! ```text
//! cargo run --example mesh_levels -- [delta_x] [out_dir]
//! ```

use nnlci::geometry::{CaseRole, CaseSpec};
use nnlci::mesh::{Level, MeshLevels, MeshResolution};

fn main() -> nnlci::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let delta_x: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let out = args
        .get(2)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("nnlci-meshes"));

    let case = CaseSpec::translated(delta_x, 0.0, CaseRole::Training);
    let levels = MeshLevels::build(&case, &MeshResolution::FULL)?;
    for level in Level::ALL {
        let mesh = levels.get(level);
        mesh.check_invariants()?;
        let h_min = mesh.local_size.iter().copied().fold(f64::INFINITY, f64::min);
        let h_max = mesh.local_size.iter().copied().fold(0.0, f64::max);
        println!(
            "{level:>6}: {:>5} cells, {:>5} vertices, area {:.6}, h_E in [{h_min:.4}, {h_max:.4}]",
            mesh.n_cells(),
            mesh.vertices.len(),
            mesh.total_area()
        );
        mesh.write(&out.join(format!("{}-{level}.mesh", case.id())))?;
    }
    println!("meshes written to {}", out.display());
    Ok(())
}
