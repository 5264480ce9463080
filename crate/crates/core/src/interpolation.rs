//! Minmod-limited linear reconstruction of cell-centred states and the 5×5
//! sampling stencil around a point.
//!
//! The gradient of a cell is built from its centroid and the centroids of
//! its edge neighbours. Each pair of neighbours, together with the cell
//! itself, fixes a plane through three centroid values; the candidate slopes
//! of the pairs `(1,2)`, `(2,3)` and `(1,3)` are reduced with minmod, slope
//! by slope and variable by variable.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::Mesh;
use crate::spatial::CentroidTree;
use crate::state::ConservedState;

/// Stencil points per side.
pub const STENCIL_WIDTH: usize = 5;
pub const STENCIL_POINTS: usize = STENCIL_WIDTH * STENCIL_WIDTH;
/// Index of the stencil centre in point order.
pub const STENCIL_CENTER: usize = STENCIL_POINTS / 2;

/// Relative determinant threshold below which a neighbour pair is treated
/// as collinear with the cell.
const SINGULAR_TOL: f64 = 1e-14;

/// Smallest-magnitude value when all share a sign, zero otherwise.
pub fn minmod(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Argument("minmod of an empty list".into()));
    }
    Ok(minmod_unchecked(values))
}

#[inline]
fn minmod_unchecked(values: &[f64]) -> f64 {
    if values.iter().all(|&v| v > 0.0) {
        values.iter().copied().fold(f64::INFINITY, f64::min)
    } else if values.iter().all(|&v| v < 0.0) {
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        0.0
    }
}

/// Coefficients that turn the value differences of a neighbour pair into
/// the slopes `(a1, a2)` of the plane through the three centroids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSolve {
    pub first: usize,
    pub second: usize,
    /// `a1 = cx[0]·du_first + cx[1]·du_second`
    pub cx: [f64; 2],
    /// `a2 = cy[0]·du_first + cy[1]·du_second`
    pub cy: [f64; 2],
}

/// Neighbour pairs used for `n` neighbours, in candidate order.
pub fn neighbor_pairs(n: usize) -> &'static [(usize, usize)] {
    match n {
        0 | 1 => &[],
        2 => &[(0, 1)],
        _ => &[(0, 1), (1, 2), (0, 2)],
    }
}

/// Inverts the 2×2 centroid-offset system of every usable neighbour pair.
/// Pairs collinear with the cell are dropped.
pub fn pair_solves(center: Point, neighbors: &[Point]) -> Vec<PairSolve> {
    neighbor_pairs(neighbors.len())
        .iter()
        .filter_map(|&(i, j)| {
            let d1 = neighbors[i] - center;
            let d2 = neighbors[j] - center;
            let det = d1.cross(d2);
            if det.abs() < SINGULAR_TOL * d1.norm() * d2.norm() || det == 0.0 {
                return None;
            }
            Some(PairSolve {
                first: i,
                second: j,
                cx: [d2.y / det, -d1.y / det],
                cy: [-d2.x / det, d1.x / det],
            })
        })
        .collect()
}

/// Applies precomputed pair solves to value differences `du` (one per
/// neighbour) and limits the candidates. Returns `(∂/∂x, ∂/∂y)`.
pub fn limit_with(solves: &[PairSolve], du: &[ConservedState]) -> [ConservedState; 2] {
    let mut gx = ConservedState::ZERO;
    let mut gy = ConservedState::ZERO;
    if solves.is_empty() {
        return [gx, gy];
    }
    let mut cand_x = [0.0; 3];
    let mut cand_y = [0.0; 3];
    let n = solves.len();
    for var in 0..4 {
        for (k, s) in solves.iter().enumerate() {
            let (a, b) = (du[s.first][var], du[s.second][var]);
            cand_x[k] = s.cx[0] * a + s.cx[1] * b;
            cand_y[k] = s.cy[0] * a + s.cy[1] * b;
        }
        gx[var] = minmod_unchecked(&cand_x[..n]);
        gy[var] = minmod_unchecked(&cand_y[..n]);
    }
    [gx, gy]
}

/// Limited gradient of the cell at `center` with value `u0`, from the
/// centroids and values of up to three neighbours.
pub fn limited_gradient(
    center: Point,
    u0: ConservedState,
    neighbors: &[(Point, ConservedState)],
) -> [ConservedState; 2] {
    let points: Vec<Point> = neighbors.iter().map(|n| n.0).collect();
    let du: Vec<ConservedState> = neighbors.iter().map(|n| n.1 - u0).collect();
    limit_with(&pair_solves(center, &points), &du)
}

/// Limited gradient of `cell` from its edge neighbours.
pub fn cell_gradient(mesh: &Mesh, states: &[ConservedState], cell: usize) -> [ConservedState; 2] {
    let neighbors: Vec<(Point, ConservedState)> = mesh
        .edge_neighbors(cell)
        .map(|o| (mesh.centroids[o], states[o]))
        .collect();
    limited_gradient(mesh.centroids[cell], states[cell], &neighbors)
}

/// Evaluates the limited linear polynomial of `cell` at `p`.
pub fn evaluate_in_cell(
    mesh: &Mesh,
    states: &[ConservedState],
    cell: usize,
    p: Point,
) -> ConservedState {
    let [gx, gy] = cell_gradient(mesh, states, cell);
    let d = p - mesh.centroids[cell];
    states[cell] + gx * d.x + gy * d.y
}

/// Interpolated state at `p`.
pub fn interpolate_state(
    mesh: &Mesh,
    states: &[ConservedState],
    tree: &CentroidTree,
    p: Point,
) -> Result<ConservedState> {
    let cell = tree
        .locate(mesh, p)
        .ok_or(Error::Location { x: p.x, y: p.y })?;
    Ok(evaluate_in_cell(mesh, states, cell, p))
}

/// A solution with every cell's limited gradient precomputed, for repeated
/// point queries.
#[derive(Debug, Clone)]
pub struct LinearField<'a> {
    pub mesh: &'a Mesh,
    pub tree: &'a CentroidTree,
    pub states: &'a [ConservedState],
    gradients: Vec<[ConservedState; 2]>,
}

impl<'a> LinearField<'a> {
    pub fn new(mesh: &'a Mesh, tree: &'a CentroidTree, states: &'a [ConservedState]) -> Self {
        let gradients = (0..mesh.n_cells())
            .map(|c| cell_gradient(mesh, states, c))
            .collect();
        LinearField {
            mesh,
            tree,
            states,
            gradients,
        }
    }

    pub fn gradient(&self, cell: usize) -> [ConservedState; 2] {
        self.gradients[cell]
    }

    pub fn locate(&self, p: Point) -> Option<usize> {
        self.tree.locate(self.mesh, p)
    }

    pub fn value_in(&self, cell: usize, p: Point) -> ConservedState {
        let [gx, gy] = self.gradients[cell];
        let d = p - self.mesh.centroids[cell];
        self.states[cell] + gx * d.x + gy * d.y
    }

    pub fn value_at(&self, p: Point) -> Result<ConservedState> {
        let cell = self.locate(p).ok_or(Error::Location { x: p.x, y: p.y })?;
        Ok(self.value_in(cell, p))
    }
}

/// The 5×5 lattice of spacing `h_coarse` centred on a sample point.
///
/// Points run over `j` (y offset) then `i` (x offset), both from −2 to 2, so
/// the centre is point [`STENCIL_CENTER`].
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub center: Point,
    pub points: [Point; STENCIL_POINTS],
    pub h_coarse: f64,
    pub h_finer: f64,
    pub valid: bool,
    /// Cells owning each point on the coarse and finer meshes; empty when the
    /// stencil is invalid.
    pub coarse_cells: Vec<usize>,
    pub finer_cells: Vec<usize>,
}

/// Lattice points around `center` with spacing `h`.
pub fn stencil_points(center: Point, h: f64) -> [Point; STENCIL_POINTS] {
    let half = (STENCIL_WIDTH / 2) as i32;
    std::array::from_fn(|k| {
        let i = (k % STENCIL_WIDTH) as i32 - half;
        let j = (k / STENCIL_WIDTH) as i32 - half;
        Point::new(center.x + i as f64 * h, center.y + j as f64 * h)
    })
}

/// Builds the stencil at `p`; it is invalid if any lattice point falls
/// outside either mesh.
pub fn build_stencil(
    p: Point,
    coarse: &Mesh,
    coarse_tree: &CentroidTree,
    finer: &Mesh,
    finer_tree: &CentroidTree,
) -> Result<Stencil> {
    let located = |mesh: &Mesh, tree: &CentroidTree| {
        tree.locate(mesh, p).ok_or(Error::Location { x: p.x, y: p.y })
    };
    let h_coarse = coarse.local_size[located(coarse, coarse_tree)?];
    let h_finer = finer.local_size[located(finer, finer_tree)?];
    let points = stencil_points(p, h_coarse);

    let locate_all = |mesh: &Mesh, tree: &CentroidTree| -> Option<Vec<usize>> {
        points.iter().map(|&q| tree.locate(mesh, q)).collect()
    };
    let cells = locate_all(coarse, coarse_tree).and_then(|c| Some((c, locate_all(finer, finer_tree)?)));
    let (valid, coarse_cells, finer_cells) = match cells {
        Some((c, f)) => (true, c, f),
        None => (false, Vec::new(), Vec::new()),
    };
    Ok(Stencil {
        center: p,
        points,
        h_coarse,
        h_finer,
        valid,
        coarse_cells,
        finer_cells,
    })
}
