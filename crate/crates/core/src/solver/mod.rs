//! Steady second-order finite-volume solver for the 2D Euler equations on
//! triangular meshes.
//!
//! Cell gradients use the same minmod pair limiter as point interpolation,
//! with boundary faces contributing a ghost neighbour at the centroid
//! mirrored across the face. Faces are integrated with the Rusanov flux and
//! time is marched with the two-stage TVD Runge-Kutta scheme, using local
//! time steps by default.

mod boundary;
mod flux;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use boundary::apply_boundary;
pub use flux::rusanov_flux;

use crate::error::{Error, Result};
use crate::geometry::{CaseSpec, Point};
use crate::interpolation::{limit_with, neighbor_pairs, pair_solves, PairSolve};
use crate::mesh::{BoundaryTag, Face, Mesh};
use crate::state::{inflow_state, ConservedState, GAMMA};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub gamma: f64,
    pub cfl: f64,
    /// Stop once the density residual falls below this fraction of its
    /// initial value.
    pub residual_tol: f64,
    pub max_steps: usize,
    /// Per-cell time steps; set to false for a single global step.
    pub local_time_stepping: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: GAMMA,
            cfl: 0.2,
            residual_tol: 1e-8,
            max_steps: 200_000,
            local_time_stepping: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) || !(self.cfl > 0.0) || !(self.residual_tol >= 0.0) || self.max_steps == 0 {
            return Err(Error::Config(format!("invalid solver settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceGeometry {
    pub left: usize,
    pub right: Face,
    /// Unit normal pointing out of `left`.
    pub normal: Point,
    pub length: f64,
    pub midpoint: Point,
}

#[derive(Debug, Clone, Copy)]
enum Across {
    Cell(usize),
    Ghost { tag: BoundaryTag, normal: Point },
}

/// Geometric data of a mesh prepared for repeated residual evaluation.
#[derive(Debug, Clone)]
pub struct Discretization<'m> {
    pub mesh: &'m Mesh,
    pub faces: Vec<FaceGeometry>,
    across: Vec<[Across; 3]>,
    /// Face-midpoint offsets from the centroid, by local edge.
    offsets: Vec<[Point; 3]>,
    solves: Vec<Vec<PairSolve>>,
}

impl<'m> Discretization<'m> {
    pub fn new(mesh: &'m Mesh) -> Self {
        let n = mesh.n_cells();
        let mut faces = Vec::with_capacity(n * 2);
        let mut across = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        let mut solves = Vec::with_capacity(n);
        for c in 0..n {
            let xc = mesh.centroids[c];
            let mut acr = [Across::Cell(0); 3];
            let mut off = [Point::default(); 3];
            let mut nbr_points = [Point::default(); 3];
            for k in 0..3 {
                let (a, b) = mesh.edge(c, k);
                let mid = a.midpoint(b);
                let scaled = mesh.scaled_normal(c, k);
                let length = scaled.norm();
                let normal = scaled * (1.0 / length);
                off[k] = mid - xc;
                match mesh.faces[c][k] {
                    Face::Interior(o) => {
                        acr[k] = Across::Cell(o);
                        nbr_points[k] = mesh.centroids[o];
                        if c < o {
                            faces.push(FaceGeometry {
                                left: c,
                                right: Face::Interior(o),
                                normal,
                                length,
                                midpoint: mid,
                            });
                        }
                    }
                    Face::Boundary(tag) => {
                        acr[k] = Across::Ghost { tag, normal };
                        nbr_points[k] = xc + normal * (2.0 * off[k].dot(normal));
                        faces.push(FaceGeometry {
                            left: c,
                            right: Face::Boundary(tag),
                            normal,
                            length,
                            midpoint: mid,
                        });
                    }
                }
            }
            across.push(acr);
            offsets.push(off);
            solves.push(pair_solves(xc, &nbr_points));
        }
        debug_assert!(neighbor_pairs(3).len() == 3);
        Discretization {
            mesh,
            faces,
            across,
            offsets,
            solves,
        }
    }

    /// Limited gradients of every cell. Cells whose reconstructed face
    /// states would be unphysical get a zero gradient.
    pub fn gradients(
        &self,
        states: &[ConservedState],
        freestream: &ConservedState,
        gamma: f64,
        out: &mut Vec<[ConservedState; 2]>,
    ) {
        out.clear();
        out.extend((0..self.mesh.n_cells()).map(|c| {
            let u0 = states[c];
            let du: [ConservedState; 3] = std::array::from_fn(|k| match self.across[c][k] {
                Across::Cell(o) => states[o] - u0,
                Across::Ghost { tag, normal } => apply_boundary(&u0, tag, normal, freestream) - u0,
            });
            let [gx, gy] = limit_with(&self.solves[c], &du);
            let physical = self.offsets[c]
                .iter()
                .all(|d| (u0 + gx * d.x + gy * d.y).is_physical(gamma));
            if physical {
                [gx, gy]
            } else {
                [ConservedState::ZERO; 2]
            }
        }));
    }

    fn reconstruct(
        &self,
        states: &[ConservedState],
        grads: &[[ConservedState; 2]],
        cell: usize,
        at: Point,
    ) -> ConservedState {
        let d = at - self.mesh.centroids[cell];
        let [gx, gy] = grads[cell];
        states[cell] + gx * d.x + gy * d.y
    }

    /// Left and right states on every face (ghost states on boundary faces).
    pub fn face_states(
        &self,
        states: &[ConservedState],
        freestream: &ConservedState,
        gamma: f64,
    ) -> Vec<(ConservedState, ConservedState)> {
        let mut grads = Vec::new();
        self.gradients(states, freestream, gamma, &mut grads);
        self.faces
            .iter()
            .map(|f| self.face_pair(states, &grads, f, freestream))
            .collect()
    }

    #[inline]
    fn face_pair(
        &self,
        states: &[ConservedState],
        grads: &[[ConservedState; 2]],
        f: &FaceGeometry,
        freestream: &ConservedState,
    ) -> (ConservedState, ConservedState) {
        let ul = self.reconstruct(states, grads, f.left, f.midpoint);
        let ur = match f.right {
            Face::Interior(o) => self.reconstruct(states, grads, o, f.midpoint),
            Face::Boundary(tag) => apply_boundary(&ul, tag, f.normal, freestream),
        };
        (ul, ur)
    }

    /// `du/dt` of every cell into `out`; returns the outward flux through
    /// the boundary (flux times edge length, summed).
    pub fn residual_into(
        &self,
        states: &[ConservedState],
        freestream: &ConservedState,
        gamma: f64,
        grads: &mut Vec<[ConservedState; 2]>,
        out: &mut Vec<ConservedState>,
    ) -> Result<BoundaryFlux> {
        self.gradients(states, freestream, gamma, grads);
        out.clear();
        out.resize(self.mesh.n_cells(), ConservedState::ZERO);
        let mut boundary = BoundaryFlux::default();
        for f in &self.faces {
            let (ul, ur) = self.face_pair(states, grads, f, freestream);
            let flux = flux::rusanov_checked(&ul, &ur, f.normal, gamma).ok_or_else(|| {
                Error::State {
                    cell: f.left,
                    reason: "reconstructed face state is not physical".into(),
                }
            })? * f.length;
            out[f.left] = out[f.left] - flux;
            match f.right {
                Face::Interior(o) => out[o] += flux,
                Face::Boundary(_) => {
                    boundary.net += flux;
                    boundary.gross += flux.map(f64::abs);
                }
            }
        }
        for (r, &a) in out.iter_mut().zip(&self.mesh.areas) {
            *r = *r * (1.0 / a);
        }
        Ok(boundary)
    }
}

/// Boundary flux of one residual evaluation, times edge length.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryFlux {
    /// Net outward flux.
    pub net: ConservedState,
    /// Componentwise sum of absolute face fluxes.
    pub gross: ConservedState,
}

/// Per-face reconstructed states of `states`.
pub fn muscl_reconstruct(
    mesh: &Mesh,
    states: &[ConservedState],
    case: &CaseSpec,
    config: &SolverConfig,
) -> Vec<(FaceGeometry, ConservedState, ConservedState)> {
    let disc = Discretization::new(mesh);
    let free = freestream(case, config);
    let pairs = disc.face_states(states, &free, config.gamma);
    disc.faces.iter().zip(pairs).map(|(f, (l, r))| (*f, l, r)).collect()
}

/// Spatial residual `du/dt` of every cell.
pub fn residual(
    mesh: &Mesh,
    states: &[ConservedState],
    case: &CaseSpec,
    config: &SolverConfig,
) -> Result<Vec<ConservedState>> {
    let disc = Discretization::new(mesh);
    let mut grads = Vec::new();
    let mut out = Vec::new();
    disc.residual_into(states, &freestream(case, config), config.gamma, &mut grads, &mut out)?;
    Ok(out)
}

pub fn freestream(case: &CaseSpec, config: &SolverConfig) -> ConservedState {
    inflow_state(case.mach(), config.gamma).to_conserved(config.gamma)
}

/// What one RK2 step did to the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// RMS density residual at the start of the step.
    pub density_residual: f64,
    /// Net inflow through the boundary over the step, integrated in time.
    /// Only defined for a global time step, where it equals the change of
    /// the domain integral of every conserved variable.
    pub boundary_inflow: Option<ConservedState>,
    /// Same integral of the componentwise absolute boundary flux: the
    /// magnitude that roundoff in the balance scales with.
    pub boundary_gross: Option<ConservedState>,
    /// Global time step, or the smallest local one.
    pub dt: f64,
}

/// Explicit steady-state solver bound to one mesh and case.
pub struct Solver<'m> {
    disc: Discretization<'m>,
    config: SolverConfig,
    free: ConservedState,
    grads: Vec<[ConservedState; 2]>,
    res: Vec<ConservedState>,
    stage: Vec<ConservedState>,
    dt: Vec<f64>,
    step: usize,
}

impl<'m> Solver<'m> {
    pub fn new(mesh: &'m Mesh, case: &CaseSpec, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        case.validate()?;
        Ok(Solver {
            disc: Discretization::new(mesh),
            free: freestream(case, &config),
            config,
            grads: Vec::new(),
            res: Vec::new(),
            stage: Vec::new(),
            dt: Vec::new(),
            step: 0,
        })
    }

    pub fn freestream(&self) -> ConservedState {
        self.free
    }

    pub fn initial_states(&self) -> Vec<ConservedState> {
        vec![self.free; self.disc.mesh.n_cells()]
    }

    fn time_steps(&mut self, states: &[ConservedState]) -> Result<()> {
        let mesh = self.disc.mesh;
        let gamma = self.config.gamma;
        self.dt.clear();
        for (c, u) in states.iter().enumerate() {
            let rho = u[0];
            let p = u.pressure(gamma);
            if !(rho > 0.0 && p > 0.0) {
                return Err(self.diverged(c, "non-physical state before step"));
            }
            let speed = (u[1] * u[1] + u[2] * u[2]).sqrt() / rho + (gamma * p / rho).sqrt();
            self.dt.push(self.config.cfl * mesh.local_size[c] / speed);
        }
        if !self.config.local_time_stepping {
            let min = self.dt.iter().copied().fold(f64::INFINITY, f64::min);
            self.dt.iter_mut().for_each(|d| *d = min);
        }
        Ok(())
    }

    fn diverged(&self, cell: usize, reason: &str) -> Error {
        Error::Diverged {
            step: self.step,
            cell,
            reason: reason.to_string(),
        }
    }

    fn check(&self, states: &[ConservedState]) -> Result<()> {
        match states.iter().position(|u| !u.is_physical(self.config.gamma)) {
            Some(c) => Err(self.diverged(c, "negative density or pressure")),
            None => Ok(()),
        }
    }

    fn eval(&mut self, states: &[ConservedState]) -> Result<BoundaryFlux> {
        let gamma = self.config.gamma;
        let step = self.step;
        self.disc
            .residual_into(states, &self.free, gamma, &mut self.grads, &mut self.res)
            .map_err(|e| match e {
                Error::State { cell, reason } => Error::Diverged { step, cell, reason },
                other => other,
            })
    }

    /// Advances `states` by one two-stage TVD Runge-Kutta step.
    pub fn step(&mut self, states: &mut [ConservedState]) -> Result<StepReport> {
        self.time_steps(states)?;
        let n = states.len();
        let b0 = self.eval(states)?;
        let density_residual =
            (self.res.iter().map(|r| r[0] * r[0]).sum::<f64>() / n as f64).sqrt();

        self.stage.clear();
        self.stage
            .extend(states.iter().zip(&self.res).zip(&self.dt).map(|((u, r), &dt)| *u + *r * dt));
        self.check(&self.stage)?;
        let stage = std::mem::take(&mut self.stage);
        let b1 = self.eval(&stage);
        let b1 = match b1 {
            Ok(b) => b,
            Err(e) => {
                self.stage = stage;
                return Err(e);
            }
        };
        for c in 0..n {
            states[c] = (states[c] + stage[c] + self.res[c] * self.dt[c]) * 0.5;
        }
        self.stage = stage;
        self.check(states)?;

        let dt = self.dt.iter().copied().fold(f64::INFINITY, f64::min);
        let global = !self.config.local_time_stepping;
        let boundary_inflow = global.then(|| -(b0.net + b1.net) * (0.5 * dt));
        let boundary_gross = global.then(|| (b0.gross + b1.gross) * (0.5 * dt));
        self.step += 1;
        Ok(StepReport {
            density_residual,
            boundary_inflow,
            boundary_gross,
            dt,
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Marches from the free stream until the density residual drops by
    /// `residual_tol` (or to roundoff) or `max_steps` is reached.
    pub fn run(&mut self) -> Result<SteadySolution> {
        let mut states = self.initial_states();
        let mut history = Vec::new();
        let mut converged = false;
        let mut initial = None;
        while self.step < self.config.max_steps {
            let report = self.step(&mut states)?;
            let r = report.density_residual;
            history.push(r);
            let r0 = *initial.get_or_insert(r);
            if r <= (self.config.residual_tol * r0).max(ROUNDOFF_RESIDUAL) {
                converged = true;
                break;
            }
            if self.step.is_multiple_of(1000) {
                log::debug!("step {} density residual {:.3e}", self.step, r / r0);
            }
        }
        if !converged {
            log::warn!(
                "no convergence after {} steps (residual ratio {:.3e})",
                self.step,
                history.last().copied().unwrap_or(0.0) / initial.unwrap_or(1.0)
            );
        }
        Ok(SteadySolution {
            states,
            history,
            converged,
            steps: self.step,
        })
    }
}

/// Density residuals at this level are roundoff for O(1) states.
const ROUNDOFF_RESIDUAL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadySolution {
    pub states: Vec<ConservedState>,
    /// RMS density residual at every step.
    pub history: Vec<f64>,
    pub converged: bool,
    pub steps: usize,
}

pub fn solve_steady(mesh: &Mesh, case: &CaseSpec, config: &SolverConfig) -> Result<SteadySolution> {
    Solver::new(mesh, case, *config)?.run()
}

/// Header of a solution file.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionHeader {
    pub mesh: String,
    pub case: CaseSpec,
    pub converged: bool,
    pub steps: usize,
    pub final_residual: f64,
}

const SOLUTION_MAGIC: &str = "# nnlci-solution 1";

/// Plain-text solution: `#` header lines, then one `rho rho_u rho_v rho_E`
/// line per cell.
pub fn solution_to_text(header: &SolutionHeader, states: &[ConservedState]) -> String {
    let mut out = String::with_capacity(states.len() * 96 + 256);
    let case = serde_json::to_string(&header.case).expect("case spec serializes");
    let _ = writeln!(out, "{SOLUTION_MAGIC}");
    let _ = writeln!(out, "# mesh: {}", header.mesh);
    let _ = writeln!(out, "# case: {case}");
    let _ = writeln!(
        out,
        "# converged: {} steps: {} residual: {:e}",
        header.converged, header.steps, header.final_residual
    );
    let _ = writeln!(out, "# cells: {}", states.len());
    for u in states {
        let _ = writeln!(out, "{:e} {:e} {:e} {:e}", u[0], u[1], u[2], u[3]);
    }
    out
}

pub fn write_solution(path: &Path, header: &SolutionHeader, states: &[ConservedState]) -> Result<()> {
    crate::io::write_atomic(path, solution_to_text(header, states).as_bytes())
}

pub fn read_solution(path: &Path) -> Result<(SolutionHeader, Vec<ConservedState>)> {
    let text = crate::io::read_to_string(path, "solve")?;
    parse_solution(&text).map_err(|m| Error::format(path, m))
}

pub fn parse_solution(text: &str) -> std::result::Result<(SolutionHeader, Vec<ConservedState>), String> {
    let mut lines = text.lines();
    if lines.next() != Some(SOLUTION_MAGIC) {
        return Err("not a solution file (bad magic line)".into());
    }
    let mut field = |name: &str| -> std::result::Result<String, String> {
        let line = lines.next().ok_or(format!("missing `{name}` header"))?;
        line.strip_prefix(&format!("# {name}: "))
            .map(str::to_string)
            .ok_or(format!("expected `{name}` header, found `{line}`"))
    };
    let mesh = field("mesh")?;
    let case: CaseSpec = serde_json::from_str(&field("case")?).map_err(|e| e.to_string())?;
    let status = field("converged")?;
    let parts: Vec<&str> = status.split_whitespace().collect();
    if parts.len() != 5 || parts[1] != "steps:" || parts[3] != "residual:" {
        return Err(format!("malformed status `{status}`"));
    }
    let converged = parts[0].parse().map_err(|_| "bad converged flag")?;
    let steps = parts[2].parse().map_err(|_| "bad step count")?;
    let final_residual = parts[4].parse().map_err(|_| "bad residual")?;
    let n: usize = field("cells")?.parse().map_err(|_| "bad cell count")?;
    let mut states = Vec::with_capacity(n);
    for (i, line) in lines.enumerate() {
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format!("cell {i}: cannot parse `{line}`"))?;
        if v.len() != 4 {
            return Err(format!("cell {i}: expected 4 values"));
        }
        states.push(ConservedState([v[0], v[1], v[2], v[3]]));
    }
    if states.len() != n {
        return Err(format!("header promises {n} cells, found {}", states.len()));
    }
    Ok((
        SolutionHeader {
            mesh,
            case,
            converged,
            steps,
            final_residual,
        },
        states,
    ))
}
