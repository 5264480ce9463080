//! Input–target records pairing two low-fidelity stencils with the
//! high-fidelity state at the stencil centre.
//!
//! Record layout (202 inputs):
//!
//! | indices   | content                                              |
//! |-----------|------------------------------------------------------|
//! | 0..100    | coarse solution, 25 points × 4 variables (point-major)|
//! | 100..200  | finer solution, same layout                          |
//! | 200       | local cell size of the coarse mesh at the centre     |
//! | 201       | local cell size of the finer mesh at the centre      |

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CaseSpec, Point};
use crate::interpolation::{build_stencil, LinearField, STENCIL_CENTER, STENCIL_POINTS};
use crate::mesh::{Level, Mesh, MeshLevels};
use crate::spatial::CentroidTree;
use crate::state::{ConservedState, VARIABLE_NAMES};

pub const N_VARS: usize = 4;
pub const BLOCK: usize = STENCIL_POINTS * N_VARS;
pub const INPUT_LEN: usize = 2 * BLOCK + 2;
pub const OUTPUT_LEN: usize = N_VARS;
pub const H_COARSE: usize = 2 * BLOCK;
pub const H_FINER: usize = 2 * BLOCK + 1;
pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct StencilSample {
    pub case_id: String,
    pub center: Point,
    /// Area of the finest-mesh cell owning the centre.
    pub area_weight: f64,
    pub inputs: Vec<f64>,
    pub target: [f64; OUTPUT_LEN],
}

impl StencilSample {
    /// Coarse (`Level::Coarse`) or finer (`Level::Finer`) state at stencil point `k`.
    pub fn stencil_state(&self, level: Level, k: usize) -> ConservedState {
        let base = match level {
            Level::Coarse => 0,
            _ => BLOCK,
        } + k * N_VARS;
        ConservedState(std::array::from_fn(|v| self.inputs[base + v]))
    }

    /// Finer-solution value at the centre: the low-fidelity baseline.
    pub fn baseline(&self) -> ConservedState {
        self.stencil_state(Level::Finer, STENCIL_CENTER)
    }

    pub fn target_state(&self) -> ConservedState {
        ConservedState(self.target)
    }
}

/// Variable index of input `i`, or `None` for the two cell sizes.
fn input_variable(i: usize) -> Option<usize> {
    (i < 2 * BLOCK).then_some(i % N_VARS)
}

/// Per-variable min–max scaling to `[0, 1]` over the training corpus.
///
/// The same constants apply to coarse, finer and target values of a
/// variable; each cell-size input has its own pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub state_min: [f64; N_VARS],
    pub state_max: [f64; N_VARS],
    pub h_min: [f64; 2],
    pub h_max: [f64; 2],
}

impl Normalizer {
    fn input_range(&self, i: usize) -> (f64, f64) {
        match input_variable(i) {
            Some(v) => (self.state_min[v], self.state_max[v]),
            None => {
                let k = i - H_COARSE;
                (self.h_min[k], self.h_max[k])
            }
        }
    }

    pub fn normalize_inputs(&self, inputs: &[f64]) -> Vec<f64> {
        inputs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let (lo, hi) = self.input_range(i);
                (x - lo) / (hi - lo)
            })
            .collect()
    }

    pub fn normalize_state(&self, u: &[f64; N_VARS]) -> [f64; N_VARS] {
        std::array::from_fn(|v| (u[v] - self.state_min[v]) / (self.state_max[v] - self.state_min[v]))
    }

    pub fn denormalize(&self, out: &[f64]) -> ConservedState {
        ConservedState(std::array::from_fn(|v| {
            self.state_min[v] + out[v] * (self.state_max[v] - self.state_min[v])
        }))
    }

    /// Normalized copy of a record. Values outside the fitted range are
    /// passed through unclamped.
    pub fn normalize(&self, s: &StencilSample) -> StencilSample {
        StencilSample {
            inputs: self.normalize_inputs(&s.inputs),
            target: self.normalize_state(&s.target),
            ..s.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in VARIABLE_NAMES.iter().enumerate() {
            if !(self.state_max[v] > self.state_min[v]) {
                return Err(Error::DegenerateVariable((*name).into()));
            }
        }
        for (k, name) in ["h_coarse", "h_finer"].iter().enumerate() {
            if !(self.h_max[k] > self.h_min[k]) {
                return Err(Error::DegenerateVariable((*name).into()));
            }
        }
        Ok(())
    }
}

/// Fits min–max constants over inputs and targets of `samples`.
pub fn fit_normalizer(samples: &[StencilSample]) -> Result<Normalizer> {
    if samples.is_empty() {
        return Err(Error::Argument("cannot fit a normalizer on no samples".into()));
    }
    let mut n = Normalizer {
        state_min: [f64::INFINITY; N_VARS],
        state_max: [f64::NEG_INFINITY; N_VARS],
        h_min: [f64::INFINITY; 2],
        h_max: [f64::NEG_INFINITY; 2],
    };
    for s in samples {
        if s.inputs.len() != INPUT_LEN {
            return Err(Error::Shape(format!(
                "record has {} inputs, expected {INPUT_LEN}",
                s.inputs.len()
            )));
        }
        for (i, &x) in s.inputs.iter().enumerate() {
            match input_variable(i) {
                Some(v) => {
                    n.state_min[v] = n.state_min[v].min(x);
                    n.state_max[v] = n.state_max[v].max(x);
                }
                None => {
                    let k = i - H_COARSE;
                    n.h_min[k] = n.h_min[k].min(x);
                    n.h_max[k] = n.h_max[k].max(x);
                }
            }
        }
        for (v, &x) in s.target.iter().enumerate() {
            n.state_min[v] = n.state_min[v].min(x);
            n.state_max[v] = n.state_max[v].max(x);
        }
    }
    n.validate()?;
    Ok(n)
}

/// Candidate training locations: the coarse-cell centroids.
pub fn training_points(coarse: &Mesh) -> Vec<Point> {
    coarse.centroids.clone()
}

/// Candidate prediction locations: the finest-cell centroids.
pub fn prediction_points(finest: &Mesh) -> Vec<Point> {
    finest.centroids.clone()
}

/// Meshes, spatial indices and steady solutions of one case at all three
/// levels.
#[derive(Debug, Clone)]
pub struct CaseData {
    pub case: CaseSpec,
    pub meshes: MeshLevels,
    pub trees: [CentroidTree; 3],
    pub states: [Vec<ConservedState>; 3],
}

impl CaseData {
    pub fn new(case: CaseSpec, meshes: MeshLevels, states: [Vec<ConservedState>; 3]) -> Result<Self> {
        for (l, s) in Level::ALL.iter().zip(&states) {
            if s.len() != meshes.get(*l).n_cells() {
                return Err(Error::Shape(format!(
                    "{l} solution has {} cells, mesh has {}",
                    s.len(),
                    meshes.get(*l).n_cells()
                )));
            }
        }
        let trees = Level::ALL.map(|l| CentroidTree::build(meshes.get(l)));
        Ok(CaseData {
            case,
            meshes,
            trees,
            states,
        })
    }

    pub fn field(&self, level: Level) -> LinearField<'_> {
        let i = level as usize;
        LinearField::new(self.meshes.get(level), &self.trees[i], &self.states[i])
    }

    pub fn sampler(&self) -> Sampler<'_> {
        Sampler {
            data: self,
            coarse: self.field(Level::Coarse),
            finer: self.field(Level::Finer),
            finest: self.field(Level::Finest),
        }
    }
}

/// Precomputed interpolants of one case for assembling many records.
pub struct Sampler<'a> {
    pub data: &'a CaseData,
    pub coarse: LinearField<'a>,
    pub finer: LinearField<'a>,
    pub finest: LinearField<'a>,
}

impl Sampler<'_> {
    /// Record at `p`, or `None` if its stencil leaves either low-fidelity
    /// mesh or `p` cannot be located.
    pub fn assemble(&self, p: Point) -> Option<StencilSample> {
        let d = self.data;
        let stencil = build_stencil(
            p,
            &d.meshes.coarse,
            &d.trees[0],
            &d.meshes.finer,
            &d.trees[1],
        )
        .ok()?;
        if !stencil.valid {
            return None;
        }
        let fine_cell = self.finest.locate(p)?;
        let mut inputs = Vec::with_capacity(INPUT_LEN);
        for (field, cells) in [
            (&self.coarse, &stencil.coarse_cells),
            (&self.finer, &stencil.finer_cells),
        ] {
            for (q, &c) in stencil.points.iter().zip(cells) {
                inputs.extend_from_slice(&field.value_in(c, *q).0);
            }
        }
        inputs.push(stencil.h_coarse);
        inputs.push(stencil.h_finer);
        Some(StencilSample {
            case_id: d.case.id(),
            center: p,
            area_weight: d.meshes.finest.areas[fine_cell],
            inputs,
            target: self.finest.value_in(fine_cell, p).0,
        })
    }

    /// Records at every coarse centroid with a valid stencil.
    pub fn training_samples(&self) -> Vec<StencilSample> {
        training_points(&self.data.meshes.coarse)
            .into_iter()
            .filter_map(|p| self.assemble(p))
            .collect()
    }
}

/// Record at `p` for one case; see [`Sampler::assemble`].
pub fn assemble_sample(data: &CaseData, p: Point) -> Option<StencilSample> {
    data.sampler().assemble(p)
}

/// Training records of every case, in case order.
pub fn build_corpus(cases: &[CaseData]) -> Vec<StencilSample> {
    cases
        .iter()
        .flat_map(|c| c.sampler().training_samples())
        .collect()
}

/// A table of raw records plus the normalizer fitted on its training part.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub normalizer: Option<Normalizer>,
    pub samples: Vec<StencilSample>,
}

const DATASET_MAGIC: &str = "# nnlci-dataset";

impl Dataset {
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * INPUT_LEN * 24);
        let _ = writeln!(out, "{DATASET_MAGIC} {LAYOUT_VERSION}");
        let _ = writeln!(
            out,
            "# layout: case_id x y area_weight coarse[25x4] finer[25x4] h_coarse h_finer target[4]"
        );
        let norm = serde_json::to_string(&self.normalizer).expect("normalizer serializes");
        let _ = writeln!(out, "# normalizer: {norm}");
        for s in &self.samples {
            let _ = write!(out, "{} {:e} {:e} {:e}", s.case_id, s.center.x, s.center.y, s.area_weight);
            for x in s.inputs.iter().chain(&s.target) {
                let _ = write!(out, " {x:e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Dataset> {
        let text = crate::io::read_to_string(path, "dataset build")?;
        Self::parse(&text).map_err(|m| Error::format(path, m))
    }

    pub fn parse(text: &str) -> std::result::Result<Dataset, String> {
        let mut lines = text.lines();
        let magic = lines.next().ok_or("empty dataset file")?;
        let version = magic
            .strip_prefix(DATASET_MAGIC)
            .map(str::trim)
            .ok_or("not a dataset file")?;
        if version != LAYOUT_VERSION.to_string() {
            return Err(format!("unsupported layout version {version}"));
        }
        lines.next().ok_or("missing layout line")?;
        let norm_line = lines.next().ok_or("missing normalizer line")?;
        let normalizer: Option<Normalizer> = serde_json::from_str(
            norm_line
                .strip_prefix("# normalizer: ")
                .ok_or("malformed normalizer line")?,
        )
        .map_err(|e| e.to_string())?;
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let mut f = line.split_whitespace();
            let case_id = f.next().ok_or(format!("record {i}: empty"))?.to_string();
            let nums: Vec<f64> = f
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| format!("record {i}: bad number"))?;
            if nums.len() != 3 + INPUT_LEN + OUTPUT_LEN {
                return Err(format!("record {i}: expected {} numbers", 3 + INPUT_LEN + OUTPUT_LEN));
            }
            samples.push(StencilSample {
                case_id,
                center: Point::new(nums[0], nums[1]),
                area_weight: nums[2],
                inputs: nums[3..3 + INPUT_LEN].to_vec(),
                target: std::array::from_fn(|v| nums[3 + INPUT_LEN + v]),
            });
        }
        Ok(Dataset {
            normalizer,
            samples,
        })
    }
}
