//! Full-field prediction at finest-mesh centroids, area-weighted error
//! metrics and field exports.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{prediction_points, CaseData, StencilSample, INPUT_LEN};
use crate::error::{Error, Result};
use crate::geometry::{Point, CHANNEL_HEIGHT, X_MAX, X_MIN};
use crate::interpolation::LinearField;
use crate::mesh::Mesh;
use crate::nn::{InferenceModel, MlpModel};
use crate::spatial::CentroidTree;
use crate::state::{primitive_from_conserved, ConservedState, VARIABLE_NAMES};

/// Predicted, true and low-fidelity states at the valid prediction points
/// of one case.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldReport {
    pub case_id: String,
    pub gamma: f64,
    pub points: Vec<Point>,
    /// Finest-mesh cell of each point.
    pub cells: Vec<usize>,
    pub areas: Vec<f64>,
    pub predicted: Vec<ConservedState>,
    pub truth: Vec<ConservedState>,
    pub baseline: Vec<ConservedState>,
    /// Points dropped because their stencil left a low-fidelity mesh.
    pub excluded: usize,
}

impl FieldReport {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn sums(&self) -> MetricSums {
        MetricSums::of(self)
    }

    /// Per-cell field on the finest mesh: the prediction where available,
    /// the low-fidelity baseline elsewhere.
    pub fn predicted_field(&self, data: &CaseData) -> Result<Vec<ConservedState>> {
        let finer = data.field(crate::mesh::Level::Finer);
        let mut out: Vec<ConservedState> = data
            .meshes
            .finest
            .centroids
            .iter()
            .map(|&c| finer.value_at(c))
            .collect::<Result<_>>()?;
        for (&cell, u) in self.cells.iter().zip(&self.predicted) {
            out[cell] = *u;
        }
        Ok(out)
    }
}

/// Runs the model at every finest-mesh centroid with a valid stencil.
pub fn predict_field(model: &MlpModel, data: &CaseData, gamma: f64) -> Result<FieldReport> {
    if model.n_inputs() != INPUT_LEN {
        return Err(Error::Shape(format!(
            "model expects {} inputs, records have {INPUT_LEN}",
            model.n_inputs()
        )));
    }
    let sampler = data.sampler();
    let points = prediction_points(&data.meshes.finest);
    let samples: Vec<(usize, StencilSample)> = points
        .par_iter()
        .enumerate()
        .filter_map(|(cell, &p)| sampler.assemble(p).map(|s| (cell, s)))
        .collect();
    let excluded = points.len() - samples.len();
    let mut inputs = Array2::zeros((samples.len(), INPUT_LEN));
    for (row, (_, s)) in inputs.rows_mut().into_iter().zip(&samples) {
        row.into_slice().expect("contiguous row").copy_from_slice(&s.inputs);
    }
    let predicted = InferenceModel::new(model)?.predict_raw(inputs.view())?;
    let finest = &data.meshes.finest;
    Ok(FieldReport {
        case_id: data.case.id(),
        gamma,
        points: samples.iter().map(|(_, s)| s.center).collect(),
        cells: samples.iter().map(|(c, _)| *c).collect(),
        areas: samples.iter().map(|(c, _)| finest.areas[*c]).collect(),
        predicted,
        truth: samples.iter().map(|(c, _)| data.states[2][*c]).collect(),
        baseline: samples.iter().map(|(_, s)| s.baseline()).collect(),
        excluded,
    })
}

/// Quantity compared inside the norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    /// All four conserved variables jointly.
    #[default]
    Conserved,
    /// Mach number only.
    Mach,
}

/// Mach number of a state, NaN if it is not physical.
pub fn mach_number(u: &ConservedState, gamma: f64) -> f64 {
    primitive_from_conserved(u, gamma, 0).map_or(f64::NAN, |w| w.mach)
}

/// Area-weighted numerators and denominators, additive over points so that
/// metrics over several cases are metrics over the union of their points.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSums {
    pub points: usize,
    pub excluded: usize,
    pub l1_error: f64,
    pub l1_truth: f64,
    pub sq_error: f64,
    pub sq_truth: f64,
    pub baseline_l1_error: f64,
    pub baseline_sq_error: f64,
}

impl MetricSums {
    pub fn of(r: &FieldReport) -> Self {
        Self::with_mode(r, MetricMode::Conserved)
    }

    pub fn with_mode(r: &FieldReport, mode: MetricMode) -> Self {
        let vec = |u: &ConservedState| -> Vec<f64> {
            match mode {
                MetricMode::Conserved => u.0.to_vec(),
                MetricMode::Mach => vec![mach_number(u, r.gamma)],
            }
        };
        let mut s = MetricSums {
            points: r.len(),
            excluded: r.excluded,
            ..Default::default()
        };
        for k in 0..r.len() {
            let a = r.areas[k];
            let t = vec(&r.truth[k]);
            let p = vec(&r.predicted[k]);
            let b = vec(&r.baseline[k]);
            for ((t, p), b) in t.iter().zip(&p).zip(&b) {
                s.l1_error += a * (p - t).abs();
                s.l1_truth += a * t.abs();
                s.sq_error += a * (p - t) * (p - t);
                s.sq_truth += a * t * t;
                s.baseline_l1_error += a * (b - t).abs();
                s.baseline_sq_error += a * (b - t) * (b - t);
            }
        }
        s
    }

    pub fn merge(&self, o: &MetricSums) -> MetricSums {
        MetricSums {
            points: self.points + o.points,
            excluded: self.excluded + o.excluded,
            l1_error: self.l1_error + o.l1_error,
            l1_truth: self.l1_truth + o.l1_truth,
            sq_error: self.sq_error + o.sq_error,
            sq_truth: self.sq_truth + o.sq_truth,
            baseline_l1_error: self.baseline_l1_error + o.baseline_l1_error,
            baseline_sq_error: self.baseline_sq_error + o.baseline_sq_error,
        }
    }

    fn ratio(num: f64, den: f64) -> Result<f64> {
        if den > 0.0 && num.is_finite() {
            Ok(num / den)
        } else {
            Err(Error::Metric(format!("undefined ratio {num}/{den}")))
        }
    }

    pub fn relative_l1(&self) -> Result<f64> {
        Self::ratio(self.l1_error, self.l1_truth)
    }

    pub fn rrmse(&self) -> Result<f64> {
        Self::ratio(self.sq_error, self.sq_truth).map(f64::sqrt)
    }

    pub fn baseline_l1(&self) -> Result<f64> {
        Self::ratio(self.baseline_l1_error, self.l1_truth)
    }

    pub fn baseline_rrmse(&self) -> Result<f64> {
        Self::ratio(self.baseline_sq_error, self.sq_truth).map(f64::sqrt)
    }
}

/// Σ A‖ũ−u‖₁ / Σ A‖u‖₁ over the report's points.
pub fn relative_l1(report: &FieldReport) -> Result<f64> {
    report.sums().relative_l1()
}

/// sqrt(Σ A‖ũ−u‖₂² / Σ A‖u‖₂²) over the report's points.
pub fn rrmse(report: &FieldReport) -> Result<f64> {
    report.sums().rrmse()
}

/// Relative L1 error of the finer-solution baseline.
pub fn baseline_error(report: &FieldReport) -> Result<f64> {
    report.sums().baseline_l1()
}

/// Relative L1 error of each conserved variable separately.
pub fn per_variable_l1(report: &FieldReport) -> Result<[f64; 4]> {
    let mut num = [0.0; 4];
    let mut den = [0.0; 4];
    for k in 0..report.len() {
        let a = report.areas[k];
        for v in 0..4 {
            num[v] += a * (report.predicted[k][v] - report.truth[k][v]).abs();
            den[v] += a * report.truth[k][v].abs();
        }
    }
    let mut out = [0.0; 4];
    for v in 0..4 {
        out[v] = MetricSums::ratio(num[v], den[v])?;
    }
    Ok(out)
}

/// Per-cell pressure, Mach number and density-gradient magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedFields {
    pub pressure: Vec<f64>,
    pub mach: Vec<f64>,
    pub density_gradient: Vec<f64>,
}

pub fn derived_fields(states: &[ConservedState], mesh: &Mesh, gamma: f64) -> Result<DerivedFields> {
    if states.len() != mesh.n_cells() {
        return Err(Error::Shape(format!(
            "{} states for {} cells",
            states.len(),
            mesh.n_cells()
        )));
    }
    let mut pressure = Vec::with_capacity(states.len());
    let mut mach = Vec::with_capacity(states.len());
    for (c, u) in states.iter().enumerate() {
        let w = primitive_from_conserved(u, gamma, c)?;
        pressure.push(w.p);
        mach.push(w.mach);
    }
    let density_gradient = (0..mesh.n_cells())
        .map(|c| {
            let [gx, gy] = crate::interpolation::cell_gradient(mesh, states, c);
            gx[0].hypot(gy[0])
        })
        .collect();
    Ok(DerivedFields {
        pressure,
        mach,
        density_gradient,
    })
}

/// `(x, M)` along `y = y0`, one sample per finest-mesh cell width.
pub fn centerline_profile(
    mesh: &Mesh,
    tree: &CentroidTree,
    states: &[ConservedState],
    y0: f64,
    gamma: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(y0 > 0.0 && y0 < CHANNEL_HEIGHT) {
        return Err(Error::Domain { x: y0 });
    }
    let field = LinearField::new(mesh, tree, states);
    let h = (mesh.total_area() / mesh.n_cells() as f64 * 2.0).sqrt();
    let n = ((X_MAX - X_MIN) / h).round().max(1.0) as usize;
    let dx = (X_MAX - X_MIN) / n as f64;
    (0..n)
        .map(|i| {
            let x = X_MIN + (i as f64 + 0.5) * dx;
            let u = field.value_at(Point::new(x, y0))?;
            Ok((x, primitive_from_conserved(&u, gamma, usize::MAX)?.mach))
        })
        .collect()
}

/// CSV with one row per valid point.
pub fn report_csv(report: &FieldReport) -> String {
    let mut out = String::new();
    out.push_str("x,y,area");
    for prefix in ["truth", "pred", "base"] {
        for v in VARIABLE_NAMES {
            let _ = write!(out, ",{prefix}_{v}");
        }
    }
    out.push_str(",pressure,mach\n");
    for k in 0..report.len() {
        let p = report.points[k];
        let _ = write!(out, "{:e},{:e},{:e}", p.x, p.y, report.areas[k]);
        for u in [&report.truth[k], &report.predicted[k], &report.baseline[k]] {
            for v in 0..4 {
                let _ = write!(out, ",{:e}", u[v]);
            }
        }
        let pred = &report.predicted[k];
        let _ = writeln!(
            out,
            ",{:e},{:e}",
            pred.pressure(report.gamma),
            mach_number(pred, report.gamma)
        );
    }
    out
}

pub fn write_report_csv(report: &FieldReport, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, report_csv(report).as_bytes())
}

/// Legacy VTK unstructured grid with truth, prediction and baseline as cell
/// data; `valid` marks cells whose prediction came from the network.
pub fn report_vtk(report: &FieldReport, data: &CaseData) -> Result<String> {
    let mesh = &data.meshes.finest;
    let predicted = report.predicted_field(data)?;
    let mut baseline = predicted.clone();
    let mut valid = vec![0u8; mesh.n_cells()];
    for (k, &c) in report.cells.iter().enumerate() {
        baseline[c] = report.baseline[k];
        valid[c] = 1;
    }
    let truth = &data.states[2];
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0\n{}\nASCII\nDATASET UNSTRUCTURED_GRID", report.case_id);
    let _ = writeln!(out, "POINTS {} double", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{:e} {:e} 0", v.x, v.y);
    }
    let _ = writeln!(out, "CELLS {} {}", mesh.n_cells(), 4 * mesh.n_cells());
    for c in &mesh.cells {
        let _ = writeln!(out, "3 {} {} {}", c[0], c[1], c[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {}", mesh.n_cells());
    for _ in 0..mesh.n_cells() {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "CELL_DATA {}", mesh.n_cells());
    let _ = writeln!(out, "SCALARS valid int 1\nLOOKUP_TABLE default");
    for v in &valid {
        let _ = writeln!(out, "{v}");
    }
    for (name, field) in [("truth", truth.as_slice()), ("pred", &predicted), ("base", &baseline)] {
        for (v, var) in VARIABLE_NAMES.iter().enumerate() {
            let _ = writeln!(out, "SCALARS {name}_{var} double 1\nLOOKUP_TABLE default");
            for u in field {
                let _ = writeln!(out, "{:e}", u[v]);
            }
        }
        let _ = writeln!(out, "SCALARS {name}_mach double 1\nLOOKUP_TABLE default");
        for u in field {
            let _ = writeln!(out, "{:e}", mach_number(u, report.gamma));
        }
    }
    Ok(out)
}

pub fn write_report_vtk(report: &FieldReport, data: &CaseData, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, report_vtk(report, data)?.as_bytes())
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub case: String,
    pub relative_l1: f64,
    pub rrmse: f64,
    pub baseline_l1: f64,
}

impl MetricsRow {
    pub fn from_sums(case: &str, s: &MetricSums) -> Result<Self> {
        Ok(MetricsRow {
            case: case.to_string(),
            relative_l1: s.relative_l1()?,
            rrmse: s.rrmse()?,
            baseline_l1: s.baseline_l1()?,
        })
    }
}

/// Per-case rows followed by a `Total` row over the union of all points.
pub fn summary_rows(cases: &[(String, MetricSums)]) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::with_capacity(cases.len() + 1);
    let mut total = MetricSums::default();
    for (id, s) in cases {
        rows.push(MetricsRow::from_sums(id, s)?);
        total = total.merge(s);
    }
    rows.push(MetricsRow::from_sums("Total", &total)?);
    Ok(rows)
}

/// Fixed-width text table of `rows`, errors in percent.
pub fn format_table(rows: &[MetricsRow]) -> String {
    let w = rows.iter().map(|r| r.case.len()).max().unwrap_or(4).max(4);
    let mut out = format!(
        "{:<w$}  {:>12}  {:>12}  {:>14}\n",
        "case", "rel. L1 (%)", "RRMSE (%)", "low-fi L1 (%)"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<w$}  {:>12.3}  {:>12.3}  {:>14.3}",
            r.case,
            100.0 * r.relative_l1,
            100.0 * r.rrmse,
            100.0 * r.baseline_l1
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{inflow_state, GAMMA};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_report(n: usize, seed: u64) -> FieldReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = || {
            ConservedState::new(
                rng.random_range(0.5..2.0),
                rng.random_range(0.5..3.0),
                rng.random_range(-0.5..0.5),
                rng.random_range(2.0..6.0),
            )
        };
        let truth: Vec<_> = (0..n).map(|_| state()).collect();
        let predicted: Vec<_> = (0..n).map(|_| state()).collect();
        let baseline: Vec<_> = (0..n).map(|_| state()).collect();
        FieldReport {
            case_id: "r".into(),
            gamma: GAMMA,
            points: vec![Point::new(0.0, 0.4); n],
            cells: (0..n).collect(),
            areas: (0..n).map(|k| 0.001 * (1 + k % 7) as f64).collect(),
            predicted,
            truth,
            baseline,
            excluded: 0,
        }
    }

    #[test]
    fn perfect_prediction_scores_zero() {
        let mut r = random_report(20, 1);
        r.predicted = r.truth.clone();
        r.baseline = r.truth.clone();
        assert_eq!(relative_l1(&r).unwrap(), 0.0);
        assert_eq!(rrmse(&r).unwrap(), 0.0);
        assert_eq!(baseline_error(&r).unwrap(), 0.0);
    }

    #[test]
    fn one_percent_scaling() {
        let mut r = random_report(1, 2);
        r.predicted[0] = r.truth[0] * 1.01;
        assert!((relative_l1(&r).unwrap() - 0.01).abs() < 1e-15);
        assert!((rrmse(&r).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn metrics_match_re_summation() {
        let r = random_report(50, 3);
        let (mut n1, mut d1, mut n2, mut d2, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..50 {
            for v in 0..4 {
                let (p, t, b) = (r.predicted[k].0[v], r.truth[k].0[v], r.baseline[k].0[v]);
                n1 += r.areas[k] * (p - t).abs();
                d1 += r.areas[k] * t.abs();
                n2 += r.areas[k] * (p - t).powi(2);
                d2 += r.areas[k] * t.powi(2);
                b1 += r.areas[k] * (b - t).abs();
            }
        }
        assert!((relative_l1(&r).unwrap() - n1 / d1).abs() < 1e-12);
        assert!((rrmse(&r).unwrap() - (n2 / d2).sqrt()).abs() < 1e-12);
        assert!((baseline_error(&r).unwrap() - b1 / d1).abs() < 1e-12);
    }

    #[test]
    fn area_scale_cancels() {
        let r = random_report(30, 4);
        let mut s = r.clone();
        s.areas.iter_mut().for_each(|a| *a *= 123.0);
        assert!((relative_l1(&r).unwrap() - relative_l1(&s).unwrap()).abs() < 1e-14);
        assert!((rrmse(&r).unwrap() - rrmse(&s).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn zero_truth_is_a_metric_error() {
        let mut r = random_report(3, 5);
        r.truth = vec![ConservedState::new(0.0, 0.0, 0.0, 0.0); 3];
        assert!(matches!(relative_l1(&r), Err(Error::Metric(_))));
        let empty = random_report(0, 5);
        assert!(relative_l1(&empty).is_err());
    }

    #[test]
    fn total_row_is_union_metric() {
        let a = random_report(10, 6);
        let b = random_report(25, 7);
        let mut union = a.clone();
        union.points.extend(&b.points);
        union.areas.extend(&b.areas);
        union.truth.extend(&b.truth);
        union.predicted.extend(&b.predicted);
        union.baseline.extend(&b.baseline);
        let rows = summary_rows(&[("a".into(), a.sums()), ("b".into(), b.sums())]).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].case, "Total");
        assert!((rows[2].relative_l1 - relative_l1(&union).unwrap()).abs() < 1e-14);
        assert!((rows[2].baseline_l1 - baseline_error(&union).unwrap()).abs() < 1e-14);
        assert!(format_table(&rows).lines().count() == 4);
    }

    #[test]
    fn mach_mode_of_exact_prediction_is_zero() {
        let mut r = random_report(5, 8);
        for u in r.truth.iter_mut() {
            *u = inflow_state(2.0, GAMMA).to_conserved(GAMMA);
        }
        r.predicted = r.truth.clone();
        let s = MetricSums::with_mode(&r, MetricMode::Mach);
        assert_eq!(s.relative_l1().unwrap(), 0.0);
        assert!((s.l1_truth - 2.0 * r.areas.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn per_variable_l1_by_hand() {
        let mut r = random_report(4, 9);
        r.predicted = r.truth.iter().map(|u| ConservedState::new(u[0] * 1.02, u[1], u[2], u[3])).collect();
        let pv = per_variable_l1(&r).unwrap();
        assert!((pv[0] - 0.02).abs() < 1e-14);
        assert_eq!(pv[1], 0.0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let r = random_report(3, 10);
        let csv = report_csv(&r);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0].split(',').count(), 3 + 12 + 2);
        assert_eq!(lines[1].split(',').count(), 17);
    }
}
