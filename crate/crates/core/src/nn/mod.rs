//! Dense tanh network mapping normalized stencil records to the normalized
//! high-fidelity state, with exact backpropagation.

mod adam;
mod checkpoint;
mod inference;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use inference::{tanh_f32, InferenceModel};
pub use train::{train, LossHistory, TrainConfig};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Normalizer, StencilSample, INPUT_LEN, OUTPUT_LEN};
use crate::error::{Error, Result};
use crate::state::ConservedState;

/// Gain for tanh layers in the uniform Xavier initialization.
pub const TANH_GAIN: f64 = 5.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    /// Σ‖ỹ−y‖² / Σ‖y‖².
    RelativeMse,
    /// Area-weighted form of the above.
    #[default]
    CellWeighted,
}

/// One affine layer: `z = W a + b` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Layer {
            weights: Array2::zeros((n_out, n_in)),
            bias: Array1::zeros(n_out),
        }
    }

    pub fn n_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.weights.nrows()
    }

    fn blocks(&self) -> [&[f64]; 2] {
        [
            self.weights.as_slice().expect("standard layout"),
            self.bias.as_slice().expect("standard layout"),
        ]
    }

    fn blocks_mut(&mut self) -> [&mut [f64]; 2] {
        [
            self.weights.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: u64,
    pub final_loss: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub normalizer: Option<Normalizer>,
    pub meta: TrainingMeta,
}

/// Layer widths of the reference network: 202 inputs, ten hidden layers of
/// 500 units, 4 outputs.
pub fn full_architecture() -> Vec<usize> {
    let mut sizes = vec![INPUT_LEN];
    sizes.extend([500; 10]);
    sizes.push(OUTPUT_LEN);
    sizes
}

impl MlpModel {
    /// Seeded uniform Xavier initialization with tanh gain; zero biases.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let limit = TANH_GAIN * (6.0 / (n_in + n_out) as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_simple_fn((n_out, n_in), || {
                        rng.random_range(-limit..=limit)
                    }),
                    bias: Array1::zeros(n_out),
                }
            })
            .collect();
        Ok(MlpModel {
            layers,
            normalizer: None,
            meta: TrainingMeta {
                seed,
                ..Default::default()
            },
        })
    }

    pub fn full(seed: u64) -> Self {
        Self::new(&full_architecture(), seed).expect("valid architecture")
    }

    /// All-zero parameters of the given shape.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        let mut m = Self::new(sizes, 0)?;
        for l in &mut m.layers {
            l.weights.fill(0.0);
        }
        Ok(m)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].n_in()];
        s.extend(self.layers.iter().map(Layer::n_out));
        s
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().expect("nonempty").n_out()
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Network output for one (normalized) input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Row-wise forward pass over an `n × inputs` matrix.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_inputs(x.ncols())?;
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (i, l) in self.layers.iter().enumerate() {
            a = a.dot(&l.weights.t()) + &l.bias;
            if i < last {
                a.mapv_inplace(f64::tanh);
            }
        }
        Ok(a)
    }

    fn check_inputs(&self, n: usize) -> Result<()> {
        if n != self.n_inputs() {
            return Err(Error::Shape(format!(
                "input has length {n}, model expects {}",
                self.n_inputs()
            )));
        }
        Ok(())
    }

    /// Raw states for raw (unnormalized) records, using the stored normalizer.
    pub fn predict_raw(&self, inputs: ArrayView2<f64>) -> Result<Vec<ConservedState>> {
        let norm = self
            .normalizer
            .as_ref()
            .ok_or_else(|| Error::Argument("model has no normalizer".into()))?;
        if self.n_outputs() != OUTPUT_LEN {
            return Err(Error::Shape(format!(
                "model has {} outputs, expected {OUTPUT_LEN}",
                self.n_outputs()
            )));
        }
        let mut x = inputs.to_owned();
        for mut row in x.rows_mut() {
            let n = norm.normalize_inputs(row.as_slice().expect("contiguous row"));
            row.assign(&Array1::from(n));
        }
        let y = self.forward_batch(x.view())?;
        Ok(y.rows()
            .into_iter()
            .map(|r| norm.denormalize(r.as_slice().expect("contiguous row")))
            .collect())
    }

    /// Σ w² over all weight matrices (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.layers.iter().map(|l| l.weights.iter().map(|w| w * w).sum::<f64>()).sum()
    }

    pub(crate) fn blocks(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.blocks()).collect()
    }

    pub(crate) fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.blocks_mut()).collect()
    }
}

/// Normalized inputs, targets and per-record weights as dense matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
    pub weights: Array1<f64>,
}

impl Batch {
    pub fn from_samples(samples: &[StencilSample], normalizer: &Normalizer) -> Batch {
        let n = samples.len();
        let mut inputs = Array2::zeros((n, INPUT_LEN));
        let mut targets = Array2::zeros((n, OUTPUT_LEN));
        let mut weights = Array1::zeros(n);
        for (k, s) in samples.iter().enumerate() {
            let ns = normalizer.normalize(s);
            inputs.row_mut(k).assign(&Array1::from(ns.inputs));
            targets.row_mut(k).assign(&Array1::from(ns.target.to_vec()));
            weights[k] = s.area_weight;
        }
        Batch {
            inputs,
            targets,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, rows: &[usize]) -> Batch {
        Batch {
            inputs: self.inputs.select(Axis(0), rows),
            targets: self.targets.select(Axis(0), rows),
            weights: self.weights.select(Axis(0), rows),
        }
    }

    fn record_weights(&self, variant: LossVariant) -> Array1<f64> {
        match variant {
            LossVariant::RelativeMse => Array1::ones(self.len()),
            LossVariant::CellWeighted => self.weights.clone(),
        }
    }

    fn check(&self, model: &MlpModel) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Loss("empty batch".into()));
        }
        model.check_inputs(self.inputs.ncols())?;
        if self.targets.ncols() != model.n_outputs() {
            return Err(Error::Shape(format!(
                "targets have {} columns, model has {} outputs",
                self.targets.ncols(),
                model.n_outputs()
            )));
        }
        Ok(())
    }
}

fn loss_parts(pred: &Array2<f64>, batch: &Batch, variant: LossVariant) -> Result<(f64, Array1<f64>, f64)> {
    let w = batch.record_weights(variant);
    let mut num = 0.0;
    let mut den = 0.0;
    for ((p, t), &a) in pred.rows().into_iter().zip(batch.targets.rows()).zip(&w) {
        num += a * p.iter().zip(t).map(|(p, t)| (p - t) * (p - t)).sum::<f64>();
        den += a * t.iter().map(|t| t * t).sum::<f64>();
    }
    if !(den > 0.0) {
        return Err(Error::Loss("targets have zero norm".into()));
    }
    Ok((num / den, w, den))
}

/// Data loss of `model` on `batch` (normalized space, no penalty).
pub fn loss(model: &MlpModel, batch: &Batch, variant: LossVariant) -> Result<f64> {
    batch.check(model)?;
    let pred = model.forward_batch(batch.inputs.view())?;
    Ok(loss_parts(&pred, batch, variant)?.0)
}

/// Data loss plus `l2 · Σw²`: the quantity [`backward`] differentiates.
pub fn objective(model: &MlpModel, batch: &Batch, variant: LossVariant, l2: f64) -> Result<f64> {
    Ok(loss(model, batch, variant)? + l2 * model.weight_norm_sq())
}

/// Parameter gradients, shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
    /// Data loss at the evaluated parameters.
    pub loss: f64,
}

impl Gradients {
    pub(crate) fn blocks(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.blocks()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks()
            .into_iter()
            .flatten()
            .fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Exact gradient of [`objective`] with respect to every weight and bias.
pub fn backward(model: &MlpModel, batch: &Batch, variant: LossVariant, l2: f64) -> Result<Gradients> {
    batch.check(model)?;
    let last = model.layers.len() - 1;
    let mut acts = Vec::with_capacity(model.layers.len() + 1);
    acts.push(batch.inputs.clone());
    for (i, l) in model.layers.iter().enumerate() {
        let mut z = acts[i].dot(&l.weights.t()) + &l.bias;
        if i < last {
            z.mapv_inplace(f64::tanh);
        }
        acts.push(z);
    }
    let pred = acts.pop().expect("output layer");
    let (value, w, den) = loss_parts(&pred, batch, variant)?;

    let mut delta = (&pred - &batch.targets) * &(w * (2.0 / den)).insert_axis(Axis(1));
    let mut grads: Vec<Layer> = Vec::with_capacity(model.layers.len());
    for (i, l) in model.layers.iter().enumerate().rev() {
        let a_prev = &acts[i];
        let mut gw = delta.t().dot(a_prev);
        if l2 != 0.0 {
            gw.scaled_add(2.0 * l2, &l.weights);
        }
        let gb = delta.sum_axis(Axis(0));
        if i > 0 {
            delta = delta.dot(&l.weights) * &a_prev.mapv(|a| 1.0 - a * a);
        }
        grads.push(Layer {
            weights: gw,
            bias: gb,
        });
    }
    grads.reverse();
    Ok(Gradients {
        layers: grads,
        loss: value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn random_batch(n: usize, n_in: usize, n_out: usize, seed: u64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Batch {
            inputs: Array2::from_shape_simple_fn((n, n_in), || rng.random_range(0.0..1.0)),
            targets: Array2::from_shape_simple_fn((n, n_out), || rng.random_range(0.0..1.0)),
            weights: Array1::from_shape_simple_fn(n, || rng.random_range(0.1..2.0)),
        }
    }

    #[test]
    fn full_shapes_chain() {
        let m = MlpModel::full(1);
        assert_eq!(m.layers.len(), 11);
        assert_eq!(m.sizes(), full_architecture());
        assert_eq!(m.layers[0].weights.dim(), (500, 202));
        assert_eq!(m.layers[10].weights.dim(), (4, 500));
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = MlpModel::zeros(&[202, 16, 16, 4]).unwrap();
        let x: Vec<f64> = (0..202).map(|i| i as f64 * 0.37 - 20.0).collect();
        assert_eq!(m.forward(&x).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn scalar_chain_closed_form() {
        let mut m = MlpModel::zeros(&[1, 1, 1]).unwrap();
        m.layers[0].weights[[0, 0]] = 0.7;
        m.layers[1].weights[[0, 0]] = -1.3;
        let y = m.forward(&[0.9]).unwrap();
        assert_eq!(y, vec![-1.3 * (0.7f64 * 0.9).tanh()]);
    }

    #[test]
    fn wrong_input_length_is_a_shape_error() {
        let m = MlpModel::new(&[202, 8, 4], 0).unwrap();
        assert!(matches!(m.forward(&[0.0; 10]), Err(Error::Shape(_))));
    }

    #[test]
    fn forward_matches_scalar_re_evaluation() {
        let m = MlpModel::new(&[202, 12, 7, 4], 5).unwrap();
        let x: Vec<f64> = (0..202).map(|i| ((i * 37) % 101) as f64 / 101.0).collect();
        let mut a = x.clone();
        for (li, l) in m.layers.iter().enumerate() {
            let mut z = vec![0.0; l.n_out()];
            for (o, zo) in z.iter_mut().enumerate() {
                *zo = l.bias[o];
                for (i, ai) in a.iter().enumerate() {
                    *zo += l.weights[[o, i]] * ai;
                }
                if li + 1 < m.layers.len() {
                    *zo = zo.tanh();
                }
            }
            a = z;
        }
        let y = m.forward(&x).unwrap();
        for (p, q) in y.iter().zip(&a) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = MlpModel::new(&[202, 20, 4], 9).unwrap();
        assert_eq!(a, MlpModel::new(&[202, 20, 4], 9).unwrap());
        assert_ne!(a, MlpModel::new(&[202, 20, 4], 10).unwrap());
        let limit = TANH_GAIN * (6.0f64 / 222.0).sqrt();
        assert!(a.layers[0].weights.iter().all(|w| w.abs() <= limit));
        assert!(a.layers[0].bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn loss_by_hand() {
        let m = MlpModel::zeros(&[2, 3, 2]).unwrap();
        let mut b = Batch {
            inputs: array![[0.3, 0.4]],
            targets: array![[1.0, -2.0]],
            weights: array![3.0],
        };
        // zero model predicts 0: ‖t‖²/‖t‖² = 1
        assert_eq!(loss(&m, &b, LossVariant::RelativeMse).unwrap(), 1.0);
        let mut m2 = m.clone();
        m2.layers[1].bias = array![2.0, -4.0];
        assert_eq!(loss(&m2, &b, LossVariant::CellWeighted).unwrap(), 1.0);
        m2.layers[1].bias = array![1.0, -2.0];
        assert_eq!(loss(&m2, &b, LossVariant::RelativeMse).unwrap(), 0.0);
        b.targets.fill(0.0);
        assert!(matches!(loss(&m, &b, LossVariant::RelativeMse), Err(Error::Loss(_))));
    }

    #[test]
    fn cell_weighted_loss_matches_re_summation() {
        let m = MlpModel::new(&[5, 6, 3], 2).unwrap();
        let b = random_batch(17, 5, 3, 4);
        let pred = m.forward_batch(b.inputs.view()).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..17 {
            for v in 0..3 {
                num += b.weights[k] * (pred[[k, v]] - b.targets[[k, v]]).powi(2);
                den += b.weights[k] * b.targets[[k, v]].powi(2);
            }
        }
        let got = loss(&m, &b, LossVariant::CellWeighted).unwrap();
        assert!((got - num / den).abs() < 1e-14);
    }

    #[test]
    fn equal_weights_make_variants_agree() {
        let m = MlpModel::new(&[5, 6, 3], 2).unwrap();
        let mut b = random_batch(11, 5, 3, 8);
        b.weights.fill(0.37);
        let a = loss(&m, &b, LossVariant::CellWeighted).unwrap();
        let r = loss(&m, &b, LossVariant::RelativeMse).unwrap();
        assert!((a - r).abs() < 1e-12);
    }

    fn finite_difference_check(sizes: &[usize], variant: LossVariant, l2: f64) -> f64 {
        let mut m = MlpModel::new(sizes, 3).unwrap();
        let b = random_batch(10, sizes[0], *sizes.last().unwrap(), 6);
        let g = backward(&m, &b, variant, l2).unwrap();
        let analytic: Vec<f64> = g.blocks().into_iter().flatten().copied().collect();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut idx = 0;
        let n_blocks = m.blocks().len();
        for blk in 0..n_blocks {
            let len = m.blocks()[blk].len();
            for j in 0..len {
                let orig = m.blocks()[blk][j];
                m.blocks_mut()[blk][j] = orig + h;
                let up = objective(&m, &b, variant, l2).unwrap();
                m.blocks_mut()[blk][j] = orig - h;
                let down = objective(&m, &b, variant, l2).unwrap();
                m.blocks_mut()[blk][j] = orig;
                let fd = (up - down) / (2.0 * h);
                let a = analytic[idx];
                let scale = a.abs().max(fd.abs()).max(1e-6);
                worst = worst.max((a - fd).abs() / scale);
                idx += 1;
            }
        }
        assert_eq!(idx, analytic.len());
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        assert!(finite_difference_check(&[202, 8, 4], LossVariant::CellWeighted, 0.0) < 1e-5);
        assert!(finite_difference_check(&[7, 5, 5, 3], LossVariant::RelativeMse, 1e-3) < 1e-5);
    }

    #[test]
    fn perfect_fit_without_penalty_has_zero_gradient() {
        let m = MlpModel::new(&[4, 5, 2], 1).unwrap();
        let mut b = random_batch(6, 4, 2, 2);
        b.targets = m.forward_batch(b.inputs.view()).unwrap();
        let g = backward(&m, &b, LossVariant::CellWeighted, 0.0).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn area_weight_scale_cancels() {
        let m = MlpModel::new(&[4, 5, 2], 1).unwrap();
        let b = random_batch(9, 4, 2, 3);
        let mut b2 = b.clone();
        b2.weights *= 17.5;
        let g1 = backward(&m, &b, LossVariant::CellWeighted, 1e-8).unwrap();
        let g2 = backward(&m, &b2, LossVariant::CellWeighted, 1e-8).unwrap();
        for (x, y) in g1.blocks().into_iter().flatten().zip(g2.blocks().into_iter().flatten()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-3));
        }
    }

    #[test]
    fn forward_is_lipschitz_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = MlpModel::new(&[202, 30, 30, 4], 4).unwrap();
        let bound: f64 = m
            .layers
            .iter()
            .map(|l| l.weights.rows().into_iter().map(|r| r.iter().map(|w| w.abs()).sum::<f64>()).fold(0.0, f64::max))
            .product();
        for _ in 0..50 {
            let x: Vec<f64> = (0..202).map(|_| rng.random_range(0.0..1.0)).collect();
            let dx: Vec<f64> = (0..202).map(|_| rng.random_range(-1e-3..1e-3)).collect();
            let xp: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let y = m.forward(&x).unwrap();
            let yp = m.forward(&xp).unwrap();
            let dy = y.iter().zip(&yp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let dxn = dx.iter().map(|d| d.abs()).fold(0.0, f64::max);
            assert!(dy <= bound * dxn * (1.0 + 1e-12));
        }
    }
}
