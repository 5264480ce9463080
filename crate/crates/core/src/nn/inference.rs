//! Single-precision copy of a trained network for full-field prediction.
//!
//! Weights are rounded to `f32` once; each layer is one fused
//! `bias + x·Wᵀ` product followed by a branch-free tanh that vectorizes.
//! Outputs agree with the `f64` forward pass to about 1e-6.

use ndarray::{linalg::general_mat_mul, Array1, Array2, ArrayView2, Axis};

use super::MlpModel;
use crate::dataset::{Normalizer, OUTPUT_LEN};
use crate::error::{Error, Result};
use crate::state::ConservedState;

/// Beyond this magnitude `tanh` rounds to ±1 in `f32`.
const TANH_CLAMP: f32 = 7.905_311;

/// Rational minimax approximation of `tanh`; absolute error below 5e-7.
#[inline]
pub fn tanh_f32(x: f32) -> f32 {
    const A: [f32; 7] = [
        4.893_524_6e-3,
        6.372_619_3e-4,
        1.485_722_4e-5,
        5.122_297e-8,
        -8.604_672e-11,
        2.000_188e-13,
        -2.760_768_5e-16,
    ];
    const B: [f32; 4] = [4.893_525e-3, 2.268_434_6e-3, 1.185_347e-4, 1.198_258_4e-6];
    let x = x.clamp(-TANH_CLAMP, TANH_CLAMP);
    let x2 = x * x;
    let mut p = A[6];
    for &a in A[..6].iter().rev() {
        p = p * x2 + a;
    }
    let mut q = B[3];
    for &b in B[..3].iter().rev() {
        q = q * x2 + b;
    }
    x * p / q
}

#[derive(Debug, Clone)]
pub struct InferenceModel {
    layers: Vec<(Array2<f32>, Array1<f32>)>,
    normalizer: Normalizer,
}

impl InferenceModel {
    pub fn new(model: &MlpModel) -> Result<Self> {
        let normalizer = model
            .normalizer
            .ok_or_else(|| Error::Argument("model has no normalizer".into()))?;
        if model.n_outputs() != OUTPUT_LEN {
            return Err(Error::Shape(format!(
                "model has {} outputs, expected {OUTPUT_LEN}",
                model.n_outputs()
            )));
        }
        let layers = model
            .layers
            .iter()
            .map(|l| (l.weights.mapv(|w| w as f32), l.bias.mapv(|b| b as f32)))
            .collect();
        Ok(InferenceModel { layers, normalizer })
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].0.ncols()
    }

    /// Forward pass over normalized `n × inputs` rows.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_inputs(x.ncols())?;
        Ok(self.forward_f32(x.mapv(|v| v as f32)).mapv(f64::from))
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

    fn forward_f32(&self, mut a: Array2<f32>) -> Array2<f32> {
        let last = self.layers.len() - 1;
        for (i, (w, b)) in self.layers.iter().enumerate() {
            let mut z = Array2::zeros((a.nrows(), w.nrows()));
            z.axis_iter_mut(Axis(0)).for_each(|mut row| row.assign(b));
            general_mat_mul(1.0, &a, &w.t(), 1.0, &mut z);
            if i < last {
                z.mapv_inplace(tanh_f32);
            }
            a = z;
        }
        a
    }

    /// Raw states for raw (unnormalized) records.
    pub fn predict_raw(&self, inputs: ArrayView2<f64>) -> Result<Vec<ConservedState>> {
        self.check_inputs(inputs.ncols())?;
        let mut x = Array2::<f32>::zeros(inputs.raw_dim());
        for (mut dst, src) in x.rows_mut().into_iter().zip(inputs.rows()) {
            let src = src.to_vec();
            for (d, n) in dst.iter_mut().zip(self.normalizer.normalize_inputs(&src)) {
                *d = n as f32;
            }
        }
        let y = self.forward_f32(x);
        Ok(y.rows()
            .into_iter()
            .map(|r| {
                let out: Vec<f64> = r.iter().map(|&v| f64::from(v)).collect();
                self.normalizer.denormalize(&out)
            })
            .collect())
    }
}
