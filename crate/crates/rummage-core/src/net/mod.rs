//! Point-level affordance networks.
//!
//! Three models share one design: a hierarchical point-set encoder
//! ([`encoder`]) producing a 128-d feature per observed point, and a small
//! sigmoid-headed MLP scoring each point. The place model conditions on a
//! pick point by concatenating two encoder outputs.
//!
//! Everything is written directly against flat `Vec<F>` tensors with
//! hand-derived backward passes; gradient correctness is pinned by central
//! finite differences in the acceptance suite. `F = f32` is the training
//! and inference dtype, `F = f64` the gradient-check dtype.

pub mod adam;
pub mod checkpoint;
pub mod encoder;
pub mod models;

use alloc::vec::Vec;

use crate::error::{Error, Result};

pub use adam::AdamState;
pub use encoder::{Encoder, EncoderSpec, LevelSpec};
pub use models::{
    place_loss_grad, point_score_loss_grad, ModelBundle, ModelKind, PlaceBatch, PlaceModel,
    PointScoreModel, ScoreBatch,
};

/// Float dtype the networks are generic over.
pub trait Scalar:
    num_traits::Float + core::ops::AddAssign + core::ops::SubAssign + core::fmt::Debug + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Numeric literal helper.
pub(crate) fn c<F: Scalar>(v: f64) -> F {
    F::from_f64(v)
}

/// Prediction clamp for the cross-entropy loss.
pub const BCE_EPS: f64 = 1e-7;

/// Binary cross entropy with the prediction clamped to `[eps, 1 - eps]`.
/// Labels must be 0 or 1.
pub fn bce<F: Scalar>(prediction: F, label: u8) -> Result<F> {
    if label > 1 {
        return Err(Error::net_input(alloc::format!("label must be 0 or 1, got {label}")));
    }
    let eps = c::<F>(BCE_EPS);
    let p = prediction.max(eps).min(F::one() - eps);
    let loss = if label == 1 { -p.ln() } else { -(F::one() - p).ln() };
    Ok(loss)
}

/// Gradient of [`bce`] composed with the sigmoid that produced `prediction`,
/// with respect to the pre-sigmoid logit. Zero in the clamped regions.
pub fn bce_sigmoid_grad<F: Scalar>(prediction: F, label: u8) -> F {
    let eps = c::<F>(BCE_EPS);
    if prediction <= eps || prediction >= F::one() - eps {
        return F::zero();
    }
    let g = c::<F>(label as f64);
    prediction - g
}

pub(crate) fn sigmoid<F: Scalar>(z: F) -> F {
    F::one() / (F::one() + (-z).exp())
}

/// Per-point scores in `[0, 1]`, index-aligned with the observed cloud it
/// was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct AffordanceMap {
    pub scores: Vec<f32>,
}

impl AffordanceMap {
    pub fn new(scores: Vec<f32>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::net_input("affordance map must be non-empty"));
        }
        for (i, &s) in scores.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::net_input(alloc::format!(
                    "score {s} at index {i} outside [0, 1]"
                )));
            }
        }
        Ok(AffordanceMap { scores })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Index of the maximum score; ties break to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &s) in self.scores.iter().enumerate() {
            if s > self.scores[best] {
                best = i;
            }
        }
        best
    }
}

/// A dense layer: row-major `out_dim x in_dim` weights plus biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<F> {
    pub w: Vec<F>,
    pub b: Vec<F>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl<F: Scalar> Linear<F> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Linear {
            w: alloc::vec![F::zero(); in_dim * out_dim],
            b: alloc::vec![F::zero(); out_dim],
            in_dim,
            out_dim,
        }
    }

    fn forward_rows(&self, xs: &[F], n: usize, out: &mut [F]) {
        debug_assert_eq!(xs.len(), n * self.in_dim);
        debug_assert_eq!(out.len(), n * self.out_dim);
        for r in 0..n {
            let x = &xs[r * self.in_dim..(r + 1) * self.in_dim];
            let y = &mut out[r * self.out_dim..(r + 1) * self.out_dim];
            for (o, yo) in y.iter_mut().enumerate() {
                let wrow = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                let mut acc = self.b[o];
                for (wi, xi) in wrow.iter().zip(x) {
                    acc += *wi * *xi;
                }
                *yo = acc;
            }
        }
    }

    /// Accumulates parameter gradients and input gradients for a row batch.
    fn backward_rows(
        &self,
        xs: &[F],
        n: usize,
        d_out: &[F],
        grads: &mut Linear<F>,
        d_in: &mut [F],
    ) {
        for r in 0..n {
            let x = &xs[r * self.in_dim..(r + 1) * self.in_dim];
            let dy = &d_out[r * self.out_dim..(r + 1) * self.out_dim];
            let dx = &mut d_in[r * self.in_dim..(r + 1) * self.in_dim];
            for (o, &dyo) in dy.iter().enumerate() {
                if dyo == F::zero() {
                    continue;
                }
                grads.b[o] += dyo;
                let wrow = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                let grow = &mut grads.w[o * self.in_dim..(o + 1) * self.in_dim];
                for i in 0..self.in_dim {
                    grow[i] += dyo * x[i];
                    dx[i] += dyo * wrow[i];
                }
            }
        }
    }
}

/// A stack of dense layers with rectifier activations between them (and,
/// optionally, after the last layer).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    pub layers: Vec<Linear<F>>,
    pub relu_last: bool,
}

/// Forward activations memoized for the backward pass: `acts[0]` is the
/// input matrix, `acts[l + 1]` the post-activation output of layer `l`.
pub struct MlpCache<F> {
    pub(crate) acts: Vec<Vec<F>>,
    rows: usize,
}

impl<F: Scalar> Mlp<F> {
    pub fn zeros(widths: &[usize], relu_last: bool) -> Self {
        debug_assert!(widths.len() >= 2);
        let layers = widths
            .windows(2)
            .map(|w| Linear::zeros(w[0], w[1]))
            .collect();
        Mlp { layers, relu_last }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map(|l| l.in_dim).unwrap_or(0)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    /// Runs `n` rows through the stack, returning the output matrix and the
    /// cache needed for the backward pass.
    pub fn forward_rows(&self, xs: Vec<F>, n: usize) -> (Vec<F>, MlpCache<F>) {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(xs);
        for (li, layer) in self.layers.iter().enumerate() {
            let mut out = alloc::vec![F::zero(); n * layer.out_dim];
            layer.forward_rows(acts.last().unwrap(), n, &mut out);
            if li + 1 < self.layers.len() || self.relu_last {
                for v in out.iter_mut() {
                    if *v < F::zero() {
                        *v = F::zero();
                    }
                }
            }
            acts.push(out);
        }
        let out = acts.last().unwrap().clone();
        (out, MlpCache { acts, rows: n })
    }

    /// Backpropagates `d_out` through the stack, accumulating parameter
    /// gradients into `grads` and returning the input gradient matrix.
    pub fn backward_rows(&self, cache: &MlpCache<F>, mut d_out: Vec<F>, grads: &mut Mlp<F>) -> Vec<F> {
        let n = cache.rows;
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            // Undo the rectifier of this layer's output (if applied).
            if li + 1 < self.layers.len() || self.relu_last {
                let post = &cache.acts[li + 1];
                for (d, &p) in d_out.iter_mut().zip(post) {
                    if p <= F::zero() {
                        *d = F::zero();
                    }
                }
            }
            let mut d_in = alloc::vec![F::zero(); n * layer.in_dim];
            layer.backward_rows(&cache.acts[li], n, &d_out, &mut grads.layers[li], &mut d_in);
            d_out = d_in;
        }
        d_out
    }

    pub fn for_each_tensor(&self, f: &mut impl FnMut(&[F])) {
        for l in &self.layers {
            f(&l.w);
            f(&l.b);
        }
    }

    pub fn for_each_tensor_mut(&mut self, f: &mut impl FnMut(&mut Vec<F>)) {
        for l in &mut self.layers {
            f(&mut l.w);
            f(&mut l.b);
        }
    }

    pub fn zeros_like(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| Linear::zeros(l.in_dim, l.out_dim))
            .collect();
        Mlp { layers, relu_last: self.relu_last }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_closed_forms() {
        let v: f64 = bce(0.5, 1).unwrap();
        assert!((v - core::f64::consts::LN_2).abs() < 1e-12);
        let v: f64 = bce(0.9, 0).unwrap();
        assert!((v - 2.302585092994046).abs() < 1e-9);
        // Clamp: prediction 1.0 with label 1 costs -ln(1 - eps) ~ 1e-7.
        let v: f64 = bce(1.0, 1).unwrap();
        assert!(v > 0.0 && v <= 2e-7, "clamped loss {v}");
        assert!(bce(0.5f64, 2).is_err());
    }

    #[test]
    fn bce_grad_is_zero_in_clamp_region() {
        assert_eq!(bce_sigmoid_grad(1.0f64, 1), 0.0);
        assert_eq!(bce_sigmoid_grad(0.0f64, 0), 0.0);
        let g = bce_sigmoid_grad(0.7f64, 1);
        assert!((g - (0.7 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn affordance_map_validates_range() {
        assert!(AffordanceMap::new(alloc::vec![0.0, 0.5, 1.0]).is_ok());
        assert!(AffordanceMap::new(alloc::vec![1.1]).is_err());
        assert!(AffordanceMap::new(alloc::vec![]).is_err());
    }

    #[test]
    fn argmax_ties_to_lowest_index() {
        let m = AffordanceMap::new(alloc::vec![0.2, 0.9, 0.9, 0.1]).unwrap();
        assert_eq!(m.argmax(), 1);
    }

    #[test]
    fn mlp_forward_backward_matches_finite_difference() {
        // Tiny 3 -> 4 -> 2 stack checked against central differences on a
        // sum-of-squares loss.
        let mut mlp: Mlp<f64> = Mlp::zeros(&[3, 4, 2], false);
        let mut v = 0.05f64;
        for l in &mut mlp.layers {
            for w in l.w.iter_mut().chain(l.b.iter_mut()) {
                *w = v.sin() * 0.7;
                v += 0.37;
            }
        }
        let xs = alloc::vec![0.3, -0.2, 0.9, -0.5, 0.1, 0.4];
        let loss = |m: &Mlp<f64>| -> f64 {
            let (out, _) = m.forward_rows(xs.clone(), 2);
            out.iter().map(|o| o * o).sum()
        };
        let (out, cache) = mlp.forward_rows(xs.clone(), 2);
        let d_out: Vec<f64> = out.iter().map(|o| 2.0 * o).collect();
        let mut grads = mlp.zeros_like();
        mlp.backward_rows(&cache, d_out, &mut grads);

        let h = 1e-6;
        for li in 0..mlp.layers.len() {
            for wi in 0..mlp.layers[li].w.len() {
                let orig = mlp.layers[li].w[wi];
                mlp.layers[li].w[wi] = orig + h;
                let up = loss(&mlp);
                mlp.layers[li].w[wi] = orig - h;
                let down = loss(&mlp);
                mlp.layers[li].w[wi] = orig;
                let num = (up - down) / (2.0 * h);
                let ana = grads.layers[li].w[wi];
                assert!(
                    (num - ana).abs() / num.abs().max(ana.abs()).max(1e-8) < 1e-5,
                    "layer {li} w[{wi}]: fd {num} vs analytic {ana}"
                );
            }
        }
    }
}
