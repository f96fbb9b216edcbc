//! Differentiable losses with hand-derived gradients.
//!
//! A model supplies the per-sample loss and gradient; batch losses are plain
//! averages accumulated in index order, so reductions are deterministic.

mod fdcheck;
mod logistic;
pub mod mlp;
mod quadratic;

pub use fdcheck::{fd_check, FdReport};
pub use logistic::Logistic;
pub use mlp::Mlp;
pub use quadratic::Quadratic;

use crate::data::Dataset;

/// A loss `l(w) = 1/N sum_j l_j(w)` over the rows of a dataset.
pub trait DiffModel: Send + Sync {
    fn dim(&self) -> usize;

    fn sample_loss(&self, w: &[f64], x: &[f64], y: f64) -> f64;

    /// Adds `grad l_j(w)` to `out`.
    fn add_sample_grad(&self, w: &[f64], x: &[f64], y: f64, out: &mut [f64]);

    /// Probability of label 1, for models that classify.
    fn predict(&self, _w: &[f64], _x: &[f64]) -> Option<f64> {
        None
    }

    /// True when a coordinate perturbation of size `radius` may cross a
    /// non-differentiable point for some sample in `idx`.
    fn near_kink(&self, _w: &[f64], _data: &Dataset, _idx: &[usize], _radius: f64) -> bool {
        false
    }

    fn loss(&self, w: &[f64], data: &Dataset, idx: &[usize]) -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        let total: f64 = idx
            .iter()
            .map(|&j| self.sample_loss(w, data.row(j), data.label(j)))
            .sum();
        total / idx.len() as f64
    }

    fn grad(&self, w: &[f64], data: &Dataset, idx: &[usize]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for &j in idx {
            self.add_sample_grad(w, data.row(j), data.label(j), &mut g);
        }
        if !idx.is_empty() {
            let scale = 1.0 / idx.len() as f64;
            g.iter_mut().for_each(|v| *v *= scale);
        }
        g
    }

    fn full_loss(&self, w: &[f64], data: &Dataset) -> f64 {
        self.loss(w, data, &data.all_indices())
    }

    fn full_grad(&self, w: &[f64], data: &Dataset) -> Vec<f64> {
        self.grad(w, data, &data.all_indices())
    }

    /// Fraction of rows classified correctly at threshold 1/2, if the model classifies.
    fn accuracy(&self, w: &[f64], data: &Dataset) -> Option<f64> {
        if data.is_empty() {
            return None;
        }
        let mut correct = 0usize;
        for j in 0..data.len() {
            let p = self.predict(w, data.row(j))?;
            let pred = if p >= 0.5 { 1.0 } else { 0.0 };
            if pred == data.label(j) {
                correct += 1;
            }
        }
        Some(correct as f64 / data.len() as f64)
    }
}

/// `log(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Negative log-likelihood of label `y` under logit `z`.
pub(crate) fn logistic_nll(z: f64, y: f64) -> f64 {
    softplus(z) - y * z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_sigmoid_and_softplus() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0);
        assert!(logistic_nll(-800.0, 1.0).is_finite());
    }
}
