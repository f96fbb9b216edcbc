use super::{logistic_nll, sigmoid, DiffModel};
use crate::data::Dataset;

pub const HIDDEN: usize = 3;
pub const INPUTS: usize = 2;
pub const PARAMS: usize = INPUTS * HIDDEN + HIDDEN;

/// Bias-free 2-3-1 network with ReLU hidden units and a logistic output.
///
/// Layout: `w[2j], w[2j+1]` are the input weights of hidden unit `j`,
/// `w[6 + j]` its output weight. `relu'(0) = 0`.
#[derive(Debug, Clone, Default)]
pub struct Mlp;

impl Mlp {
    pub fn new() -> Self {
        Self
    }

    fn hidden(w: &[f64], x: &[f64]) -> [f64; HIDDEN] {
        std::array::from_fn(|j| w[2 * j] * x[0] + w[2 * j + 1] * x[1])
    }

    pub fn logit(w: &[f64], x: &[f64]) -> f64 {
        let h = Self::hidden(w, x);
        (0..HIDDEN)
            .map(|j| w[INPUTS * HIDDEN + j] * h[j].max(0.0))
            .sum()
    }
}

impl DiffModel for Mlp {
    fn dim(&self) -> usize {
        PARAMS
    }

    fn sample_loss(&self, w: &[f64], x: &[f64], y: f64) -> f64 {
        logistic_nll(Self::logit(w, x), y)
    }

    fn add_sample_grad(&self, w: &[f64], x: &[f64], y: f64, out: &mut [f64]) {
        let h = Self::hidden(w, x);
        let z: f64 = (0..HIDDEN).map(|j| w[6 + j] * h[j].max(0.0)).sum();
        let dz = sigmoid(z) - y;
        for j in 0..HIDDEN {
            if h[j] > 0.0 {
                out[6 + j] += dz * h[j];
                let back = dz * w[6 + j];
                out[2 * j] += back * x[0];
                out[2 * j + 1] += back * x[1];
            }
        }
    }

    fn predict(&self, w: &[f64], x: &[f64]) -> Option<f64> {
        Some(sigmoid(Self::logit(w, x)))
    }

    fn near_kink(&self, w: &[f64], data: &Dataset, idx: &[usize], radius: f64) -> bool {
        idx.iter().any(|&k| {
            let x = data.row(k);
            let reach = radius * (x[0].abs() + x[1].abs());
            Self::hidden(w, x).iter().any(|h| h.abs() <= reach)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_two_moons;
    use crate::models::fd_check;

    #[test]
    fn zero_weights() {
        let (tr, _) = gen_two_moons(100, 10, 0.1, 1);
        let m = Mlp::new();
        let w = [0.0; PARAMS];
        assert!((m.full_loss(&w, &tr) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(m.full_grad(&w, &tr), vec![0.0; PARAMS]);
    }

    #[test]
    fn gradient_matches_finite_differences_off_kinks() {
        let (tr, _) = gen_two_moons(200, 10, 0.1, 2);
        let m = Mlp::new();
        let w = [0.3, -0.8, 1.1, 0.4, -0.6, 0.9, 1.2, -0.7, 0.5];
        let r = fd_check(&m, &w, &tr, &tr.all_indices(), 1e-6, 1e-5);
        if !r.kink {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn kink_is_flagged() {
        let (tr, _) = gen_two_moons(50, 10, 0.1, 2);
        let m = Mlp::new();
        // first hidden unit exactly zero on sample 0
        let x = tr.row(0).to_vec();
        let mut w = [0.5; PARAMS];
        w[0] = x[1];
        w[1] = -x[0];
        let r = fd_check(&m, &w, &tr, &[0], 1e-5, 1e-5);
        assert!(r.kink);
    }
}
