use super::{logistic_nll, sigmoid, DiffModel};

/// Logistic regression without intercept: `P(y = 1 | x) = sigmoid(x . w)`.
#[derive(Debug, Clone)]
pub struct Logistic {
    dim: usize,
}

impl Logistic {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl DiffModel for Logistic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_loss(&self, w: &[f64], x: &[f64], y: f64) -> f64 {
        logistic_nll(dot(w, x), y)
    }

    fn add_sample_grad(&self, w: &[f64], x: &[f64], y: f64, out: &mut [f64]) {
        let r = sigmoid(dot(w, x)) - y;
        for (o, xi) in out.iter_mut().zip(x) {
            *o += r * xi;
        }
    }

    fn predict(&self, w: &[f64], x: &[f64]) -> Option<f64> {
        Some(sigmoid(dot(w, x)))
    }
}
