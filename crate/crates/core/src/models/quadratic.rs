use super::DiffModel;

/// `l(w) = |w - center|^2 / scale`, independent of the data.
///
/// With `center = (0.5, 0.5)` and `scale = 3` this is the two-dimensional
/// toy used for the velocity-field experiment.
#[derive(Debug, Clone)]
pub struct Quadratic {
    center: Vec<f64>,
    scale: f64,
}

impl Quadratic {
    pub fn new(center: Vec<f64>, scale: f64) -> Self {
        Self { center, scale }
    }

    pub fn fig1() -> Self {
        Self::new(vec![0.5, 0.5], 3.0)
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        w.iter()
            .zip(&self.center)
            .map(|(x, c)| (x - c) * (x - c))
            .sum::<f64>()
            / self.scale
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        w.iter()
            .zip(&self.center)
            .map(|(x, c)| 2.0 * (x - c) / self.scale)
            .collect()
    }
}

impl DiffModel for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn sample_loss(&self, w: &[f64], _x: &[f64], _y: f64) -> f64 {
        self.value(w)
    }

    fn add_sample_grad(&self, w: &[f64], _x: &[f64], _y: f64, out: &mut [f64]) {
        for (o, g) in out.iter_mut().zip(self.gradient(w)) {
            *o += g;
        }
    }
}
