use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::DiffModel;
use crate::quantizer::{project_to_grid, ConstraintParams, QuantGrid};
use crate::skew::{skew_direction, SkewStep};

/// Latent weights and the number of updates applied so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub w: Vec<f64>,
    pub k: u64,
}

impl Iterate {
    pub fn new(w: Vec<f64>) -> Self {
        Self { w, k: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Annealed skewed SGD.
    Askew,
    /// Full-precision SGD.
    Sgd,
    /// SGD followed by projection to the grid.
    Projected,
    /// BinaryConnect with the straight-through estimator.
    BcSte,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Askew, Method::Sgd, Method::Projected, Method::BcSte];

    pub fn name(self) -> &'static str {
        match self {
            Method::Askew => "askew",
            Method::Sgd => "sgd",
            Method::Projected => "projected",
            Method::BcSte => "bc-ste",
        }
    }

    /// Whether reported metrics are taken at the projected weights.
    pub fn is_quantized(self) -> bool {
        !matches!(self, Method::Sgd)
    }

    /// The weights the forward pass uses for latent weights `w`.
    pub fn forward_weights(self, grid: &QuantGrid, w: &[f64]) -> Vec<f64> {
        match self {
            Method::BcSte => project_to_grid(grid, w),
            _ => w.to_vec(),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "askew" | "askewsgd" => Ok(Method::Askew),
            "sgd" | "full-precision" => Ok(Method::Sgd),
            "projected" => Ok(Method::Projected),
            "bc-ste" | "bc_ste" | "bc" => Ok(Method::BcSte),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// What a single update saw and did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub gamma: f64,
    pub batch_loss: f64,
    pub grad: Vec<f64>,
    pub max_velocity: f64,
    pub clip_count: usize,
}

fn divergence_bound(grid: &QuantGrid) -> f64 {
    10.0 * grid.max_abs_level() + 10.0
}

fn check_gradient(grad: &[f64], step: u64) -> Result<()> {
    if grad.iter().all(|g| g.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteGradient { step })
    }
}

fn check_iterate(w: &[f64], grid: &QuantGrid, step: u64) -> Result<()> {
    if !w.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFiniteIterate { step });
    }
    let norm = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let bound = divergence_bound(grid);
    if norm > bound {
        return Err(Error::Diverged { step, norm, bound });
    }
    Ok(())
}

fn batch_gradient(
    model: &dyn DiffModel,
    at: &[f64],
    data: &Dataset,
    batch: &[usize],
    step: u64,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch { step });
    }
    let grad = model.grad(at, data, batch);
    check_gradient(&grad, step)?;
    Ok((model.loss(at, data, batch), grad))
}

/// One skewed update `w + gamma * v`, with `v` the clipped skew direction of
/// the minibatch gradient.
#[allow(clippy::too_many_arguments)]
pub fn askew_step(
    model: &dyn DiffModel,
    data: &Dataset,
    batch: &[usize],
    iterate: &Iterate,
    params: &ConstraintParams,
    grid: &QuantGrid,
    gamma: f64,
) -> Result<(Iterate, StepStats, SkewStep)> {
    let step = iterate.k + 1;
    let (batch_loss, grad) = batch_gradient(model, &iterate.w, data, batch, step)?;
    let skew = skew_direction(params, grid, &grad, &iterate.w);
    let w: Vec<f64> = iterate
        .w
        .iter()
        .zip(&skew.v)
        .map(|(w, v)| w + gamma * v)
        .collect();
    check_iterate(&w, grid, step)?;
    let stats = StepStats {
        gamma,
        batch_loss,
        grad,
        max_velocity: skew.max_abs_velocity(),
        clip_count: skew.clip_count(),
    };
    Ok((Iterate { w, k: step }, stats, skew))
}

fn plain_update(w: &[f64], grad: &[f64], gamma: f64) -> Vec<f64> {
    w.iter().zip(grad).map(|(w, g)| w - gamma * g).collect()
}

fn velocity_norm(grad: &[f64]) -> f64 {
    grad.iter().fold(0.0, |m, g| m.max(g.abs()))
}

pub fn sgd_step(
    model: &dyn DiffModel,
    data: &Dataset,
    batch: &[usize],
    iterate: &Iterate,
    grid: &QuantGrid,
    gamma: f64,
) -> Result<(Iterate, StepStats)> {
    let step = iterate.k + 1;
    let (batch_loss, grad) = batch_gradient(model, &iterate.w, data, batch, step)?;
    let w = plain_update(&iterate.w, &grad, gamma);
    check_iterate(&w, grid, step)?;
    let max_velocity = velocity_norm(&grad);
    Ok((
        Iterate { w, k: step },
        StepStats {
            gamma,
            batch_loss,
            grad,
            max_velocity,
            clip_count: 0,
        },
    ))
}

/// `Pi(w - gamma g)` with `Pi` the nearest-level projection.
pub fn projected_sgd_step(
    model: &dyn DiffModel,
    data: &Dataset,
    batch: &[usize],
    iterate: &Iterate,
    grid: &QuantGrid,
    gamma: f64,
) -> Result<(Iterate, StepStats)> {
    let step = iterate.k + 1;
    let (batch_loss, grad) = batch_gradient(model, &iterate.w, data, batch, step)?;
    let w = project_to_grid(grid, &plain_update(&iterate.w, &grad, gamma));
    let max_velocity = velocity_norm(&grad);
    Ok((
        Iterate { w, k: step },
        StepStats {
            gamma,
            batch_loss,
            grad,
            max_velocity,
            clip_count: 0,
        },
    ))
}

/// Straight-through update: the gradient is taken at the projected weights
/// and applied to the latent weights, which are then clamped to
/// `[c_1, c_K]` per coordinate.
pub fn bc_ste_step(
    model: &dyn DiffModel,
    data: &Dataset,
    batch: &[usize],
    iterate: &Iterate,
    grid: &QuantGrid,
    gamma: f64,
) -> Result<(Iterate, StepStats)> {
    let step = iterate.k + 1;
    let quantized = project_to_grid(grid, &iterate.w);
    let (batch_loss, grad) = batch_gradient(model, &quantized, data, batch, step)?;
    let w: Vec<f64> = plain_update(&iterate.w, &grad, gamma)
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let l = grid.levels(i);
            x.clamp(l.first(), l.last())
        })
        .collect();
    check_iterate(&w, grid, step)?;
    let max_velocity = velocity_norm(&grad);
    Ok((
        Iterate { w, k: step },
        StepStats {
            gamma,
            batch_loss,
            grad,
            max_velocity,
            clip_count: 0,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_logistic;
    use crate::models::{Logistic, Quadratic};

    #[test]
    fn interior_askew_equals_sgd() {
        let (ds, _) = gen_logistic(500, 4, 3);
        let m = Logistic::new(4);
        let grid = QuantGrid::binary(4);
        let p = ConstraintParams::new(0.3, 1.0);
        let it = Iterate::new(vec![0.9, -1.05, 1.1, -0.95]);
        let batch: Vec<usize> = (0..100).collect();
        let (a, _, skew) = askew_step(&m, &ds, &batch, &it, &p, &grid, 0.1).unwrap();
        let (b, _) = sgd_step(&m, &ds, &batch, &it, &grid, 0.1).unwrap();
        assert!(skew.active.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn zero_step_leaves_weights() {
        let ds = Dataset::placeholder(1);
        let q = Quadratic::fig1();
        let grid = QuantGrid::binary(2);
        let p = ConstraintParams::new(0.3, 1.0);
        let it = Iterate::new(vec![0.5, 0.5]);
        let (next, _, _) = askew_step(&q, &ds, &[0], &it, &p, &grid, 0.0).unwrap();
        assert_eq!(next.w, it.w);
        assert_eq!(next.k, 1);
    }

    #[test]
    fn projected_reaches_fixed_point() {
        let ds = Dataset::placeholder(1);
        let q = Quadratic::new(vec![0.3, -0.2], 1e300);
        let grid = QuantGrid::binary(2);
        let it = Iterate::new(vec![0.3, -0.2]);
        let (a, _) = projected_sgd_step(&q, &ds, &[0], &it, &grid, 1.0).unwrap();
        assert_eq!(a.w, vec![1.0, -1.0]);
        let (b, _) = projected_sgd_step(&q, &ds, &[0], &a, &grid, 1.0).unwrap();
        assert_eq!(b.w, a.w);
    }

    #[test]
    fn bc_ste_uses_sign_for_gradient() {
        let ds = Dataset::placeholder(1);
        let q = Quadratic::new(vec![0.0, 0.0], 2.0);
        let grid = QuantGrid::binary(2);
        let it = Iterate::new(vec![0.2, -0.4]);
        let (next, stats) = bc_ste_step(&q, &ds, &[0], &it, &grid, 0.1).unwrap();
        // gradient of |w|^2/2 at sign(w) = (1, -1)
        assert_eq!(stats.grad, vec![1.0, -1.0]);
        assert!((next.w[0] - 0.1).abs() < 1e-15);
        assert!((next.w[1] + 0.3).abs() < 1e-15);
        let far = Iterate::new(vec![0.99, -0.99]);
        let q2 = Quadratic::new(vec![100.0, -100.0], 2.0);
        let (clamped, _) = bc_ste_step(&q2, &ds, &[0], &far, &grid, 1.0).unwrap();
        assert_eq!(clamped.w, vec![1.0, -1.0]);
    }

    #[test]
    fn nan_gradient_aborts_with_step() {
        let ds = Dataset::placeholder(1);
        let q = Quadratic::new(vec![f64::NAN, 0.0], 1.0);
        let grid = QuantGrid::binary(2);
        let mut it = Iterate::new(vec![0.5, 0.5]);
        it.k = 41;
        let err = sgd_step(&q, &ds, &[0], &it, &grid, 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { step: 42 }));
    }

    #[test]
    fn divergence_guard() {
        let ds = Dataset::placeholder(1);
        let q = Quadratic::new(vec![0.0, 0.0], 1.0);
        let grid = QuantGrid::binary(2);
        let it = Iterate::new(vec![15.0, 0.0]);
        let err = sgd_step(&q, &ds, &[0], &it, &grid, -1.0).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }

    #[test]
    fn empty_batch_is_an_error() {
        let ds = Dataset::placeholder(1);
        let q = Quadratic::fig1();
        let grid = QuantGrid::binary(2);
        let it = Iterate::new(vec![0.5, 0.5]);
        assert!(matches!(
            sgd_step(&q, &ds, &[], &it, &grid, 0.1),
            Err(Error::EmptyBatch { step: 1 })
        ));
    }
}
