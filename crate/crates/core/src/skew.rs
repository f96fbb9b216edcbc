//! The skewed descent direction.
//!
//! For a gradient estimate `u` at `w`, each active coordinate (`psi_eps(w_i) <= 0`)
//! must satisfy `v_i psi'(w_i) >= -alpha psi(w_i)`; the direction is the point of
//! that polyhedron closest to `-u`. The constraints are separable, so the
//! minimizer has a closed form per coordinate. Pull-back velocities are clipped
//! to `m_clip`, and a coordinate sitting exactly on a cell midpoint (where
//! `psi' = 0`) is sent to the right at speed `m_clip`.

use crate::quantizer::{ConstraintParams, QuantGrid};

/// Result of one direction computation.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewStep {
    /// Final (clipped) velocity.
    pub v: Vec<f64>,
    /// Velocity before clipping; equals `v` where nothing was clipped.
    pub pre_clip: Vec<f64>,
    /// Active coordinates, `psi_eps(w_i) <= 0`, in increasing order.
    pub active: Vec<usize>,
    /// Approximate multipliers; zero off the active set.
    pub lambdas: Vec<f64>,
    pub clipped: Vec<bool>,
    pub midpoint_hits: Vec<usize>,
}

impl SkewStep {
    pub fn clip_count(&self) -> usize {
        self.clipped.iter().filter(|&&c| c).count()
    }

    pub fn max_abs_velocity(&self) -> f64 {
        self.v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// `a` if `|a| <= b`, else `b * sign(a)`.
pub fn clip(a: f64, b: f64) -> f64 {
    if a.abs() <= b {
        a
    } else {
        b.copysign(a)
    }
}

/// `I_eps(w)`: coordinates with `psi_eps(w_i) <= 0`.
pub fn active_set(params: &ConstraintParams, grid: &QuantGrid, w: &[f64]) -> Vec<usize> {
    w.iter()
        .enumerate()
        .filter(|(i, &wi)| params.psi(grid, *i, wi) <= 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// `-alpha psi / psi'`, rounded so that `v * psi' >= -alpha psi` holds exactly
/// in floating point.
fn pull_back(rhs: f64, dpsi: f64) -> f64 {
    let mut v = rhs / dpsi;
    while v * dpsi < rhs {
        v = if dpsi > 0.0 {
            v.next_up()
        } else {
            v.next_down()
        };
    }
    v
}

/// Clipped skew direction for gradient estimate `u` at `w`.
pub fn skew_direction(
    params: &ConstraintParams,
    grid: &QuantGrid,
    u: &[f64],
    w: &[f64],
) -> SkewStep {
    debug_assert_eq!(u.len(), w.len());
    let d = w.len();
    let mut step = SkewStep {
        v: vec![0.0; d],
        pre_clip: vec![0.0; d],
        active: Vec::new(),
        lambdas: vec![0.0; d],
        clipped: vec![false; d],
        midpoint_hits: Vec::new(),
    };
    for i in 0..d {
        let psi = params.psi(grid, i, w[i]);
        if psi > 0.0 {
            step.v[i] = -u[i];
            step.pre_clip[i] = -u[i];
            continue;
        }
        step.active.push(i);
        let dpsi = params.psi_prime(grid, i, w[i]);
        if dpsi == 0.0 {
            step.v[i] = params.m_clip;
            step.pre_clip[i] = params.m_clip;
            step.midpoint_hits.push(i);
            continue;
        }
        let lhs = -dpsi * u[i];
        let rhs = -params.alpha * psi;
        if lhs >= rhs {
            step.v[i] = -u[i];
            step.pre_clip[i] = -u[i];
            continue;
        }
        let raw = pull_back(rhs, dpsi);
        step.pre_clip[i] = raw;
        if raw.abs() > params.m_clip {
            let v = clip(raw, params.m_clip);
            step.v[i] = v;
            step.clipped[i] = true;
            step.lambdas[i] = (v + u[i]) / dpsi;
        } else {
            step.v[i] = raw;
            // (v + u) / psi' with v = -alpha psi / psi', written so it stays >= 0
            step.lambdas[i] = (rhs - lhs) / (dpsi * dpsi);
        }
    }
    step
}

/// Per-coordinate answer of the reference projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleCoord {
    Value(f64),
    /// `psi' = 0` with a strictly positive right-hand side: empty constraint.
    Infeasible,
}

/// Reference solution of `min 1/2 |v + u|^2` over the velocity polyhedron,
/// solved coordinate-wise as a projection of `-u` onto a half-line. No
/// clipping and no midpoint convention.
pub fn qp_oracle(
    params: &ConstraintParams,
    grid: &QuantGrid,
    u: &[f64],
    w: &[f64],
) -> Vec<OracleCoord> {
    w.iter()
        .zip(u)
        .enumerate()
        .map(|(i, (&wi, &ui))| {
            let g = params.psi(grid, i, wi);
            if g > 0.0 {
                return OracleCoord::Value(-ui);
            }
            // constraint a * v >= b
            let a = params.psi_prime(grid, i, wi);
            let b = -params.alpha * g;
            let target = -ui;
            if a > 0.0 {
                OracleCoord::Value(target.max(b / a))
            } else if a < 0.0 {
                OracleCoord::Value(target.min(b / a))
            } else if b <= 0.0 {
                OracleCoord::Value(target)
            } else {
                OracleCoord::Infeasible
            }
        })
        .collect()
}

/// Stationarity residual for `min l(w)` over `C_eps`, given the full gradient.
///
/// Per coordinate: `|g_i|` strictly inside; zero on the boundary band
/// `|psi| <= boundary_tol` when the gradient is zero or has the sign of `psi'`
/// (so `-g` lies in the normal cone), `|g_i|` otherwise; outside the band
/// `|g_i| - psi`. Returns the maximum over coordinates.
pub fn kkt_residual(
    params: &ConstraintParams,
    grid: &QuantGrid,
    full_grad: &[f64],
    w: &[f64],
    boundary_tol: f64,
) -> f64 {
    w.iter()
        .zip(full_grad)
        .enumerate()
        .map(|(i, (&wi, &gi))| {
            let psi = params.psi(grid, i, wi);
            if psi > boundary_tol {
                gi.abs()
            } else if psi >= -boundary_tol {
                let dpsi = params.psi_prime(grid, i, wi);
                if gi == 0.0 || (gi > 0.0 && dpsi > 0.0) || (gi < 0.0 && dpsi < 0.0) {
                    0.0
                } else {
                    gi.abs()
                }
            } else {
                gi.abs() - psi
            }
        })
        .fold(0.0, f64::max)
}
