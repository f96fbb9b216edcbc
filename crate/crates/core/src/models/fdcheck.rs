use super::DiffModel;
use crate::data::Dataset;

/// Outcome of a central-difference gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    /// `max_i |g_i - fd_i| / max(|g|_inf, |fd|_inf)`.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// A perturbation may cross a non-smooth point; the comparison is not meaningful.
    pub kink: bool,
    pub passed: bool,
}

/// Compares `model.grad` with central differences of `model.loss` on the
/// batch `idx`. The step for coordinate `i` is `h * (1 + |w_i|)`.
pub fn fd_check(
    model: &dyn DiffModel,
    w: &[f64],
    data: &Dataset,
    idx: &[usize],
    h: f64,
    tolerance: f64,
) -> FdReport {
    let analytic = model.grad(w, data, idx);
    let max_step = w.iter().map(|wi| h * (1.0 + wi.abs())).fold(0.0, f64::max);
    let kink = model.near_kink(w, data, idx, max_step);
    let mut probe = w.to_vec();
    let numeric: Vec<f64> = (0..w.len())
        .map(|i| {
            let step = h * (1.0 + w[i].abs());
            probe[i] = w[i] + step;
            let up = model.loss(&probe, data, idx);
            probe[i] = w[i] - step;
            let down = model.loss(&probe, data, idx);
            probe[i] = w[i];
            (up - down) / (2.0 * step)
        })
        .collect();
    let max_abs_err = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    let scale = analytic
        .iter()
        .chain(&numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let max_rel_err = if scale > 0.0 {
        max_abs_err / scale
    } else {
        max_abs_err
    };
    FdReport {
        max_rel_err,
        max_abs_err,
        analytic,
        numeric,
        kink,
        passed: kink || max_rel_err <= tolerance,
    }
}
