//! Two-dimensional velocity field and trajectories for the quadratic toy
//! under binary-level constraints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Fig1Section, OutputFormat};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::Quadratic;
use crate::optimizer::{askew_step, Iterate};
use crate::quantizer::{feasibility_gap, ConstraintParams, QuantGrid};
use crate::skew::{kkt_residual, skew_direction, SkewStep};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub alpha: f64,
    pub w0: f64,
    pub w1: f64,
    pub v0: f64,
    pub v1: f64,
    pub psi0: f64,
    pub psi1: f64,
    pub clipped: usize,
    /// A coordinate sits on a cell midpoint, where the velocity set is empty.
    pub midpoint: bool,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub start: usize,
    pub step: u64,
    pub w0: f64,
    pub w1: f64,
    pub loss: f64,
    pub feasibility_gap: f64,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Summary {
    pub epsilon: f64,
    pub alphas: Vec<f64>,
    pub field_points: usize,
    pub field_violations: usize,
    pub field_midpoints: usize,
    pub unconstrained_minimizer: [f64; 2],
    pub unconstrained_kkt: f64,
    /// Grid-search minimizer over the feasible set.
    pub constrained_minimizer: [f64; 2],
    pub constrained_loss: f64,
    pub constrained_kkt: f64,
    /// Endpoint of the trajectory started at the first start point.
    pub trajectory_end: [f64; 2],
    pub trajectory_gap: f64,
    pub trajectory_kkt: f64,
    pub trajectory_error: f64,
}

/// Whether the pre-clip velocity of `step` lies in the velocity polyhedron
/// at `w` and matches `-u` off the active set.
pub fn velocity_admissible(
    params: &ConstraintParams,
    grid: &QuantGrid,
    u: &[f64],
    w: &[f64],
    step: &SkewStep,
) -> bool {
    (0..w.len()).all(|i| {
        if step.midpoint_hits.contains(&i) {
            return true;
        }
        let psi = params.psi(grid, i, w[i]);
        let v = step.pre_clip[i];
        if psi > 0.0 {
            v == -u[i]
        } else {
            v * params.psi_prime(grid, i, w[i]) >= -params.alpha * psi
        }
    })
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

pub fn vector_field(
    model: &Quadratic,
    grid: &QuantGrid,
    params: &ConstraintParams,
    lo: f64,
    hi: f64,
    points: usize,
) -> Vec<FieldRow> {
    let axis = linspace(lo, hi, points);
    let mut rows = Vec::with_capacity(axis.len() * axis.len());
    for &x1 in &axis {
        for &x0 in &axis {
            let w = [x0, x1];
            let u = model.gradient(&w);
            let s = skew_direction(params, grid, &u, &w);
            rows.push(FieldRow {
                alpha: params.alpha,
                w0: x0,
                w1: x1,
                v0: s.v[0],
                v1: s.v[1],
                psi0: params.psi(grid, 0, x0),
                psi1: params.psi(grid, 1, x1),
                clipped: s.clip_count(),
                midpoint: !s.midpoint_hits.is_empty(),
                satisfied: velocity_admissible(params, grid, &u, &w, &s),
            });
        }
    }
    rows
}

/// Full-gradient skewed iterations from `start`; one row per step, the start included.
pub fn trajectory(
    model: &Quadratic,
    grid: &QuantGrid,
    params: &ConstraintParams,
    start: [f64; 2],
    gamma: f64,
    steps: usize,
    start_id: usize,
) -> Result<Vec<TrajectoryRow>> {
    let data = Dataset::placeholder(1);
    let batch = [0usize];
    let mut it = Iterate::new(start.to_vec());
    let row = |it: &Iterate| TrajectoryRow {
        start: start_id,
        step: it.k,
        w0: it.w[0],
        w1: it.w[1],
        loss: model.value(&it.w),
        feasibility_gap: feasibility_gap(params, grid, &it.w),
        kkt_residual: kkt_residual(
            params,
            grid,
            &model.gradient(&it.w),
            &it.w,
            params.boundary_tol,
        ),
    };
    let mut rows = vec![row(&it)];
    for _ in 0..steps {
        let (next, _, _) = askew_step(model, &data, &batch, &it, params, grid, gamma)?;
        it = next;
        rows.push(row(&it));
    }
    Ok(rows)
}

fn best_on_grid(
    model: &Quadratic,
    grid: &QuantGrid,
    params: &ConstraintParams,
    axis0: &[f64],
    axis1: &[f64],
) -> Option<([f64; 2], f64)> {
    let mut best: Option<([f64; 2], f64)> = None;
    for &x1 in axis1 {
        if params.psi(grid, 1, x1) < 0.0 {
            continue;
        }
        for &x0 in axis0 {
            if params.psi(grid, 0, x0) < 0.0 {
                continue;
            }
            let l = model.value(&[x0, x1]);
            if best.is_none_or(|(_, b)| l < b) {
                best = Some(([x0, x1], l));
            }
        }
    }
    best
}

/// Minimizer of the loss over the feasible set by grid search: a pass at
/// resolution 1e-2 over `[lo, hi]^2`, then 1e-4 in a window around the best point.
pub fn grid_search_minimizer(
    model: &Quadratic,
    grid: &QuantGrid,
    params: &ConstraintParams,
    lo: f64,
    hi: f64,
) -> Result<([f64; 2], f64)> {
    let coarse_n = ((hi - lo) / 1e-2).round() as usize + 1;
    let coarse = linspace(lo, hi, coarse_n);
    let (c, _) = best_on_grid(model, grid, params, &coarse, &coarse)
        .ok_or_else(|| Error::Invariant("no feasible point on the search grid".into()))?;
    let half: f64 = 0.02;
    let fine_n = (2.0 * half / 1e-4).round() as usize + 1;
    let fine0 = linspace(c[0] - half, c[0] + half, fine_n);
    let fine1 = linspace(c[1] - half, c[1] + half, fine_n);
    best_on_grid(model, grid, params, &fine0, &fine1)
        .ok_or_else(|| Error::Invariant("refinement window lost feasibility".into()))
}

pub struct Fig1Output {
    pub field: Vec<FieldRow>,
    pub trajectories: Vec<TrajectoryRow>,
    pub summary: Fig1Summary,
}

/// Runs the experiment on `grid` (two coordinates; binary in the reference setup).
pub fn run(cfg: &Fig1Section, grid: &QuantGrid) -> Result<Fig1Output> {
    let model = Quadratic::fig1();
    grid.check_dim(2)?;
    let base = ConstraintParams::new(cfg.epsilon, cfg.trajectory_alpha).with_m_clip(cfg.m_clip);
    base.validate_for(grid)?;
    if cfg.gamma <= 0.0 || cfg.hi <= cfg.lo {
        return Err(Error::Config("fig1 needs gamma > 0 and lo < hi".into()));
    }
    let mut field = Vec::new();
    for &alpha in &cfg.alphas {
        let p = ConstraintParams { alpha, ..base };
        p.validate()?;
        field.extend(vector_field(&model, grid, &p, cfg.lo, cfg.hi, cfg.points));
    }
    let mut trajectories = Vec::new();
    for (k, &s) in cfg.starts.iter().enumerate() {
        trajectories.extend(trajectory(&model, grid, &base, s, cfg.gamma, cfg.steps, k)?);
    }
    let (cmin, closs) = grid_search_minimizer(&model, grid, &base, cfg.lo, cfg.hi)?;
    let kkt_at = |w: &[f64]| kkt_residual(&base, grid, &model.gradient(w), w, base.boundary_tol);
    let end = trajectories.iter().rfind(|r| r.start == 0).cloned();
    let (tend, tgap, tkkt) = match &end {
        Some(r) => ([r.w0, r.w1], r.feasibility_gap, r.kkt_residual),
        None => ([f64::NAN; 2], f64::NAN, f64::NAN),
    };
    let umin = [model.center()[0], model.center()[1]];
    let summary = Fig1Summary {
        epsilon: cfg.epsilon,
        alphas: cfg.alphas.clone(),
        field_points: field.len(),
        field_violations: field.iter().filter(|r| !r.satisfied).count(),
        field_midpoints: field.iter().filter(|r| r.midpoint).count(),
        unconstrained_minimizer: umin,
        unconstrained_kkt: kkt_at(&umin),
        constrained_minimizer: cmin,
        constrained_loss: closs,
        constrained_kkt: kkt_at(&cmin),
        trajectory_end: tend,
        trajectory_gap: tgap,
        trajectory_kkt: tkkt,
        trajectory_error: (tend[0] - cmin[0]).abs().max((tend[1] - cmin[1]).abs()),
    };
    Ok(Fig1Output {
        field,
        trajectories,
        summary,
    })
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut wtr = csv::Writer::from_path(path.with_extension("csv"))?;
            for r in rows {
                wtr.serialize(r)?;
            }
            wtr.flush()?;
            Ok(())
        }
        OutputFormat::Json => super::record::write_json(path.with_extension("json"), rows),
    }
}

impl Fig1Output {
    pub fn write(&self, dir: &Path, format: OutputFormat) -> Result<()> {
        write_rows(&dir.join("fig1_field"), &self.field, format)?;
        write_rows(&dir.join("fig1_trajectories"), &self.trajectories, format)?;
        super::record::write_json(dir.join("fig1_summary.json"), &self.summary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_velocity_is_negative_gradient() {
        let model = Quadratic::fig1();
        let grid = QuantGrid::binary(2);
        let p = ConstraintParams::new(0.3, 1.0);
        for r in vector_field(&model, &grid, &p, -2.0, 2.0, 21) {
            if r.psi0 > 0.0 && r.psi1 > 0.0 {
                let g = model.gradient(&[r.w0, r.w1]);
                assert_eq!([r.v0, r.v1], [-g[0], -g[1]]);
            }
            assert!(r.satisfied);
        }
    }

    #[test]
    fn search_finds_analytic_minimizer() {
        let model = Quadratic::fig1();
        let grid = QuantGrid::binary(2);
        let p = ConstraintParams::new(0.3, 1.0);
        let (w, _) = grid_search_minimizer(&model, &grid, &p, -2.0, 2.0).unwrap();
        // lower end of the feasible interval around +1
        let exact = (1.0 - 0.3f64.sqrt()).sqrt();
        assert!(
            (w[0] - exact).abs() <= 1e-4 && (w[1] - exact).abs() <= 1e-4,
            "{w:?}"
        );
    }
}
