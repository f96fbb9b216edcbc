//! Invariant suites: oracle equivalence, gradient checks, feasibility
//! attraction and cell containment.

use serde::{Deserialize, Serialize};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::RunConfig;
use crate::data::{gen_logistic, gen_two_moons, init_weights, rng_for, Dataset};
use crate::error::Result;
use crate::models::{fd_check, mlp, DiffModel, Logistic, Mlp, Quadratic};
use crate::optimizer::{AnnealSchedule, Method, StepEvent, StepSchedule, Trainer};
use crate::quantizer::{ConstraintParams, Levels, QuantGrid};
use crate::skew::{qp_oracle, skew_direction, OracleCoord};

const STREAM_ORACLE: u64 = 101;
const STREAM_FD: u64 = 102;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub checks: usize,
    pub failures: usize,
    pub worst: f64,
    pub passed: bool,
}

impl SuiteReport {
    fn new(name: &str, checks: usize, failures: usize, worst: f64) -> Self {
        Self {
            name: name.to_string(),
            checks,
            failures,
            worst,
            passed: failures == 0 && checks > 0,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{:<24} {} checks={} failures={} worst={:.3e}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.checks,
            self.failures,
            self.worst
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub suites: Vec<SuiteReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }
}

/// Agreement of the closed-form direction with the reference projection on
/// `cases` random `(u, w)` pairs per grid, over a sweep of epsilon and alpha.
/// Coordinates on a midpoint are skipped.
pub fn oracle_suite(seed: u64, cases: usize, tol: f64) -> SuiteReport {
    let mut rng = rng_for(seed, STREAM_ORACLE);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let dim = 8;
    let grids = [
        QuantGrid::binary(dim),
        QuantGrid::int_bits(4, dim).expect("int4 grid"),
    ];
    let mut checks = 0;
    let mut failures = 0;
    let mut worst = 0.0f64;
    let mut n = 0;
    while n < cases {
        for grid in &grids {
            let bound = grid.epsilon_bound();
            for eps_frac in [0.1, 0.3, 0.9] {
                for alpha in [0.1, 1.0, 5.0] {
                    let p = ConstraintParams::new(eps_frac * bound, alpha);
                    let lv = grid.levels(0);
                    let (lo, hi) = (lv.first() - 0.5, lv.last() + 0.5);
                    let w: Vec<f64> = (0..dim).map(|_| rng.random_range(lo..hi)).collect();
                    let scale = 10f64.powf(rng.random_range(-3.0..1.0));
                    let u: Vec<f64> = (0..dim).map(|_| scale * normal.sample(&mut rng)).collect();
                    let s = skew_direction(&p, grid, &u, &w);
                    for (i, o) in qp_oracle(&p, grid, &u, &w).into_iter().enumerate() {
                        if s.midpoint_hits.contains(&i) {
                            continue;
                        }
                        checks += 1;
                        match o {
                            OracleCoord::Value(v) => {
                                let err = (s.pre_clip[i] - v).abs();
                                worst = worst.max(err);
                                if err > tol {
                                    failures += 1;
                                }
                            }
                            OracleCoord::Infeasible => failures += 1,
                        }
                    }
                    n += 1;
                }
            }
        }
    }
    SuiteReport::new("oracle-equivalence", checks, failures, worst)
}

fn fd_points(
    model: &dyn DiffModel,
    data: &Dataset,
    points: usize,
    scale: f64,
    tol: f64,
    rng: &mut impl Rng,
) -> (usize, usize, f64) {
    let idx = data.all_indices();
    let (mut checks, mut failures, mut worst) = (0, 0, 0.0f64);
    let mut tries = 0;
    while checks < points && tries < 100 * points {
        tries += 1;
        let w: Vec<f64> = (0..model.dim())
            .map(|_| rng.random_range(-scale..scale))
            .collect();
        let r = fd_check(model, &w, data, &idx, 1e-5, tol);
        if r.kink {
            continue;
        }
        checks += 1;
        worst = worst.max(r.max_rel_err);
        if !r.passed {
            failures += 1;
        }
    }
    (checks, failures, worst)
}

/// Central differences at `points` random points per model: logistic and
/// quadratic within 1e-6, the MLP within 1e-5 away from ReLU kinks.
pub fn gradient_suite(seed: u64, points: usize) -> Vec<SuiteReport> {
    let mut rng = rng_for(seed, STREAM_FD);
    let (logit_data, _) = gen_logistic(64, 10, seed);
    let (moons, _) = gen_two_moons(32, 0, 0.1, seed);
    let quad = Quadratic::new(vec![0.5, -1.0, 2.0, 0.25], 3.0);
    let mut out = Vec::new();
    let (c, f, w) = fd_points(&Logistic::new(10), &logit_data, points, 2.0, 1e-6, &mut rng);
    out.push(SuiteReport::new("fd-logistic", c, f, w));
    let (c, f, w) = fd_points(&quad, &Dataset::placeholder(1), points, 3.0, 1e-6, &mut rng);
    out.push(SuiteReport::new("fd-quadratic", c, f, w));
    let (c, f, w) = fd_points(&Mlp::new(), &moons, points, 1.5, 1e-5, &mut rng);
    out.push(SuiteReport::new("fd-mlp", c, f, w));
    out
}

/// Every active, non-midpoint pre-clip velocity of a full logistic run
/// satisfies `v psi' >= -alpha psi` exactly.
pub fn attraction_suite(cfg: &RunConfig) -> Result<SuiteReport> {
    let d = cfg.data.dim;
    let (data, _) = gen_logistic(cfg.data.n, d, cfg.seed);
    let (c1, f1, w1) = attraction_counts(&Logistic::new(d), &data, cfg)?;
    let moons_cfg = RunConfig {
        seed: cfg.seed,
        ..RunConfig::two_moons()
    };
    let (moons, _) = gen_two_moons(moons_cfg.data.n_train, 0, moons_cfg.data.noise, cfg.seed);
    let (c2, f2, w2) = attraction_counts(&Mlp::new(), &moons, &moons_cfg)?;
    Ok(SuiteReport::new(
        "feasibility-attraction",
        c1 + c2,
        f1 + f2,
        w1.max(w2),
    ))
}

/// Checks, failures and worst violation of the velocity inequality over one
/// skewed run of `model`.
pub fn attraction_counts(
    model: &dyn DiffModel,
    data: &Dataset,
    cfg: &RunConfig,
) -> Result<(usize, usize, f64)> {
    let d = model.dim();
    let grid = cfg.validate(d)?;
    let tc = cfg.train_config(Method::Askew, cfg.seed);
    let trainer = Trainer::new(model, data, None, &grid, tc)?;
    let (mut checks, mut failures, mut worst) = (0usize, 0usize, 0.0f64);
    trainer.run_observed(
        init_weights(d, cfg.train.init_scale, cfg.seed),
        &mut |ev: &StepEvent<'_>| {
            let (Some(p), Some(s)) = (ev.params, ev.skew) else {
                return;
            };
            for &i in &s.active {
                if s.midpoint_hits.contains(&i) {
                    continue;
                }
                let w = ev.w_before[i];
                let lhs = s.pre_clip[i] * p.psi_prime(&grid, i, w);
                let rhs = -p.alpha * p.psi(&grid, i, w);
                checks += 1;
                if lhs < rhs {
                    failures += 1;
                    worst = worst.max(rhs - lhs);
                }
            }
        },
    )?;
    Ok((checks, failures, worst))
}

/// Count of `(step, coordinate)` pairs where the step bound held, and of
/// those that left their Voronoi cell.
#[allow(clippy::too_many_arguments)]
pub fn containment_counts(
    model: &dyn DiffModel,
    data: &Dataset,
    grid: &QuantGrid,
    schedule: StepSchedule,
    anneal: AnnealSchedule,
    epochs: usize,
    batch_size: usize,
    seed: u64,
    init_scale: f64,
) -> Result<(usize, usize)> {
    let mut tc = crate::optimizer::TrainConfig::new(Method::Askew);
    tc.schedule = schedule;
    tc.anneal = anneal;
    tc.epochs = epochs;
    tc.batch_size = batch_size;
    tc.seed = seed;
    let trainer = Trainer::new(model, data, None, grid, tc)?;
    let (mut checks, mut escapes) = (0usize, 0usize);
    let w0 = init_weights(model.dim(), init_scale, seed);
    trainer.run_observed(w0, &mut |ev: &StepEvent<'_>| {
        let Some(p) = ev.params else {
            return;
        };
        let unorm = ev.stats.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let reach = ev.stats.gamma * p.m_clip.max(unorm);
        for i in 0..ev.w_before.len() {
            let lv: &Levels = grid.levels(i);
            let j = lv.nearest_index(ev.w_before[i]);
            let (cell_lo, cell_hi) = lv.voronoi_cell(j);
            let (a, b) = lv.feasible_interval(j, p.epsilon);
            let margin = (a - cell_lo).min(cell_hi - b);
            if reach < 0.5 * margin {
                checks += 1;
                let x = ev.w_after[i];
                if !(x >= cell_lo && x < cell_hi) {
                    escapes += 1;
                }
            }
        }
    })?;
    Ok((checks, escapes))
}

/// Small steps never carry a coordinate out of its cell, on a binary
/// logistic run and a 2-bit MLP run.
pub fn containment_suite(seed: u64) -> Result<SuiteReport> {
    let (data, _) = gen_logistic(2000, 10, seed);
    let (c1, e1) = containment_counts(
        &Logistic::new(10),
        &data,
        &QuantGrid::binary(10),
        StepSchedule::Constant { base: 0.05 },
        AnnealSchedule::default(),
        25,
        100,
        seed,
        1.0,
    )?;
    let (moons, _) = gen_two_moons(500, 0, 0.1, seed);
    let grid = QuantGrid::int_bits(2, mlp::PARAMS)?;
    let (c2, e2) = containment_counts(
        &Mlp::new(),
        &moons,
        &grid,
        StepSchedule::Constant { base: 0.02 },
        AnnealSchedule {
            eps0: grid.epsilon_bound(),
            ..AnnealSchedule::default()
        },
        25,
        50,
        seed,
        2.0,
    )?;
    Ok(SuiteReport::new(
        "cell-containment",
        c1 + c2,
        e1 + e2,
        (e1 + e2) as f64,
    ))
}

/// All suites; `cfg` supplies the seed and the attraction run's settings.
pub fn run(cfg: &RunConfig) -> Result<ValidationReport> {
    cfg.validate(cfg.data.dim)?;
    let mut suites = vec![oracle_suite(cfg.seed, 1000, 1e-10)];
    suites.extend(gradient_suite(cfg.seed, 100));
    suites.push(attraction_suite(cfg)?);
    suites.push(containment_suite(cfg.seed)?);
    Ok(ValidationReport {
        seed: cfg.seed,
        suites,
    })
}
