use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::schedule::{AnnealSchedule, AnnealTrigger, PlateauTracker, StepSchedule};
use super::step::{
    askew_step, bc_ste_step, projected_sgd_step, sgd_step, Iterate, Method, StepStats,
};
use crate::data::{minibatches, Dataset};
use crate::error::{Error, Result};
use crate::harness::record::{RunRecord, Snapshot};
use crate::models::DiffModel;
use crate::quantizer::{feasibility_gap, project_to_grid, ConstraintParams, QuantGrid};
use crate::skew::{kkt_residual, SkewStep};

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub schedule: StepSchedule,
    pub alpha: f64,
    pub m_clip: f64,
    pub anneal: AnnealSchedule,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Evaluate every this many epochs; 0 disables evaluation.
    pub eval_every: usize,
    /// Snapshot weights every this many epochs; the final weights are always kept.
    pub snapshot_every: usize,
    pub theorem_compliant: bool,
}

impl TrainConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            schedule: StepSchedule::Constant { base: 1.0 },
            alpha: 1.0,
            m_clip: ConstraintParams::DEFAULT_M_CLIP,
            anneal: AnnealSchedule::default(),
            epochs: 25,
            batch_size: 1000,
            seed: 0,
            eval_every: 1,
            snapshot_every: 10,
            theorem_compliant: false,
        }
    }

    pub fn params(&self, epsilon: f64) -> ConstraintParams {
        ConstraintParams::new(epsilon, self.alpha).with_m_clip(self.m_clip)
    }

    pub fn validate(&self, grid: &QuantGrid) -> Result<()> {
        self.schedule.validate(self.theorem_compliant)?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.method == Method::Askew {
            self.anneal.validate(grid)?;
            self.params(self.anneal.eps0).validate_for(grid)?;
            if matches!(self.anneal.trigger, AnnealTrigger::Plateau { .. }) && self.eval_every == 0
            {
                return Err(Error::Config(
                    "the plateau trigger needs evaluations (eval_every > 0)".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Loss (and accuracy for classifiers) at given weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: Option<f64>,
}

/// Metrics at the projection of `w` onto the grid.
pub fn evaluate_quantized(
    model: &dyn DiffModel,
    data: &Dataset,
    grid: &QuantGrid,
    w: &[f64],
) -> Evaluation {
    let q = project_to_grid(grid, w);
    Evaluation {
        loss: model.full_loss(&q, data),
        accuracy: model.accuracy(&q, data),
    }
}

/// Data passed to observers after every update.
#[derive(Debug)]
pub struct StepEvent<'a> {
    pub step: u64,
    pub epoch: usize,
    pub episode: usize,
    pub params: Option<&'a ConstraintParams>,
    pub w_before: &'a [f64],
    pub w_after: &'a [f64],
    pub stats: &'a StepStats,
    pub skew: Option<&'a SkewStep>,
}

/// Mutable progress of a run; carried across episodes as the warm start.
#[derive(Debug, Clone)]
pub struct RunState {
    pub iterate: Iterate,
    pub epoch: usize,
    pub episode: usize,
    pub records: Vec<RunRecord>,
    pub snapshots: Vec<Snapshot>,
    pub epsilons: Vec<f64>,
    started: Instant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_w: Vec<f64>,
    /// Epsilon of every episode that ran (skewed method only).
    pub epsilons: Vec<f64>,
}

pub struct Trainer<'a> {
    model: &'a dyn DiffModel,
    train: &'a Dataset,
    eval: &'a Dataset,
    grid: &'a QuantGrid,
    config: TrainConfig,
}

impl<'a> Trainer<'a> {
    /// `eval` defaults to the training set.
    pub fn new(
        model: &'a dyn DiffModel,
        train: &'a Dataset,
        eval: Option<&'a Dataset>,
        grid: &'a QuantGrid,
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate(grid)?;
        if model.dim() != grid.dim() {
            return Err(Error::Dimension {
                expected: model.dim(),
                got: grid.dim(),
            });
        }
        if train.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        Ok(Self {
            model,
            train,
            eval: eval.unwrap_or(train),
            grid,
            config,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn start(&self, w0: Vec<f64>) -> Result<RunState> {
        self.grid.check_dim(w0.len())?;
        Ok(RunState {
            iterate: Iterate::new(w0),
            epoch: 0,
            episode: 0,
            records: Vec::new(),
            snapshots: Vec::new(),
            epsilons: Vec::new(),
            started: Instant::now(),
        })
    }

    fn is_askew(&self) -> bool {
        self.config.method == Method::Askew
    }

    fn current_params(&self, episode: usize) -> Option<ConstraintParams> {
        self.is_askew()
            .then(|| self.config.params(self.config.anneal.epsilon(episode)))
    }

    fn evaluate(&self, w: &[f64]) -> Evaluation {
        if self.config.method.is_quantized() {
            evaluate_quantized(self.model, self.eval, self.grid, w)
        } else {
            Evaluation {
                loss: self.model.full_loss(w, self.eval),
                accuracy: self.model.accuracy(w, self.eval),
            }
        }
    }

    fn snapshot(&self, state: &RunState, params: Option<&ConstraintParams>) -> Snapshot {
        Snapshot {
            step: state.iterate.k,
            epoch: state.epoch,
            episode: state.episode,
            epsilon: params.map(|p| p.epsilon),
            w: state.iterate.w.clone(),
        }
    }

    fn step(
        &self,
        iterate: &Iterate,
        batch: &[usize],
        params: Option<&ConstraintParams>,
        gamma: f64,
    ) -> Result<(Iterate, StepStats, Option<SkewStep>)> {
        let (m, d, g) = (self.model, self.train, self.grid);
        Ok(match self.config.method {
            Method::Askew => {
                let p = params.expect("skewed method always has constraint parameters");
                let (it, stats, skew) = askew_step(m, d, batch, iterate, p, g, gamma)?;
                (it, stats, Some(skew))
            }
            Method::Sgd => {
                let (it, s) = sgd_step(m, d, batch, iterate, g, gamma)?;
                (it, s, None)
            }
            Method::Projected => {
                let (it, s) = projected_sgd_step(m, d, batch, iterate, g, gamma)?;
                (it, s, None)
            }
            Method::BcSte => {
                let (it, s) = bc_ste_step(m, d, batch, iterate, g, gamma)?;
                (it, s, None)
            }
        })
    }

    /// Runs one episode at fixed epsilon, starting from the state's iterate.
    /// Returns whether another episode should follow.
    pub fn run_episode(
        &self,
        state: &mut RunState,
        observer: &mut dyn FnMut(&StepEvent<'_>),
    ) -> Result<bool> {
        let cfg = &self.config;
        let params = self.current_params(state.episode);
        if let Some(p) = &params {
            p.validate_for(self.grid)?;
            state.epsilons.push(p.epsilon);
        }
        let episode_len = if self.is_askew() {
            cfg.anneal.episode_epochs(state.episode)
        } else {
            None
        };
        let mut plateau = match cfg.anneal.trigger {
            AnnealTrigger::Plateau {
                patience,
                min_delta,
            } if self.is_askew() => Some(PlateauTracker::new(patience, min_delta)),
            _ => None,
        };
        let mut epochs_done = 0usize;
        let mut plateau_hit = false;
        while state.epoch < cfg.epochs {
            let batches = minibatches(
                self.train.len(),
                cfg.batch_size,
                cfg.seed,
                state.epoch as u64,
            );
            let last_batch = batches.len() - 1;
            for (b, batch) in batches.iter().enumerate() {
                let gamma = cfg.schedule.rate(state.iterate.k + 1, state.epoch);
                let (next, stats, skew) =
                    self.step(&state.iterate, batch, params.as_ref(), gamma)?;
                observer(&StepEvent {
                    step: next.k,
                    epoch: state.epoch,
                    episode: state.episode,
                    params: params.as_ref(),
                    w_before: &state.iterate.w,
                    w_after: &next.w,
                    stats: &stats,
                    skew: skew.as_ref(),
                });
                let forward = cfg.method.forward_weights(self.grid, &next.w);
                let mut record = RunRecord {
                    step: next.k,
                    epoch: state.epoch,
                    episode: state.episode,
                    epsilon: params.map(|p| p.epsilon),
                    gamma,
                    batch_loss: stats.batch_loss,
                    train_loss: self.model.full_loss(&forward, self.train),
                    eval_loss: None,
                    eval_accuracy: None,
                    feasibility_gap: params
                        .as_ref()
                        .map(|p| feasibility_gap(p, self.grid, &next.w)),
                    kkt_residual: None,
                    clip_count: stats.clip_count,
                    max_velocity: stats.max_velocity,
                    wall_time_s: 0.0,
                };
                state.iterate = next;
                let epoch_end = b == last_batch;
                let eval_now = epoch_end
                    && cfg.eval_every > 0
                    && (state.epoch + 1).is_multiple_of(cfg.eval_every);
                if eval_now {
                    let ev = self.evaluate(&state.iterate.w);
                    record.eval_loss = Some(ev.loss);
                    record.eval_accuracy = ev.accuracy;
                    if let Some(p) = &params {
                        let g = self.model.full_grad(&state.iterate.w, self.train);
                        record.kkt_residual = Some(kkt_residual(
                            p,
                            self.grid,
                            &g,
                            &state.iterate.w,
                            p.boundary_tol,
                        ));
                    }
                    if let Some(tracker) = plateau.as_mut() {
                        plateau_hit = tracker.observe(ev.loss);
                    }
                }
                record.wall_time_s = state.started.elapsed().as_secs_f64();
                state.records.push(record);
            }
            state.epoch += 1;
            epochs_done += 1;
            if cfg.snapshot_every > 0 && state.epoch.is_multiple_of(cfg.snapshot_every) {
                let snap = self.snapshot(state, params.as_ref());
                state.snapshots.push(snap);
            }
            if plateau_hit || episode_len == Some(epochs_done) {
                break;
            }
        }
        let more = self.is_askew()
            && state.epoch < cfg.epochs
            && cfg.anneal.trigger != AnnealTrigger::Never
            && cfg.anneal.has_episode(state.episode + 1);
        if more {
            state.episode += 1;
        }
        Ok(more)
    }

    pub fn run(&self, w0: Vec<f64>) -> Result<RunOutput> {
        self.run_observed(w0, &mut |_| {})
    }

    pub fn run_observed(
        &self,
        w0: Vec<f64>,
        observer: &mut dyn FnMut(&StepEvent<'_>),
    ) -> Result<RunOutput> {
        let mut state = self.start(w0)?;
        while self.run_episode(&mut state, observer)? {}
        if state.snapshots.last().map(|s| s.step) != Some(state.iterate.k) {
            let params = self.current_params(state.episode);
            let snap = self.snapshot(&state, params.as_ref());
            state.snapshots.push(snap);
        }
        Ok(RunOutput {
            records: state.records,
            snapshots: state.snapshots,
            final_w: state.iterate.w,
            epsilons: state.epsilons,
        })
    }
}
