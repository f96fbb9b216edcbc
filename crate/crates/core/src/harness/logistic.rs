//! Logistic regression with a binary target vector: every method from the
//! same data and starting point.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::{for_seeds, stats, write_run};
use crate::data::{gen_logistic, init_weights};
use crate::error::Result;
use crate::models::{DiffModel, Logistic};
use crate::optimizer::{Method, RunOutput, Trainer};
use crate::quantizer::{distance_to_grid, hamming, project_to_grid, QuantGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub seed: u64,
    /// Training loss after the last step, at the weights the method evaluates with.
    pub final_loss: f64,
    /// Training loss at the projection of the final latent weights.
    pub projected_loss: f64,
    pub hamming_to_target: usize,
    pub distance_to_grid: f64,
    pub last_epoch_mean: f64,
    pub last_epoch_std: f64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub target: Vec<f64>,
    /// Loss at the generating vector.
    pub target_loss: f64,
    pub methods: Vec<MethodSummary>,
}

pub struct SeedRun {
    pub result: SeedResult,
    pub outputs: Vec<(Method, RunOutput)>,
}

fn summarize(
    method: Method,
    seed: u64,
    out: &RunOutput,
    grid: &QuantGrid,
    target: &[f64],
    loss_at: impl Fn(&[f64]) -> f64,
) -> MethodSummary {
    let last_epoch = out.records.last().map_or(0, |r| r.epoch);
    let tail: Vec<f64> = out
        .records
        .iter()
        .filter(|r| r.epoch == last_epoch)
        .map(|r| r.train_loss)
        .collect();
    MethodSummary {
        method,
        seed,
        final_loss: out.records.last().map_or(f64::NAN, |r| r.train_loss),
        projected_loss: loss_at(&project_to_grid(grid, &out.final_w)),
        hamming_to_target: hamming(grid, &out.final_w, target),
        distance_to_grid: distance_to_grid(grid, &out.final_w),
        last_epoch_mean: stats::mean(&tail),
        last_epoch_std: stats::std_dev(&tail),
        steps: out.records.last().map_or(0, |r| r.step),
    }
}

/// All configured methods for one seed.
pub fn run_seed(cfg: &RunConfig, seed: u64) -> Result<SeedRun> {
    let (data, target) = gen_logistic(cfg.data.n, cfg.data.dim, seed);
    let model = Logistic::new(cfg.data.dim);
    let grid = cfg.validate(cfg.data.dim)?;
    let w0 = init_weights(cfg.data.dim, cfg.train.init_scale, seed);
    let mut outputs = Vec::new();
    let mut methods = Vec::new();
    for &m in &cfg.train.methods {
        let trainer = Trainer::new(&model, &data, None, &grid, cfg.train_config(m, seed))?;
        let out = trainer.run(w0.clone())?;
        methods.push(summarize(m, seed, &out, &grid, &target, |w| {
            model.full_loss(w, &data)
        }));
        outputs.push((m, out));
    }
    Ok(SeedRun {
        result: SeedResult {
            seed,
            target_loss: model.full_loss(&target, &data),
            target,
            methods,
        },
        outputs,
    })
}

/// Runs every seed, writes logs under `dir` (when given) and returns the summaries.
pub fn run(cfg: &RunConfig, dir: Option<&Path>) -> Result<Vec<SeedResult>> {
    let seeds = cfg.seed_list();
    let runs = for_seeds(&seeds, cfg.parallel, |s| run_seed(cfg, s))?;
    if let Some(dir) = dir {
        super::write_sidecar(dir, cfg)?;
        for run in &runs {
            for (m, out) in &run.outputs {
                let name = format!("logistic_{}_seed{}", m.name(), run.result.seed);
                write_run(dir, &name, cfg.format, &out.records, &out.snapshots)?;
            }
        }
    }
    let results: Vec<SeedResult> = runs.into_iter().map(|r| r.result).collect();
    if let Some(dir) = dir {
        super::record::write_json(dir.join("logistic_summary.json"), &results)?;
    }
    Ok(results)
}
