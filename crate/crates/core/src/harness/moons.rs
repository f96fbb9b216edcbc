//! Two-moons with the 9-weight binary MLP, checked against exhaustive search.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::exhaustive::{self, ExhaustiveTable};
use super::{for_seeds, stats, write_run};
use crate::data::{gen_two_moons, init_weights};
use crate::error::Result;
use crate::models::{mlp, DiffModel, Mlp};
use crate::optimizer::{evaluate_quantized, Method, RunOutput, Trainer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTest {
    pub method: Method,
    /// Test loss, at the projected weights for quantized methods.
    pub test_loss: f64,
    pub test_accuracy: Option<f64>,
    pub final_w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoonsSeed {
    pub seed: u64,
    pub methods: Vec<MethodTest>,
    pub exhaustive_best: f64,
    pub exhaustive_best_w: Vec<f64>,
    /// Configurations within 5% of the best test loss.
    pub near_optimal: usize,
}

impl MoonsSeed {
    pub fn loss_of(&self, m: Method) -> Option<f64> {
        self.methods
            .iter()
            .find(|r| r.method == m)
            .map(|r| r.test_loss)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoonsSummary {
    pub seeds: usize,
    /// `(method, median test loss)`.
    pub medians: Vec<(Method, f64)>,
    pub exhaustive_best_median: f64,
    pub per_seed: Vec<MoonsSeed>,
}

impl MoonsSummary {
    pub fn median_of(&self, m: Method) -> Option<f64> {
        self.medians.iter().find(|(k, _)| *k == m).map(|(_, v)| *v)
    }
}

pub struct MoonsRun {
    pub result: MoonsSeed,
    pub outputs: Vec<(Method, RunOutput)>,
    pub table: ExhaustiveTable,
}

pub fn run_seed(cfg: &RunConfig, seed: u64) -> Result<MoonsRun> {
    let (train, test) = gen_two_moons(cfg.data.n_train, cfg.data.n_test, cfg.data.noise, seed);
    let model = Mlp::new();
    let grid = cfg.validate(mlp::PARAMS)?;
    let w0 = init_weights(mlp::PARAMS, cfg.train.init_scale, seed);
    let mut methods = Vec::new();
    let mut outputs = Vec::new();
    for &m in &cfg.train.methods {
        let trainer = Trainer::new(
            &model,
            &train,
            Some(&test),
            &grid,
            cfg.train_config(m, seed),
        )?;
        let out = trainer.run(w0.clone())?;
        let (test_loss, test_accuracy) = if m.is_quantized() {
            let ev = evaluate_quantized(&model, &test, &grid, &out.final_w);
            (ev.loss, ev.accuracy)
        } else {
            (
                model.full_loss(&out.final_w, &test),
                model.accuracy(&out.final_w, &test),
            )
        };
        methods.push(MethodTest {
            method: m,
            test_loss,
            test_accuracy,
            final_w: out.final_w.clone(),
        });
        outputs.push((m, out));
    }
    let table = exhaustive::enumerate(&model, &grid, &train, Some(&test))?;
    let best = table.best_test().expect("grid has configurations");
    let result = MoonsSeed {
        seed,
        methods,
        exhaustive_best: best.test_loss.unwrap_or(best.train_loss),
        exhaustive_best_w: best.w.clone(),
        near_optimal: table.near_optimal(0.05),
    };
    Ok(MoonsRun {
        result,
        outputs,
        table,
    })
}

pub fn run(cfg: &RunConfig, dir: Option<&Path>) -> Result<MoonsSummary> {
    let seeds = cfg.seed_list();
    let runs = for_seeds(&seeds, cfg.parallel, |s| {
        let r = run_seed(cfg, s)?;
        if let Some(dir) = dir {
            super::ensure_dir(dir)?;
            for (m, out) in &r.outputs {
                let name = format!("moons_{}_seed{}", m.name(), s);
                write_run(dir, &name, cfg.format, &out.records, &out.snapshots)?;
            }
            r.table
                .write_csv(dir.join(format!("moons_exhaustive_seed{s}.csv")))?;
        }
        // the 512-row table is only needed for the first seed's histogram
        Ok((r.result, (s == cfg.seed).then_some(r.table)))
    })?;
    let mut per_seed = Vec::with_capacity(runs.len());
    let mut first_table = None;
    for (res, table) in runs {
        per_seed.push(res);
        if table.is_some() {
            first_table = table;
        }
    }
    let medians = cfg
        .train
        .methods
        .iter()
        .map(|&m| {
            let xs: Vec<f64> = per_seed.iter().filter_map(|r| r.loss_of(m)).collect();
            (m, stats::median(&xs))
        })
        .collect();
    let best: Vec<f64> = per_seed.iter().map(|r| r.exhaustive_best).collect();
    let summary = MoonsSummary {
        seeds: per_seed.len(),
        medians,
        exhaustive_best_median: stats::median(&best),
        per_seed,
    };
    if let Some(dir) = dir {
        super::write_sidecar(dir, cfg)?;
        super::record::write_json(dir.join("moons_summary.json"), &summary)?;
        if let Some(table) = first_table {
            let losses: Vec<f64> = table
                .rows
                .iter()
                .map(|r| r.test_loss.unwrap_or(r.train_loss))
                .collect();
            exhaustive::write_histogram_csv(
                dir.join("moons_exhaustive_histogram.csv"),
                &exhaustive::histogram(&losses, 40),
            )?;
        }
    }
    Ok(summary)
}
