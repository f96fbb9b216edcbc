//! Experiment runners behind the command-line interface.

pub mod config;
pub mod exhaustive;
pub mod fig1;
pub mod logistic;
pub mod moons;
pub mod record;
pub mod stats;
pub mod validate;

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
pub use config::{OutputFormat, RunConfig};
pub use record::{RunRecord, Snapshot};

/// Writes a run log and its weight snapshots in the configured format.
pub(crate) fn write_run(
    dir: &Path,
    name: &str,
    format: OutputFormat,
    records: &[RunRecord],
    snapshots: &[Snapshot],
) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            record::write_runlog_csv(dir.join(format!("{name}.csv")), records)?;
            record::write_snapshots_csv(dir.join(format!("{name}_weights.csv")), snapshots)?;
        }
        OutputFormat::Json => {
            record::write_json(dir.join(format!("{name}.json")), records)?;
            record::write_json(dir.join(format!("{name}_weights.json")), snapshots)?;
        }
    }
    Ok(())
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::from)
}

/// Resolved configuration next to the outputs.
pub(crate) fn write_sidecar<T: Serialize>(dir: &Path, config: &T) -> Result<()> {
    ensure_dir(dir)?;
    record::write_json(dir.join("config.json"), config)
}

/// Runs `f` over `seeds`, sequentially or on `parallel` worker threads;
/// results keep the seed order.
pub(crate) fn for_seeds<T, F>(seeds: &[u64], parallel: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    if parallel <= 1 {
        return seeds.iter().map(|&s| f(s)).collect();
    }
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| seeds.par_iter().map(|&s| f(s)).collect())
}
