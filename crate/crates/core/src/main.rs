use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use askewsgd::data::{gen_two_moons, Dataset};
use askewsgd::harness::config::ExhaustiveModel;
use askewsgd::harness::{
    exhaustive, fig1, logistic, moons, record, validate, OutputFormat, RunConfig,
};
use askewsgd::models::{mlp, Mlp, Quadratic};
use askewsgd::optimizer::Method;

#[derive(Parser)]
#[command(
    name = "askewsgd",
    version,
    about = "Annealed skewed SGD for quantized weights"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Run seeds on this many threads.
    #[arg(long)]
    parallel: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Logistic regression, all four methods.
    Logistic(Common),
    /// Two-moons MLP against exhaustive search.
    TwoMoons(Common),
    /// Velocity field and trajectories of the 2-D quadratic toy.
    Fig1(Common),
    /// Enumerate every grid configuration.
    Exhaustive {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        model: Option<ExhaustiveModel>,
    },
    /// Run the invariant suites.
    Validate(Common),
}

fn resolve(common: &Common, preset: RunConfig) -> askewsgd::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path, preset)?,
        None => preset,
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(n) = common.seeds {
        cfg.seeds = n;
    }
    if let Some(d) = &common.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(f) = common.format {
        cfg.format = f;
    }
    if let Some(p) = common.parallel {
        cfg.parallel = p;
    }
    if let Some(e) = common.epochs {
        cfg.train.epochs = e;
    }
    Ok(cfg)
}

/// Recomputes logged feasibility gaps from the weight snapshots.
fn recheck_snapshots(dir: &Path, cfg: &RunConfig, format: OutputFormat) -> askewsgd::Result<usize> {
    if format != OutputFormat::Csv {
        return Ok(0);
    }
    let mut mismatches = 0;
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        let Some(stem) = name.strip_suffix("_weights.csv") else {
            continue;
        };
        if !stem.contains("askew") {
            continue;
        }
        let snaps = record::read_snapshots_csv(&path)?;
        let rows = record::read_runlog_csv(dir.join(format!("{stem}.csv")))?;
        let Some(first) = snaps.first() else {
            continue;
        };
        let grid = cfg.grid.build(first.w.len())?;
        for s in &snaps {
            let (Some(row), Some(eps)) = (rows.iter().find(|r| r.step == s.step), s.epsilon) else {
                continue;
            };
            let p = askewsgd::ConstraintParams::new(eps, cfg.train.alpha);
            let gap = askewsgd::quantizer::feasibility_gap(&p, &grid, &s.w);
            if (row.feasibility_gap.unwrap_or(f64::NAN) - gap).abs() > 1e-10 {
                mismatches += 1;
            }
        }
    }
    Ok(mismatches)
}

fn cmd_logistic(common: &Common) -> askewsgd::Result<bool> {
    let cfg = resolve(common, RunConfig::logistic())?;
    let dir = cfg.out_dir.clone();
    let results = logistic::run(&cfg, Some(&dir))?;
    println!(
        "{:<10} {:>6} {:>12} {:>12} {:>8} {:>12}",
        "method", "seed", "final", "projected", "hamming", "last-std"
    );
    for r in &results {
        for m in &r.methods {
            println!(
                "{:<10} {:>6} {:>12.6} {:>12.6} {:>8} {:>12.3e}",
                m.method.name(),
                m.seed,
                m.final_loss,
                m.projected_loss,
                m.hamming_to_target,
                m.last_epoch_std
            );
        }
    }
    let bad = recheck_snapshots(&dir, &cfg, cfg.format)?;
    if bad > 0 {
        eprintln!("{bad} snapshot rows disagree with the logged feasibility gap");
    }
    Ok(bad == 0)
}

fn cmd_two_moons(common: &Common) -> askewsgd::Result<bool> {
    let cfg = resolve(common, RunConfig::two_moons())?;
    let dir = cfg.out_dir.clone();
    let summary = moons::run(&cfg, Some(&dir))?;
    println!("seeds: {}", summary.seeds);
    for (m, v) in &summary.medians {
        println!("median test loss {:<10} {v:.6}", m.name());
    }
    println!(
        "median test loss {:<10} {:.6}",
        "exhaustive", summary.exhaustive_best_median
    );
    // no binary solution can beat the exhaustive minimum on the same split
    let mut ok = true;
    for s in &summary.per_seed {
        for m in &s.methods {
            if m.method != Method::Sgd && m.test_loss < s.exhaustive_best - 1e-12 {
                eprintln!(
                    "seed {}: {} beats exhaustive search",
                    s.seed,
                    m.method.name()
                );
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn cmd_fig1(common: &Common) -> askewsgd::Result<bool> {
    let cfg = resolve(common, RunConfig::default())?;
    let dir = cfg.out_dir.clone();
    std::fs::create_dir_all(&dir)?;
    let grid = cfg.grid.build(2)?;
    let out = fig1::run(&cfg.fig1, &grid)?;
    out.write(&dir, cfg.format)?;
    let s = &out.summary;
    println!(
        "field points {} violations {} midpoints {}",
        s.field_points, s.field_violations, s.field_midpoints
    );
    println!(
        "constrained minimizer ({:.6}, {:.6})",
        s.constrained_minimizer[0], s.constrained_minimizer[1]
    );
    println!(
        "trajectory end ({:.6}, {:.6}) gap {:.3e} kkt {:.3e}",
        s.trajectory_end[0], s.trajectory_end[1], s.trajectory_gap, s.trajectory_kkt
    );
    Ok(s.field_violations == 0)
}

fn cmd_exhaustive(common: &Common, model: Option<ExhaustiveModel>) -> askewsgd::Result<bool> {
    let cfg = resolve(common, RunConfig::two_moons())?;
    let dir = cfg.out_dir.clone();
    std::fs::create_dir_all(&dir)?;
    let table = match model.unwrap_or(cfg.exhaustive_model) {
        ExhaustiveModel::TwoMoons => {
            let (train, test) =
                gen_two_moons(cfg.data.n_train, cfg.data.n_test, cfg.data.noise, cfg.seed);
            let grid = cfg.grid.build(mlp::PARAMS)?;
            exhaustive::enumerate(&Mlp::new(), &grid, &train, Some(&test))?
        }
        ExhaustiveModel::Fig1 => {
            let grid = cfg.grid.build(2)?;
            exhaustive::enumerate(&Quadratic::fig1(), &grid, &Dataset::placeholder(1), None)?
        }
    };
    match cfg.format {
        OutputFormat::Csv => table.write_csv(dir.join("exhaustive.csv"))?,
        OutputFormat::Json => record::write_json(dir.join("exhaustive.json"), &table)?,
    }
    if let Some(best) = table.best_test() {
        println!("configurations {}", table.rows.len());
        println!("best index {} w {:?}", best.index, best.w);
        println!(
            "train loss {:.6} test loss {:?}",
            best.train_loss, best.test_loss
        );
    }
    Ok(true)
}

fn cmd_validate(common: &Common) -> askewsgd::Result<bool> {
    let cfg = resolve(common, RunConfig::logistic())?;
    let report = validate::run(&cfg)?;
    for s in &report.suites {
        println!("{}", s.line());
    }
    if let Some(dir) = &common.out_dir {
        std::fs::create_dir_all(dir)?;
        record::write_json(dir.join("validate.json"), &report)?;
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Logistic(c) => cmd_logistic(c),
        Command::TwoMoons(c) => cmd_two_moons(c),
        Command::Fig1(c) => cmd_fig1(c),
        Command::Exhaustive { common, model } => cmd_exhaustive(common, *model),
        Command::Validate(c) => cmd_validate(c),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
