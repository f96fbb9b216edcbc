//! Run configuration files (TOML).
//!
//! ```toml
//! seed = 0
//! seeds = 5
//!
//! [grid]
//! levels = "binary"          # "intK" or an explicit list
//!
//! [train]
//! epochs = 25
//! batch_size = 1000
//! alpha = 1.0
//! lr = { kind = "constant", base = 1.0 }
//!
//! [anneal]
//! eps0 = 1.0
//! decay = 0.88
//! trigger = { kind = "exponential", epochs_per_episode = 1 }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{AnnealSchedule, AnnealTrigger, Method, StepSchedule, TrainConfig};
use crate::quantizer::{Levels, QuantGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Level set given by name (`binary`, `int4`, ...) or explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelSpec {
    Named(String),
    Explicit(Vec<f64>),
}

impl LevelSpec {
    pub fn build(&self) -> Result<Levels> {
        match self {
            LevelSpec::Explicit(v) => Levels::new(v.clone()),
            LevelSpec::Named(name) => {
                let name = name.trim().to_ascii_lowercase();
                if name == "binary" {
                    return Ok(Levels::binary());
                }
                if let Some(bits) = name.strip_prefix("int") {
                    let bits: u32 = bits
                        .parse()
                        .map_err(|_| Error::InvalidGrid(format!("bad grid shorthand {name:?}")))?;
                    return Levels::int_bits(bits);
                }
                Err(Error::InvalidGrid(format!(
                    "unknown grid shorthand {name:?}"
                )))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub levels: LevelSpec,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_levels")]
    pub levels: LevelSpec,
    /// Per-layer levels; overrides `levels` when present.
    #[serde(default)]
    pub layers: Option<Vec<LayerSpec>>,
}

fn default_levels() -> LevelSpec {
    LevelSpec::Named("binary".into())
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            levels: default_levels(),
            layers: None,
        }
    }
}

impl GridConfig {
    pub fn build(&self, dim: usize) -> Result<QuantGrid> {
        match &self.layers {
            None => Ok(QuantGrid::uniform(self.levels.build()?, dim)),
            Some(layers) => {
                let built = layers
                    .iter()
                    .map(|l| Ok((l.levels.build()?, l.count)))
                    .collect::<Result<Vec<_>>>()?;
                let grid = QuantGrid::layered(built)?;
                grid.check_dim(dim)?;
                Ok(grid)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub n: usize,
    pub dim: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub noise: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            n: crate::data::LOGISTIC_N,
            dim: crate::data::LOGISTIC_D,
            n_train: crate::data::MOONS_TRAIN,
            n_test: crate::data::MOONS_TEST,
            noise: crate::data::MOONS_NOISE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub methods: Vec<Method>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: StepSchedule,
    /// Per-method step-size schedules (keys: method names).
    #[serde(default)]
    pub lr_by_method: BTreeMap<String, StepSchedule>,
    pub alpha: f64,
    pub m_clip: f64,
    /// Initial weights are uniform on `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub eval_every: usize,
    pub snapshot_every: usize,
    #[serde(default)]
    pub theorem_compliant: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            epochs: 25,
            batch_size: 1000,
            lr: StepSchedule::Constant { base: 1.0 },
            lr_by_method: BTreeMap::new(),
            alpha: 1.0,
            m_clip: 1.0,
            init_scale: 0.1,
            eval_every: 1,
            snapshot_every: 10,
            theorem_compliant: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig1Section {
    pub epsilon: f64,
    pub alphas: Vec<f64>,
    pub m_clip: f64,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub starts: Vec<[f64; 2]>,
    pub gamma: f64,
    pub steps: usize,
    /// Trajectories integrate with this alpha.
    pub trajectory_alpha: f64,
}

impl Default for Fig1Section {
    fn default() -> Self {
        Self {
            epsilon: 0.3,
            alphas: vec![0.1, 1.0],
            m_clip: 1.0,
            lo: -2.0,
            hi: 2.0,
            points: 41,
            starts: vec![[0.5, 0.5], [-1.5, 1.8], [0.05, -0.4], [1.9, -1.9]],
            gamma: 0.1,
            steps: 2000,
            trajectory_alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExhaustiveModel {
    #[default]
    TwoMoons,
    Fig1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Number of consecutive seeds starting at `seed`.
    pub seeds: usize,
    pub parallel: usize,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    pub data: DataConfig,
    pub grid: GridConfig,
    pub train: TrainSection,
    pub anneal: AnnealSchedule,
    pub fig1: Fig1Section,
    pub exhaustive_model: ExhaustiveModel,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            seeds: 1,
            parallel: 1,
            out_dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
            data: DataConfig::default(),
            grid: GridConfig::default(),
            train: TrainSection::default(),
            anneal: AnnealSchedule::default(),
            fig1: Fig1Section::default(),
            exhaustive_model: ExhaustiveModel::default(),
        }
    }
}

/// File contents: every section optional, missing fields fall back to the
/// command's preset.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    seeds: Option<usize>,
    parallel: Option<usize>,
    out_dir: Option<PathBuf>,
    format: Option<OutputFormat>,
    data: Option<toml::Table>,
    grid: Option<GridConfig>,
    train: Option<toml::Table>,
    anneal: Option<toml::Table>,
    fig1: Option<toml::Table>,
    exhaustive_model: Option<ExhaustiveModel>,
}

fn merge<T>(base: &T, patch: Option<toml::Table>) -> Result<T>
where
    T: Serialize + for<'de> Deserialize<'de>,
{
    let patch = patch.unwrap_or_default();
    let mut value = toml::Value::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
    if let toml::Value::Table(table) = &mut value {
        for (k, v) in patch {
            table.insert(k, v);
        }
    }
    value
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}

impl RunConfig {
    /// Preset for the logistic-regression comparison.
    pub fn logistic() -> Self {
        Self::default()
    }

    /// Preset for the two-moons comparison.
    pub fn two_moons() -> Self {
        let mut lr_by_method = BTreeMap::new();
        lr_by_method.insert("sgd".to_string(), StepSchedule::Constant { base: 0.1 });
        Self {
            seeds: 50,
            train: TrainSection {
                methods: vec![Method::Sgd, Method::BcSte, Method::Askew],
                epochs: 50,
                batch_size: 100,
                lr: StepSchedule::Constant { base: 1.0 },
                lr_by_method,
                alpha: 4.0,
                m_clip: 1.0,
                init_scale: 0.5,
                eval_every: 1,
                snapshot_every: 10,
                theorem_compliant: false,
            },
            anneal: AnnealSchedule {
                eps0: 1.0,
                decay: 0.88,
                trigger: AnnealTrigger::Exponential {
                    epochs_per_episode: 1,
                },
                eps_min: 0.0,
                hold_epochs: 0,
            },
            ..Self::default()
        }
    }

    /// Parses a TOML file on top of `preset`.
    pub fn from_toml_str(text: &str, preset: RunConfig) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        let cfg = RunConfig {
            seed: raw.seed.unwrap_or(preset.seed),
            seeds: raw.seeds.unwrap_or(preset.seeds),
            parallel: raw.parallel.unwrap_or(preset.parallel),
            out_dir: raw.out_dir.unwrap_or(preset.out_dir.clone()),
            format: raw.format.unwrap_or(preset.format),
            data: merge(&preset.data, raw.data)?,
            grid: raw.grid.unwrap_or(preset.grid.clone()),
            train: merge(&preset.train, raw.train)?,
            anneal: merge(&preset.anneal, raw.anneal)?,
            fig1: merge(&preset.fig1, raw.fig1)?,
            exhaustive_model: raw.exhaustive_model.unwrap_or(preset.exhaustive_model),
        };
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>, preset: RunConfig) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, preset)
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds.max(1) as u64)
            .map(|i| self.seed + i)
            .collect()
    }

    pub fn lr_for(&self, method: Method) -> StepSchedule {
        self.train
            .lr_by_method
            .get(method.name())
            .cloned()
            .unwrap_or_else(|| self.train.lr.clone())
    }

    pub fn train_config(&self, method: Method, seed: u64) -> TrainConfig {
        TrainConfig {
            method,
            schedule: self.lr_for(method),
            alpha: self.train.alpha,
            m_clip: self.train.m_clip,
            anneal: self.anneal.clone(),
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            seed,
            eval_every: self.train.eval_every,
            snapshot_every: self.train.snapshot_every,
            theorem_compliant: self.train.theorem_compliant,
        }
    }

    /// Checks everything that can be checked before a run starts.
    pub fn validate(&self, dim: usize) -> Result<QuantGrid> {
        let grid = self.grid.build(dim)?;
        for key in self.train.lr_by_method.keys() {
            key.parse::<Method>()?;
        }
        for &m in &self.train.methods {
            self.train_config(m, self.seed).validate(&grid)?;
        }
        if self.train.init_scale < 0.0 {
            return Err(Error::Config("init_scale must be >= 0".into()));
        }
        Ok(grid)
    }
}
