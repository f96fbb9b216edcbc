//! Seeded synthetic datasets and minibatch sampling.
//!
//! All randomness comes from ChaCha8 streams keyed by `(seed, stream)`, so
//! every generator is a pure function of its arguments.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stream identifiers, one per independent use of a seed.
pub mod streams {
    pub const LOGISTIC_TARGET: u64 = 1;
    pub const LOGISTIC_FEATURES: u64 = 2;
    pub const MOONS_TRAIN: u64 = 3;
    pub const MOONS_TEST: u64 = 4;
    pub const INIT: u64 = 5;
    pub const MINIBATCH_BASE: u64 = 1 << 32;
}

/// Deterministic generator for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Row-major feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<f64>,
    dim: usize,
    pub split: Split,
    pub seed: u64,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        labels: Vec<f64>,
        dim: usize,
        split: Split,
        seed: u64,
    ) -> Result<Self> {
        if dim == 0 && !labels.is_empty() {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::Dimension {
                expected: labels.len() * dim,
                got: features.len(),
            });
        }
        if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::Config("labels must be 0 or 1".into()));
        }
        Ok(Self {
            features,
            labels,
            dim,
            split,
            seed,
        })
    }

    /// A dataset of `n` zero-feature rows, for losses that ignore the data.
    pub fn placeholder(n: usize) -> Self {
        Self {
            features: vec![0.0; n],
            labels: vec![0.0; n],
            dim: 1,
            split: Split::Train,
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }

    /// Header `x0,...,x{d-1},label`, one row per sample.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        header.push("label".into());
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.labels[i].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>, split: Split) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[headers.len() - 1] != "label" {
            return Err(Error::Config(
                "dataset CSV must end with a 'label' column".into(),
            ));
        }
        let dim = headers.len() - 1;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            for j in 0..dim {
                features.push(parse_f64(&rec[j])?);
            }
            labels.push(parse_f64(&rec[dim])?);
        }
        Self::new(features, labels, dim, split, 0)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("not a number: {s:?}")))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic-regression data: features uniform on `[-1, 1]^d`, a target
/// vector on the hypercube vertices, and `y ~ Bernoulli(sigmoid(x . w*))`.
pub fn gen_logistic(n: usize, d: usize, seed: u64) -> (Dataset, Vec<f64>) {
    let mut trng = rng_for(seed, streams::LOGISTIC_TARGET);
    let target: Vec<f64> = (0..d)
        .map(|_| if trng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let mut rng = rng_for(seed, streams::LOGISTIC_FEATURES);
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let start = features.len();
        for _ in 0..d {
            features.push(rng.random_range(-1.0..=1.0));
        }
        let z: f64 = features[start..]
            .iter()
            .zip(&target)
            .map(|(x, w)| x * w)
            .sum();
        let y = if rng.random::<f64>() < sigmoid(z) {
            1.0
        } else {
            0.0
        };
        labels.push(y);
    }
    let ds = Dataset::new(features, labels, d, Split::Train, seed).expect("consistent shapes");
    (ds, target)
}

pub const LOGISTIC_N: usize = 6000;
pub const LOGISTIC_D: usize = 10;
pub const MOONS_TRAIN: usize = 2000;
pub const MOONS_TEST: usize = 200;
pub const MOONS_NOISE: f64 = 0.1;

fn moons(n: usize, noise: f64, rng: &mut ChaCha8Rng, split: Split, seed: u64) -> Dataset {
    let n_outer = n.div_ceil(2);
    let normal = Normal::new(0.0, noise.max(0.0)).expect("valid std");
    let mut rows: Vec<([f64; 2], f64)> = Vec::with_capacity(n);
    for k in 0..n {
        let t = rng.random_range(0.0..=PI);
        let (mut x, label) = if k < n_outer {
            ([t.cos(), t.sin()], 0.0)
        } else {
            ([1.0 - t.cos(), 0.5 - t.sin()], 1.0)
        };
        if noise > 0.0 {
            x[0] += normal.sample(rng);
            x[1] += normal.sample(rng);
        }
        rows.push((x, label));
    }
    rows.shuffle(rng);
    let features = rows.iter().flat_map(|(x, _)| x.iter().copied()).collect();
    let labels = rows.iter().map(|(_, y)| *y).collect();
    Dataset::new(features, labels, 2, split, seed).expect("consistent shapes")
}

/// Two interleaved half circles: class 0 on the unit upper half circle
/// centred at the origin, class 1 on the lower half circle centred at
/// `(1, 0.5)`, plus isotropic Gaussian noise.
pub fn gen_two_moons(n_train: usize, n_test: usize, noise: f64, seed: u64) -> (Dataset, Dataset) {
    let train = moons(
        n_train,
        noise,
        &mut rng_for(seed, streams::MOONS_TRAIN),
        Split::Train,
        seed,
    );
    let test = moons(
        n_test,
        noise,
        &mut rng_for(seed, streams::MOONS_TEST),
        Split::Test,
        seed,
    );
    (train, test)
}

/// Shuffled index batches for one epoch; the last short batch is kept.
pub fn minibatches(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let bs = batch_size.clamp(1, n.max(1));
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = rng_for(seed, streams::MINIBATCH_BASE + epoch);
    idx.shuffle(&mut rng);
    idx.chunks(bs).map(|c| c.to_vec()).collect()
}

/// Uniform `[-scale, scale]^d` starting point.
pub fn init_weights(d: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, streams::INIT);
    (0..d)
        .map(|_| {
            if scale > 0.0 {
                rng.random_range(-scale..=scale)
            } else {
                0.0
            }
        })
        .collect()
}
