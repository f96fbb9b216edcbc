//! Brute-force enumeration of every grid configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::DiffModel;
use crate::quantizer::QuantGrid;

/// Enumeration refuses grids with more configurations than this.
pub const MAX_CONFIGURATIONS: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveRow {
    pub index: u64,
    pub w: Vec<f64>,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveTable {
    pub rows: Vec<ExhaustiveRow>,
}

/// Configuration number `index` in mixed radix, coordinate 0 least significant.
pub fn configuration(grid: &QuantGrid, mut index: u64) -> Vec<f64> {
    (0..grid.dim())
        .map(|i| {
            let lv = grid.levels(i);
            let k = lv.len() as u64;
            let v = lv.values()[(index % k) as usize];
            index /= k;
            v
        })
        .collect()
}

pub fn enumerate(
    model: &dyn DiffModel,
    grid: &QuantGrid,
    train: &Dataset,
    test: Option<&Dataset>,
) -> Result<ExhaustiveTable> {
    grid.check_dim(model.dim())?;
    let count = grid.configuration_count();
    if count > MAX_CONFIGURATIONS {
        return Err(Error::Config(format!(
            "{count} configurations exceed the enumeration limit {MAX_CONFIGURATIONS}"
        )));
    }
    let rows = (0..count)
        .map(|index| {
            let w = configuration(grid, index);
            ExhaustiveRow {
                index,
                train_loss: model.full_loss(&w, train),
                test_loss: test.map(|t| model.full_loss(&w, t)),
                w,
            }
        })
        .collect();
    Ok(ExhaustiveTable { rows })
}

impl ExhaustiveTable {
    fn argmin(&self, key: impl Fn(&ExhaustiveRow) -> f64) -> Option<&ExhaustiveRow> {
        // strict comparison keeps the first row on ties
        self.rows
            .iter()
            .fold(None, |best: Option<&ExhaustiveRow>, r| match best {
                Some(b) if key(b) <= key(r) => Some(b),
                _ => Some(r),
            })
    }

    pub fn best_train(&self) -> Option<&ExhaustiveRow> {
        self.argmin(|r| r.train_loss)
    }

    /// Lowest test loss; falls back to training loss without a test set.
    pub fn best_test(&self) -> Option<&ExhaustiveRow> {
        self.argmin(|r| r.test_loss.unwrap_or(r.train_loss))
    }

    /// Number of rows whose test loss is within `rel` of the best.
    pub fn near_optimal(&self, rel: f64) -> usize {
        let Some(best) = self.best_test() else {
            return 0;
        };
        let b = best.test_loss.unwrap_or(best.train_loss);
        self.rows
            .iter()
            .filter(|r| r.test_loss.unwrap_or(r.train_loss) <= b * (1.0 + rel))
            .count()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let dim = self.rows.first().map_or(0, |r| r.w.len());
        let mut wtr = csv::Writer::from_path(path)?;
        let mut header = vec!["index".to_string()];
        header.extend((0..dim).map(|i| format!("w{i}")));
        header.push("train_loss".into());
        header.push("test_loss".into());
        wtr.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.index.to_string()];
            rec.extend(r.w.iter().map(|v| v.to_string()));
            rec.push(r.train_loss.to_string());
            rec.push(r.test_loss.map(|v| v.to_string()).unwrap_or_default());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Equal-width histogram of `values` over their range: `(lo, hi, count)` per bin.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo {
        (hi - lo) / bins as f64
    } else {
        1.0
    };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| (lo + b as f64 * width, lo + (b + 1) as f64 * width, c))
        .collect()
}

pub fn write_histogram_csv(path: impl AsRef<Path>, hist: &[(f64, f64, usize)]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["bin_lo", "bin_hi", "count"])?;
    for (lo, hi, c) in hist {
        wtr.write_record([lo.to_string(), hi.to_string(), c.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Mlp, Quadratic};
    use crate::quantizer::Levels;

    #[test]
    fn mixed_radix_order() {
        let grid = QuantGrid::layered(vec![
            (Levels::binary(), 1),
            (Levels::int_bits(1).unwrap(), 1),
        ])
        .unwrap();
        assert_eq!(grid.configuration_count(), 6);
        assert_eq!(configuration(&grid, 0), vec![-1.0, -1.0]);
        assert_eq!(configuration(&grid, 1), vec![1.0, -1.0]);
        assert_eq!(configuration(&grid, 2), vec![-1.0, 0.0]);
        assert_eq!(configuration(&grid, 5), vec![1.0, 1.0]);
    }

    #[test]
    fn mlp_has_512_rows() {
        let (train, test) = crate::data::gen_two_moons(50, 20, 0.1, 1);
        let table = enumerate(&Mlp::new(), &QuantGrid::binary(9), &train, Some(&test)).unwrap();
        assert_eq!(table.rows.len(), 512);
        let best = table.best_test().unwrap();
        assert_eq!(
            best.test_loss.unwrap(),
            Mlp::new().full_loss(&best.w, &test)
        );
        assert!(table.near_optimal(0.0) >= 1);
    }

    #[test]
    fn quadratic_argmin_is_nearest_vertex() {
        let q = Quadratic::new(vec![0.3, -0.7], 1.0);
        let table = enumerate(&q, &QuantGrid::binary(2), &Dataset::placeholder(1), None).unwrap();
        assert_eq!(table.best_train().unwrap().w, vec![1.0, -1.0]);
    }

    #[test]
    fn guard_rejects_large_grids() {
        let q = Quadratic::new(vec![0.0; 21], 1.0);
        let err =
            enumerate(&q, &QuantGrid::binary(21), &Dataset::placeholder(1), None).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[0.0, 0.1, 0.5, 1.0], 2);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 4);
        assert_eq!(h[1].2, 2);
    }
}
