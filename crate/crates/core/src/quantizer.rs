//! Quantization grids and the smoothed interval constraints built on them.
//!
//! Every coordinate `i` owns a strictly increasing level vector
//! `c_1 < ... < c_K`. The penalty `phi` vanishes exactly on the levels:
//!
//! * between two levels `a <= w < b`: `(w - a)^2 (w - b)^2`
//! * below the first level: `(w - c_1)^2`
//! * at or above the last level: `(w - c_K)^2`
//!
//! and `psi_eps = eps - phi`. The relaxed feasible set is
//! `C_eps = { w : psi_eps(w_i) >= 0 for all i }`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A strictly increasing set of quantization levels for one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Levels {
    values: Vec<f64>,
    min_gap: f64,
}

/// Position of a scalar relative to a level vector.
///
/// `Interior(j)` is zero-based: `levels[j] <= w < levels[j + 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Below,
    Interior(usize),
    Above,
}

impl Levels {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least two levels, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("levels must be finite".into()));
        }
        let mut min_gap = f64::INFINITY;
        for pair in values.windows(2) {
            let gap = pair[1] - pair[0];
            if !(gap > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "levels must be strictly increasing ({} followed by {})",
                    pair[0], pair[1]
                )));
            }
            min_gap = min_gap.min(gap);
        }
        Ok(Self { values, min_gap })
    }

    /// `{-1, +1}`.
    pub fn binary() -> Self {
        Self::new(vec![-1.0, 1.0]).expect("binary levels are valid")
    }

    /// Integer levels spanning `[-2^(bits-1), 2^(bits-1)]`, e.g. `-8..=8` for 4 bits.
    pub fn int_bits(bits: u32) -> Result<Self> {
        if bits == 0 || bits > 20 {
            return Err(Error::InvalidGrid(format!("unsupported bit width {bits}")));
        }
        let half = 1i64 << (bits - 1);
        Self::new((-half..=half).map(|v| v as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn cell(&self, w: f64) -> Cell {
        if w < self.first() {
            return Cell::Below;
        }
        if w >= self.last() {
            return Cell::Above;
        }
        // first index with level > w, minus one
        let upper = self.values.partition_point(|&c| c <= w);
        Cell::Interior(upper - 1)
    }

    pub fn phi(&self, w: f64) -> f64 {
        match self.cell(w) {
            Cell::Below => (w - self.first()).powi(2),
            Cell::Above => (w - self.last()).powi(2),
            Cell::Interior(j) => {
                let (a, b) = (self.values[j], self.values[j + 1]);
                ((w - a) * (w - b)).powi(2)
            }
        }
    }

    pub fn phi_prime(&self, w: f64) -> f64 {
        match self.cell(w) {
            Cell::Below => 2.0 * (w - self.first()),
            Cell::Above => 2.0 * (w - self.last()),
            Cell::Interior(j) => {
                let (a, b) = (self.values[j], self.values[j + 1]);
                2.0 * (w - a) * (w - b) * (2.0 * w - a - b)
            }
        }
    }

    /// Nearest level; exact midpoints go to the upper level.
    pub fn nearest(&self, w: f64) -> f64 {
        match self.cell(w) {
            Cell::Below => self.first(),
            Cell::Above => self.last(),
            Cell::Interior(j) => {
                let (a, b) = (self.values[j], self.values[j + 1]);
                if w - a < b - w {
                    a
                } else {
                    b
                }
            }
        }
    }

    /// Index of the nearest level (same midpoint convention as [`Levels::nearest`]).
    pub fn nearest_index(&self, w: f64) -> usize {
        match self.cell(w) {
            Cell::Below => 0,
            Cell::Above => self.values.len() - 1,
            Cell::Interior(j) => {
                let (a, b) = (self.values[j], self.values[j + 1]);
                if w - a < b - w {
                    j
                } else {
                    j + 1
                }
            }
        }
    }

    /// Voronoi cell `[lo, hi)` of level `j`, bounded by the neighbouring midpoints.
    pub fn voronoi_cell(&self, j: usize) -> (f64, f64) {
        let lo = if j == 0 {
            f64::NEG_INFINITY
        } else {
            0.5 * (self.values[j - 1] + self.values[j])
        };
        let hi = if j + 1 == self.values.len() {
            f64::INFINITY
        } else {
            0.5 * (self.values[j] + self.values[j + 1])
        };
        (lo, hi)
    }

    /// The interval `{w : phi(w) <= eps}` around level `j`, assuming eps is
    /// below the separation bound so that the intervals are disjoint.
    pub fn feasible_interval(&self, j: usize, eps: f64) -> (f64, f64) {
        let c = self.values[j];
        // inside (a, b) with a < b adjacent levels, phi <= eps solves
        // |(w - a)(w - b)| <= sqrt(eps)
        let root = eps.sqrt();
        let lo = if j == 0 {
            c - root
        } else {
            let a = self.values[j - 1];
            let mid = 0.5 * (a + c);
            let half = 0.5 * (c - a);
            mid + (half * half - root).max(0.0).sqrt()
        };
        let hi = if j + 1 == self.values.len() {
            c + root
        } else {
            let b = self.values[j + 1];
            let mid = 0.5 * (c + b);
            let half = 0.5 * (b - c);
            mid - (half * half - root).max(0.0).sqrt()
        };
        (lo, hi)
    }
}

/// Per-coordinate quantization levels.
///
/// Level vectors are shared: a layer of many coordinates references one
/// [`Levels`] through the coordinate map.
#[derive(Debug, Clone)]
pub struct QuantGrid {
    levels: Vec<Arc<Levels>>,
    coord_map: Vec<usize>,
    min_gap: f64,
}

impl QuantGrid {
    /// The same levels for all `dim` coordinates.
    pub fn uniform(levels: Levels, dim: usize) -> Self {
        let min_gap = levels.min_gap();
        Self {
            levels: vec![Arc::new(levels)],
            coord_map: vec![0; dim],
            min_gap,
        }
    }

    pub fn binary(dim: usize) -> Self {
        Self::uniform(Levels::binary(), dim)
    }

    pub fn int_bits(bits: u32, dim: usize) -> Result<Self> {
        Ok(Self::uniform(Levels::int_bits(bits)?, dim))
    }

    /// Consecutive layers, each `(levels, number of coordinates)`.
    pub fn layered(layers: Vec<(Levels, usize)>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidGrid("no layers given".into()));
        }
        let mut levels = Vec::with_capacity(layers.len());
        let mut coord_map = Vec::new();
        let mut min_gap = f64::INFINITY;
        for (idx, (lv, count)) in layers.into_iter().enumerate() {
            min_gap = min_gap.min(lv.min_gap());
            levels.push(Arc::new(lv));
            coord_map.extend(std::iter::repeat_n(idx, count));
        }
        Ok(Self {
            levels,
            coord_map,
            min_gap,
        })
    }

    pub fn dim(&self) -> usize {
        self.coord_map.len()
    }

    pub fn levels(&self, i: usize) -> &Levels {
        &self.levels[self.coord_map[i]]
    }

    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    /// Largest epsilon for which every coordinate's feasible set splits into
    /// one disjoint interval per level: `g_min^4 / 16`.
    pub fn epsilon_bound(&self) -> f64 {
        self.min_gap.powi(4) / 16.0
    }

    pub fn max_abs_level(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| l.first().abs().max(l.last().abs()))
            .fold(0.0, f64::max)
    }

    pub fn cell_index(&self, i: usize, w: f64) -> Cell {
        self.levels(i).cell(w)
    }

    pub fn phi(&self, i: usize, w: f64) -> f64 {
        self.levels(i).phi(w)
    }

    pub fn phi_prime(&self, i: usize, w: f64) -> f64 {
        self.levels(i).phi_prime(w)
    }

    pub fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Number of level combinations, saturating at `u64::MAX`.
    pub fn configuration_count(&self) -> u64 {
        (0..self.dim()).fold(1u64, |acc, i| {
            acc.saturating_mul(self.levels(i).len() as u64)
        })
    }
}

/// Smoothing, skew strength, clipping bound and diagnostic tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintParams {
    pub epsilon: f64,
    pub alpha: f64,
    pub m_clip: f64,
    pub boundary_tol: f64,
}

impl ConstraintParams {
    pub const DEFAULT_M_CLIP: f64 = 1.0;

    /// Defaults: `m_clip = 1`, `boundary_tol = 1e-6 * epsilon`.
    pub fn new(epsilon: f64, alpha: f64) -> Self {
        Self {
            epsilon,
            alpha,
            m_clip: Self::DEFAULT_M_CLIP,
            boundary_tol: 1e-6 * epsilon,
        }
    }

    pub fn with_m_clip(mut self, m_clip: f64) -> Self {
        self.m_clip = m_clip;
        self
    }

    /// Same alpha/clip with a new epsilon; the boundary tolerance tracks epsilon.
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        let ratio = if self.epsilon > 0.0 {
            self.boundary_tol / self.epsilon
        } else {
            1e-6
        };
        self.epsilon = epsilon;
        self.boundary_tol = ratio * epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Config(format!(
                "epsilon must lie in (0, 1], got {}",
                self.epsilon
            )));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if !(self.m_clip > 0.0) || !self.m_clip.is_finite() {
            return Err(Error::Config(format!(
                "m_clip must be > 0, got {}",
                self.m_clip
            )));
        }
        if !(self.boundary_tol >= 0.0) {
            return Err(Error::Config(format!(
                "boundary_tol must be >= 0, got {}",
                self.boundary_tol
            )));
        }
        Ok(())
    }

    /// Checks the parameters and the separation bound `epsilon <= g_min^4 / 16`.
    pub fn validate_for(&self, grid: &QuantGrid) -> Result<()> {
        self.validate()?;
        let bound = grid.epsilon_bound();
        if self.epsilon > bound {
            return Err(Error::Config(format!(
                "epsilon {} exceeds the grid separation bound g_min^4/16 = {}",
                self.epsilon, bound
            )));
        }
        Ok(())
    }

    pub fn psi(&self, grid: &QuantGrid, i: usize, w: f64) -> f64 {
        self.epsilon - grid.phi(i, w)
    }

    pub fn psi_prime(&self, grid: &QuantGrid, i: usize, w: f64) -> f64 {
        -grid.phi_prime(i, w)
    }
}

/// `max_i max(0, -psi_eps(w_i))`; zero exactly on `C_eps`.
pub fn feasibility_gap(params: &ConstraintParams, grid: &QuantGrid, w: &[f64]) -> f64 {
    w.iter()
        .enumerate()
        .map(|(i, &wi)| (-params.psi(grid, i, wi)).max(0.0))
        .fold(0.0, f64::max)
}

/// Nearest level per coordinate, midpoints rounding up.
pub fn project_to_grid(grid: &QuantGrid, w: &[f64]) -> Vec<f64> {
    w.iter()
        .enumerate()
        .map(|(i, &wi)| grid.levels(i).nearest(wi))
        .collect()
}

/// `max_i |w_i - nearest level|`.
pub fn distance_to_grid(grid: &QuantGrid, w: &[f64]) -> f64 {
    w.iter()
        .enumerate()
        .map(|(i, &wi)| (wi - grid.levels(i).nearest(wi)).abs())
        .fold(0.0, f64::max)
}

/// Number of coordinates whose nearest level differs.
pub fn hamming(grid: &QuantGrid, a: &[f64], b: &[f64]) -> usize {
    a.iter()
        .zip(b)
        .enumerate()
        .filter(|(i, (x, y))| {
            grid.levels(*i).nearest_index(**x) != grid.levels(*i).nearest_index(**y)
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn int4() -> Levels {
        Levels::int_bits(4).unwrap()
    }

    #[test]
    fn rejects_bad_levels() {
        assert!(Levels::new(vec![1.0]).is_err());
        assert!(Levels::new(vec![0.0, 0.0]).is_err());
        assert!(Levels::new(vec![1.0, 0.0]).is_err());
        assert!(Levels::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn int4_has_seventeen_levels() {
        let l = int4();
        assert_eq!(l.len(), 17);
        assert_eq!(l.first(), -8.0);
        assert_eq!(l.last(), 8.0);
        assert_eq!(l.min_gap(), 1.0);
    }

    #[test]
    fn cell_index_examples() {
        let b = Levels::binary();
        assert_eq!(b.cell(0.0), Cell::Interior(0));
        assert_eq!(b.cell(-2.0), Cell::Below);
        assert_eq!(b.cell(-1.0), Cell::Interior(0));
        assert_eq!(b.cell(1.0), Cell::Above);
        let l = int4();
        // direct scan for the bracketing pair
        let w = 3.4;
        let vals = l.values();
        let j = (0..vals.len() - 1)
            .find(|&j| vals[j] <= w && w < vals[j + 1])
            .unwrap();
        assert_eq!(l.cell(w), Cell::Interior(j));
        assert_eq!((vals[j], vals[j + 1]), (3.0, 4.0));
    }

    #[test]
    fn phi_examples() {
        let b = Levels::binary();
        assert_eq!(b.phi(1.0), 0.0);
        assert_eq!(b.phi_prime(1.0), 0.0);
        assert_abs_diff_eq!(b.phi(0.0), 1.0);
        // (w^2 - 1)^2 and 4 w (w^2 - 1) by hand
        assert_abs_diff_eq!(b.phi(0.5), 0.5625, epsilon = 1e-15);
        assert_abs_diff_eq!(b.phi_prime(0.5), -1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.phi(-2.0), 1.0);
        assert_abs_diff_eq!(b.phi_prime(-2.0), -2.0);
    }

    #[test]
    fn psi_examples() {
        let grid = QuantGrid::binary(1);
        let p = ConstraintParams::new(0.3, 1.0);
        assert_abs_diff_eq!(p.psi(&grid, 0, 1.0), 0.3);
        assert_abs_diff_eq!(p.psi(&grid, 0, 0.5), -0.2625, epsilon = 1e-15);
        assert_abs_diff_eq!(p.psi_prime(&grid, 0, 0.5), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.psi(&grid, 0, 0.0), -0.7, epsilon = 1e-15);
        assert_eq!(p.psi_prime(&grid, 0, 0.0), 0.0);
    }

    #[test]
    fn feasibility_gap_examples() {
        let grid = QuantGrid::binary(2);
        let p = ConstraintParams::new(0.3, 1.0);
        assert_eq!(feasibility_gap(&p, &grid, &[1.0, -1.0]), 0.0);
        assert_abs_diff_eq!(
            feasibility_gap(&p, &grid, &[0.0, 1.0]),
            0.7,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            feasibility_gap(&p, &grid, &[0.5, 0.5]),
            0.2625,
            epsilon = 1e-15
        );
    }

    #[test]
    fn projection_examples() {
        let grid = QuantGrid::binary(2);
        assert_eq!(project_to_grid(&grid, &[0.3, -0.9]), vec![1.0, -1.0]);
        assert_eq!(project_to_grid(&QuantGrid::binary(1), &[0.0]), vec![1.0]);
        let g4 = QuantGrid::int_bits(4, 1).unwrap();
        assert_eq!(project_to_grid(&g4, &[3.4]), vec![(3.4f64).round()]);
        assert_eq!(project_to_grid(&g4, &[2.5]), vec![3.0]);
        assert_eq!(project_to_grid(&g4, &[-20.0]), vec![-8.0]);
    }

    #[test]
    fn epsilon_bound_validation() {
        let binary = QuantGrid::binary(3);
        assert_eq!(binary.epsilon_bound(), 1.0);
        assert!(ConstraintParams::new(0.3, 1.0)
            .validate_for(&binary)
            .is_ok());
        let g4 = QuantGrid::int_bits(4, 3).unwrap();
        assert!(ConstraintParams::new(0.3, 1.0).validate_for(&g4).is_err());
        assert!(ConstraintParams::new(0.0625, 1.0).validate_for(&g4).is_ok());
        assert!(ConstraintParams::new(0.3, -1.0).validate().is_err());
        assert!(ConstraintParams::new(0.3, 1.0)
            .with_m_clip(0.0)
            .validate()
            .is_err());
        assert!(ConstraintParams::new(1.5, 1.0).validate().is_err());
    }

    #[test]
    fn layered_grid_shares_levels() {
        let grid = QuantGrid::layered(vec![
            (Levels::binary(), 3),
            (Levels::int_bits(2).unwrap(), 2),
        ])
        .unwrap();
        assert_eq!(grid.dim(), 5);
        assert_eq!(grid.levels(2).values(), &[-1.0, 1.0]);
        assert_eq!(grid.levels(3).values(), &[-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(grid.min_gap(), 1.0);
        assert_eq!(grid.configuration_count(), 8 * 25);
    }

    #[test]
    fn phi_vanishes_only_on_levels() {
        for levels in [
            Levels::binary(),
            int4(),
            Levels::new(vec![-1.0, 0.2, 0.5, 3.0]).unwrap(),
        ] {
            let (lo, hi) = (levels.first() - 2.0, levels.last() + 2.0);
            let n = 20_000;
            for k in 0..=n {
                let w = lo + (hi - lo) * k as f64 / n as f64;
                let phi = levels.phi(w);
                assert!(phi >= 0.0);
                let on_level = levels.values().contains(&w);
                assert_eq!(phi == 0.0, on_level, "w = {w}");
            }
            for &c in levels.values() {
                assert_eq!(levels.phi(c), 0.0);
            }
        }
    }

    #[test]
    fn phi_is_c1_across_boundaries() {
        let levels = Levels::new(vec![-1.5, -0.25, 0.5, 2.0]).unwrap();
        let h = 1e-12;
        for &c in levels.values() {
            assert!((levels.phi(c - h) - levels.phi(c + h)).abs() < 1e-10);
            assert!((levels.phi_prime(c - h) - levels.phi_prime(c + h)).abs() < 1e-10);
        }
    }

    #[test]
    fn phi_prime_matches_central_differences() {
        let levels = Levels::new(vec![-1.5, -0.25, 0.5, 2.0]).unwrap();
        let h = 1e-6;
        let n = 2000;
        for k in 0..n {
            let w = -3.0 + 6.0 * (k as f64 + 0.37) / n as f64;
            // stay clear of branch switches
            if levels.values().iter().any(|&c| (w - c).abs() < 10.0 * h) {
                continue;
            }
            let fd = (levels.phi(w + h) - levels.phi(w - h)) / (2.0 * h);
            let exact = levels.phi_prime(w);
            let rel = (fd - exact).abs() / exact.abs().max(1e-3);
            assert!(rel <= 1e-6, "w = {w}: fd {fd} vs {exact}");
        }
    }

    #[test]
    fn feasible_set_is_one_interval_per_level() {
        for levels in [
            Levels::binary(),
            int4(),
            Levels::new(vec![-1.0, 0.2, 0.5, 3.0]).unwrap(),
        ] {
            let grid = QuantGrid::uniform(levels.clone(), 1);
            for frac in [0.999, 0.5, 0.1, 0.01] {
                let eps = grid.epsilon_bound() * frac;
                let p = ConstraintParams::new(eps, 1.0);
                let (lo, hi) = (levels.first() - 1.0, levels.last() + 1.0);
                let n = 200_000;
                let mut components = 0;
                let mut prev = false;
                for k in 0..=n {
                    let w = lo + (hi - lo) * k as f64 / n as f64;
                    let inside = p.psi(&grid, 0, w) >= 0.0;
                    if inside && !prev {
                        components += 1;
                    }
                    prev = inside;
                }
                assert_eq!(components, levels.len(), "eps = {eps}");
            }
        }
    }

    #[test]
    fn feasible_interval_endpoints_are_on_the_boundary() {
        let levels = Levels::new(vec![-1.0, 0.2, 0.5, 3.0]).unwrap();
        let grid = QuantGrid::uniform(levels.clone(), 1);
        let eps = grid.epsilon_bound() * 0.5;
        for j in 0..levels.len() {
            let (lo, hi) = levels.feasible_interval(j, eps);
            assert!(lo < levels.values()[j] && levels.values()[j] < hi);
            assert!((levels.phi(lo) - eps).abs() < 1e-12);
            assert!((levels.phi(hi) - eps).abs() < 1e-12);
        }
    }

    #[test]
    fn feasible_points_approach_the_grid_as_eps_shrinks() {
        let grid = QuantGrid::binary(1);
        let mut last = f64::INFINITY;
        for eps in [1.0, 0.1, 0.01, 0.001, 1e-4, 1e-6] {
            let p = ConstraintParams::new(eps, 1.0);
            let n = 100_000;
            let mut worst: f64 = 0.0;
            for k in 0..=n {
                let w = -2.0 + 4.0 * k as f64 / n as f64;
                if feasibility_gap(&p, &grid, &[w]) == 0.0 {
                    worst = worst.max(distance_to_grid(&grid, &[w]));
                }
            }
            assert!(worst < last, "eps = {eps}: {worst} !< {last}");
            last = worst;
        }
        assert!(last < 1e-3);
    }
}
