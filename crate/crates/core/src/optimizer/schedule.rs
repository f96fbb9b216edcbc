use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::QuantGrid;

/// Step-size sequence `gamma_k`, `k = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule {
    Constant {
        base: f64,
    },
    /// `base * k^(-delta)`.
    InversePower {
        base: f64,
        delta: f64,
    },
    /// `base / divisor^m` where `m` counts the milestones (in epochs) already reached.
    Piecewise {
        base: f64,
        milestones: Vec<usize>,
        divisor: f64,
    },
}

impl StepSchedule {
    pub fn rate(&self, k: u64, epoch: usize) -> f64 {
        match self {
            StepSchedule::Constant { base } => *base,
            StepSchedule::InversePower { base, delta } => base * (k.max(1) as f64).powf(-delta),
            StepSchedule::Piecewise {
                base,
                milestones,
                divisor,
            } => {
                let passed = milestones.iter().filter(|&&m| epoch >= m).count();
                base / divisor.powi(passed as i32)
            }
        }
    }

    /// Positive rates; with `theorem_compliant`, only `k^(-delta)` with
    /// `delta in (1/2, 1]` is accepted (sum diverges, sum of squares converges).
    pub fn validate(&self, theorem_compliant: bool) -> Result<()> {
        let base = match self {
            StepSchedule::Constant { base }
            | StepSchedule::InversePower { base, .. }
            | StepSchedule::Piecewise { base, .. } => *base,
        };
        if !(base > 0.0) || !base.is_finite() {
            return Err(Error::Config(format!("step size must be > 0, got {base}")));
        }
        if let StepSchedule::Piecewise { divisor, .. } = self {
            if !(*divisor > 0.0) || !divisor.is_finite() {
                return Err(Error::Config(format!("divisor must be > 0, got {divisor}")));
            }
        }
        if let StepSchedule::InversePower { delta, .. } = self {
            if !(*delta >= 0.0) {
                return Err(Error::Config(format!("delta must be >= 0, got {delta}")));
            }
        }
        if theorem_compliant {
            match self {
                StepSchedule::InversePower { delta, .. } if *delta > 0.5 && *delta <= 1.0 => {}
                _ => return Err(Error::Config(
                    "theorem-compliant mode needs an inverse-power schedule with delta in (1/2, 1]"
                        .into(),
                )),
            }
        }
        Ok(())
    }
}

/// When to move to the next epsilon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnnealTrigger {
    /// Epsilon stays at its initial value.
    Never,
    /// A new episode every `epochs_per_episode` epochs.
    Exponential { epochs_per_episode: usize },
    /// A new episode once the evaluation loss has failed to improve by
    /// `min_delta` for `patience` consecutive evaluations.
    Plateau { patience: usize, min_delta: f64 },
}

/// `eps_t = eps0 * decay^t` for episode `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub eps0: f64,
    pub decay: f64,
    pub trigger: AnnealTrigger,
    /// The run ends once the next epsilon would fall below this.
    #[serde(default)]
    pub eps_min: f64,
    /// Extra epochs spent at `eps0` before the first transition.
    #[serde(default)]
    pub hold_epochs: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            eps0: 1.0,
            decay: 0.88,
            trigger: AnnealTrigger::Exponential {
                epochs_per_episode: 1,
            },
            eps_min: 0.0,
            hold_epochs: 0,
        }
    }
}

impl AnnealSchedule {
    pub fn fixed(eps: f64) -> Self {
        Self {
            eps0: eps,
            decay: 0.5,
            trigger: AnnealTrigger::Never,
            eps_min: 0.0,
            hold_epochs: 0,
        }
    }

    /// `eps0` for the first `hold` epochs, then one decay per epoch.
    pub fn hold_then_per_epoch(eps0: f64, decay: f64, hold: usize) -> Self {
        Self {
            eps0,
            decay,
            trigger: AnnealTrigger::Exponential {
                epochs_per_episode: 1,
            },
            eps_min: 0.0,
            hold_epochs: hold,
        }
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        self.eps0 * self.decay.powi(episode as i32)
    }

    /// Whether an episode `episode` exists under `eps_min`.
    pub fn has_episode(&self, episode: usize) -> bool {
        match self.trigger {
            AnnealTrigger::Never => episode == 0,
            _ => episode == 0 || self.epsilon(episode) >= self.eps_min,
        }
    }

    /// Epoch length of an episode for the exponential trigger.
    pub fn episode_epochs(&self, episode: usize) -> Option<usize> {
        match self.trigger {
            AnnealTrigger::Exponential { epochs_per_episode } => Some(if episode == 0 {
                epochs_per_episode + self.hold_epochs
            } else {
                epochs_per_episode
            }),
            _ => None,
        }
    }

    pub fn validate(&self, grid: &QuantGrid) -> Result<()> {
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::Config(format!(
                "annealing decay must lie in (0, 1), got {}",
                self.decay
            )));
        }
        if !(self.eps0 > 0.0 && self.eps0 <= 1.0) {
            return Err(Error::Config(format!(
                "initial epsilon must lie in (0, 1], got {}",
                self.eps0
            )));
        }
        // every later epsilon is smaller, so checking the first covers all episodes
        if self.eps0 > grid.epsilon_bound() {
            return Err(Error::Config(format!(
                "initial epsilon {} exceeds the grid separation bound {}",
                self.eps0,
                grid.epsilon_bound()
            )));
        }
        match self.trigger {
            AnnealTrigger::Exponential {
                epochs_per_episode: 0,
            } => Err(Error::Config("epochs_per_episode must be positive".into())),
            AnnealTrigger::Plateau {
                patience,
                min_delta,
            } if patience == 0 || min_delta < 0.0 => Err(Error::Config(
                "plateau needs patience >= 1 and min_delta >= 0".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Counts consecutive evaluations without sufficient improvement.
#[derive(Debug, Clone)]
pub struct PlateauTracker {
    best: f64,
    stale: usize,
    patience: usize,
    min_delta: f64,
}

impl PlateauTracker {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        Self {
            best: f64::INFINITY,
            stale: 0,
            patience,
            min_delta,
        }
    }

    /// Records a metric (lower is better); true once the plateau is reached.
    pub fn observe(&mut self, metric: f64) -> bool {
        if metric < self.best - self.min_delta {
            self.best = metric;
            self.stale = 0;
        } else {
            self.best = self.best.min(metric);
            self.stale += 1;
        }
        self.stale >= self.patience
    }

    pub fn reset(&mut self) {
        self.best = f64::INFINITY;
        self.stale = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_rates() {
        assert_eq!(StepSchedule::Constant { base: 0.5 }.rate(10, 3), 0.5);
        let p = StepSchedule::InversePower {
            base: 1.0,
            delta: 0.6,
        };
        assert_eq!(p.rate(1, 0), 1.0);
        assert!((p.rate(32, 0) - 32f64.powf(-0.6)).abs() < 1e-15);
        let pw = StepSchedule::Piecewise {
            base: 1.0,
            milestones: vec![20, 40],
            divisor: 2.0,
        };
        assert_eq!(pw.rate(1, 19), 1.0);
        assert_eq!(pw.rate(1, 20), 0.5);
        assert_eq!(pw.rate(1, 45), 0.25);
    }

    #[test]
    fn theorem_compliance() {
        let ok = StepSchedule::InversePower {
            base: 1.0,
            delta: 0.6,
        };
        assert!(ok.validate(true).is_ok());
        for delta in [0.5, 1.2] {
            assert!(StepSchedule::InversePower { base: 1.0, delta }
                .validate(true)
                .is_err());
        }
        assert!(StepSchedule::Constant { base: 1.0 }.validate(true).is_err());
        assert!(StepSchedule::Constant { base: 1.0 }.validate(false).is_ok());
        assert!(StepSchedule::Constant { base: 0.0 }
            .validate(false)
            .is_err());
    }

    #[test]
    fn epsilon_sequence() {
        let a = AnnealSchedule::default();
        for t in 0..10 {
            assert_eq!(a.epsilon(t), 0.88f64.powi(t as i32));
            assert!(a.epsilon(t + 1) < a.epsilon(t));
        }
        assert!(a.validate(&QuantGrid::binary(2)).is_ok());
        assert!(a.validate(&QuantGrid::int_bits(4, 2).unwrap()).is_err());
        let bad = AnnealSchedule {
            decay: 1.0,
            ..AnnealSchedule::default()
        };
        assert!(bad.validate(&QuantGrid::binary(2)).is_err());
    }

    #[test]
    fn plateau_patience() {
        let mut t = PlateauTracker::new(3, 1e-4);
        assert!(!t.observe(1.0));
        assert!(!t.observe(0.9));
        assert!(!t.observe(0.89995));
        assert!(!t.observe(0.9));
        assert!(t.observe(0.9));
        t.reset();
        assert!(!t.observe(0.9));
    }
}
