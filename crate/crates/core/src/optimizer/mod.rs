//! Skewed SGD with step-size and epsilon-annealing schedules, plus the
//! full-precision, projected and straight-through baselines.

mod schedule;
mod step;
mod trainer;

pub use schedule::{AnnealSchedule, AnnealTrigger, PlateauTracker, StepSchedule};
pub use step::{askew_step, bc_ste_step, projected_sgd_step, sgd_step, Iterate, Method, StepStats};
pub use trainer::{
    evaluate_quantized, Evaluation, RunOutput, RunState, StepEvent, TrainConfig, Trainer,
};
