//! Adam followed by L-BFGS, with adaptive loss weights during the Adam phase.

mod adam;
mod lbfgs;
mod train;

pub use adam::{adam_step, AdamState};
pub use lbfgs::{lbfgs_step, LbfgsState, LbfgsStatus, LbfgsStep};
pub use train::{
    train, train_objective, EpochEvent, Objective, Phase, StopReason, TrainReport, TrainSchedule,
    WeightMode,
};
