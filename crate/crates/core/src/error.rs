use thiserror::Error;

use crate::optim::TrainReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("derivative order {order} out of range for the {axis} axis (max {max})")]
    OrderOutOfRange { axis: &'static str, order: usize, max: usize },

    #[error("node {0} is not a scalar on this tape")]
    NotOnTape(usize),

    #[error("model has {found} outputs, expected {expected}")]
    OutputArity { expected: usize, found: usize },

    #[error("non-finite gradient at entry {0}")]
    NonFiniteGradient(usize),

    #[error("training diverged at epoch {epoch}: total loss {loss:e}")]
    Diverged {
        epoch: usize,
        loss: f64,
        report: Box<TrainReport>,
    },

    #[error("finite-difference solution became unstable at time level {level} (max |u| = {max_abs:e})")]
    Unstable { level: usize, max_abs: f64 },

    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("point ({x}, {t}) lies outside the grid")]
    OutOfBounds { x: f64, t: f64 },

    #[error("ground-truth norm is zero on the evaluation grid")]
    ZeroReferenceNorm,

    #[error("all loss-term gradient norms are zero")]
    ZeroGradientNorms,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
