//! Truncated Taylor jets for input derivatives and a batched tape for
//! parameter gradients.

mod jet;
mod tape;

pub use jet::{factorial, jet_tanh, Jet, MAX_ORDER};
pub use tape::{Coef, JetLayout, NodeId, Tape};
