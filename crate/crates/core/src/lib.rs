//! Next-activity prediction for process event logs.
//!
//! Event attributes are summarised per activity by XMeans clustering and fed,
//! together with the activity label, into a one-layer GRU that predicts the
//! next activity of a running case (or that the case is finished).

pub mod bundle;
pub mod cli;
pub mod clustering;
pub mod encoding;
pub mod error;
pub mod eventlog;
pub mod harness;
pub mod neuralnet;
pub mod seed;

pub use error::{Error, Result};
