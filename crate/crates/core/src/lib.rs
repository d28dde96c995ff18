//! Stabilized FDR control over repeated runs of randomized selection procedures.
//!
//! A base procedure (split BH, Model-X knockoffs, data splitting with mirror
//! statistics) is run `M` times on one dataset. Per-feature importance
//! statistics are aggregated across runs, the top `s̄` aggregated features
//! receive a common relaxed e-value and e-BH produces the final selection.

pub mod error;
pub mod cli;
pub mod exec;
pub mod numerics;
pub mod metrics;
pub mod procedures;
pub mod simulation;
pub mod stabilizer;

pub use error::{Error, Result};
