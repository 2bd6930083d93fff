//! Event-driven simulation, paired Monte-Carlo benchmarking, invariant
//! verification and CSV export on top of `ocf-core`.

pub mod bench;
pub mod export;
pub mod sim;
pub mod verify;

use std::path::Path;
use std::sync::Arc;

use ocf_core::policy::{Policy, SelectMode};
use ocf_core::tsac::{load_checkpoint, CheckpointError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy '{0}' is not one of random, heuristic, tsac")]
    Unknown(String),
    #[error("policy tsac needs a checkpoint")]
    MissingCheckpoint,
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// Builds a policy by name; `tsac` loads `checkpoint`.
pub fn make_policy(name: &str, checkpoint: Option<&Path>, mode: SelectMode) -> Result<Policy, PolicyError> {
    match name {
        "random" => Ok(Policy::Random),
        "heuristic" => Ok(Policy::Heuristic),
        "tsac" => {
            let path = checkpoint.ok_or(PolicyError::MissingCheckpoint)?;
            Ok(Policy::Learned { net: Arc::new(load_checkpoint(path)?), mode })
        }
        other => Err(PolicyError::Unknown(other.to_string())),
    }
}
