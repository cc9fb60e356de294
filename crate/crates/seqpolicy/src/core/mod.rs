//! Trajectory data model, policies, and return semantics shared by the
//! estimators, simulators, and bandit agents.
//!
//! A [`Dataset`] is a bag of per-unit trajectories plus a schema declaring
//! per-stage state dimension and action arity. Rewards are `Option<f64>`:
//! a missing reward is an explicit sentinel, never an accidental NaN, and
//! consumers either reject it or declare an imputation rule.

mod csv_io;
mod data;
mod features;
mod policy;

pub use csv_io::{read_dataset_csv, write_dataset_csv};
pub use data::{Dataset, DatasetSchema, HorizonKind, StageRecord, StageSchema, Trajectory};
pub use features::{FeatureMap, History};
pub use policy::{PolicyKind, PolicySpec, StageRule};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("missing reward at stage {stage} of unit {unit}: impute before computing returns")]
    MissingReward { unit: String, stage: usize },

    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("action {action} out of range for arity {arity} at stage {stage}")]
    InvalidAction {
        action: usize,
        arity: usize,
        stage: usize,
    },

    #[error("behavior_prob must lie in (0, 1], got {value}")]
    InvalidBehaviorProb { value: f64 },

    #[error("dataset must contain at least one trajectory")]
    EmptyDataset,

    #[error("trajectory {unit} has length {got}, fixed horizon requires {expected}")]
    HorizonMismatch {
        unit: String,
        expected: usize,
        got: usize,
    },

    #[error("stage index {stage} out of range for trajectory of length {len}")]
    StageOutOfRange { stage: usize, len: usize },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

/// Index of the largest entry; exact ties go to the lowest index. This is
/// the one argmax used across the crate so that fitted regimes and agents
/// break ties identically.
pub fn argmax_tie_low(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
