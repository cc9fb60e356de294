//! Q-learning: tabular value iteration over discretized histories, linear
//! function approximation fit by backward induction, and greedy regime
//! extraction.

mod linear_q;
mod qtable;

pub use linear_q::{fit_q_backward, greedy_policy_from_q, LinearQModel, QFitOptions, StageQ};
pub use qtable::{tabular_q_update, QTable, Transition};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QLearnError {
    #[error("backward induction requires a fixed-horizon dataset")]
    NotFixedHorizon,

    #[error("expected one feature map per stage: {expected} stages, got {got}")]
    FeatureMapCount { expected: usize, got: usize },

    #[error("learning rate must lie in [0, 1], got {0}")]
    InvalidLearningRate(f64),

    #[error(transparent)]
    Core(#[from] crate::core::CoreError),

    #[error(transparent)]
    Numerics(#[from] crate::numerics::NumericsError),
}
