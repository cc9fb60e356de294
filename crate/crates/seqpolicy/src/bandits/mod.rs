//! Online contextual-bandit agents: LinUCB, linear Thompson sampling,
//! conjugate Normal-Inverse-Gamma Thompson sampling with recovery-context
//! features, an actor-critic policy learner, and regret accounting.
//!
//! Agent state is mutable and single-writer: one agent per simulated user,
//! users in parallel with independent RNG streams, no cross-user pooling.

mod actor_critic;
mod agent;
mod linear;
mod nig;

pub use actor_critic::{actor_critic_fit, ActorCriticFit, ActorCriticOptions, ActorCriticState};
pub use agent::{immediate_regret, AgentState, MissingRewardMode, OnlineAgent};
pub use linear::{lin_bandit_update, lints_select, linucb_select, LinBanditState};
pub use nig::{nig_ts_select, nig_update, NigSelectMode, NIGPosterior};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("feature vector has length {got}, agent dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no arms to select from")]
    NoArms,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("posterior update produced b* = {0}; sufficient statistics are inconsistent")]
    NumericalConsistency(f64),

    #[error("{0}")]
    Schema(String),

    #[error(transparent)]
    Numerics(#[from] crate::numerics::NumericsError),

    #[error(transparent)]
    Core(#[from] crate::core::CoreError),
}
