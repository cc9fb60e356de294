//! Generative environments with known ground truth: two-stage SMART trials,
//! micro-randomized trials with per-arm habituation dynamics, and
//! missing-reward handling. Everything is a pure function of (config, n,
//! seed): rerunning reproduces the dataset bit for bit.

mod locf;
mod mrt;
mod recovery;
mod smart;

pub use locf::{apply_locf, apply_locf_dataset};
pub use mrt::{
    mrt_arm_features, simulate_mrt, simulate_mrt_policy, write_regret_csv, MrtAgent, MrtConfig,
    MrtObservation, PolicyAgent, RegretRow, RegretTrace,
};
pub use recovery::{update_recovery_context, RecoveryContext};
pub use smart::{
    simulate_smart, LinearOutcomeModel, Randomization, SmartConfig, SmartStage, SmartTruth,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("arm {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },

    #[error("agent: {0}")]
    Agent(String),

    #[error(transparent)]
    Core(#[from] crate::core::CoreError),

    #[error(transparent)]
    Numerics(#[from] crate::numerics::NumericsError),
}
