//! Sequential-decision policy optimization toolkit.
//!
//! Two working modes share one data model:
//!
//! - **Offline**: estimate optimal dynamic treatment regimes from multistage
//!   trial data — Q-learning with backward induction, importance-weighted
//!   value estimators (MC / IPTW / AIPTW), outcome-weighted learning
//!   (OWL / BOWL / SOWL), and V-learning for indefinite horizons.
//! - **Online**: contextual-bandit agents for just-in-time adaptive
//!   interventions — LinUCB, linear Thompson sampling, conjugate
//!   Normal-Inverse-Gamma Thompson sampling with habituation-aware recovery
//!   contexts, and an actor-critic policy learner.
//!
//! Simulators for SMART and micro-randomized trial designs generate datasets
//! with known ground truth, and the experiment harness runs seeded,
//! replicated comparisons whose outputs are bit-identical under a fixed
//! config and seed.

pub mod bandits;
pub mod core;
pub mod dtr_direct;
pub mod dtr_indirect;
pub mod harness;
pub mod numerics;
pub mod simulators;
