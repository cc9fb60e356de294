//! Experiment orchestration: structured-text configuration, seeded
//! replication management, metric emission, and the manifest that makes a
//! run auditable. Reruns with the same config and seed are bit-identical,
//! including under parallel replication execution.

mod config;
mod experiment;
mod metrics;

pub use config::{
    load_config, load_config_str, save_config, EnvConfig, ExperimentConfig, MethodConfig,
    MethodKind, MrtEnvConfig, Scenario, SmartEnvConfig, StageBlock,
};
pub use experiment::{
    config_hash_hex, fit_configured_policy, run_experiment, ExperimentReport, ReplicationStatus,
};
pub use metrics::{write_metrics_csv, MetricName, MetricsRecord};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid config:\n{}", violations.join("\n"))]
    Validation { violations: Vec<String> },

    #[error("metric value for {metric} is not finite: {value}")]
    NonFiniteMetric { metric: String, value: f64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Other(String),

    #[error(transparent)]
    Core(#[from] crate::core::CoreError),

    #[error(transparent)]
    Sim(#[from] crate::simulators::SimError),
}
