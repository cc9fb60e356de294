use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::simulators::{
    LinearOutcomeModel, MrtConfig, Randomization, SmartConfig, SmartStage,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Smart,
    Mrt,
}

/// One SMART stage as it appears in config files: exactly one of
/// `rand_probs` (randomized) or `confounded_weights` (state-dependent
/// soft-max, the observational mode) must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rand_probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confounded_weights: Option<Vec<Vec<f64>>>,
    pub intercept: f64,
    pub state_coefs: Vec<f64>,
    pub arm_effects: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interactions: Vec<Vec<f64>>,
    pub noise_sd: f64,
}

impl StageBlock {
    fn to_stage(&self, label: &str, problems: &mut Vec<String>) -> Option<SmartStage> {
        let randomization = match (&self.rand_probs, &self.confounded_weights) {
            (Some(p), None) => Randomization::Fixed(p.clone()),
            (None, Some(w)) => Randomization::StateSoftmax(w.clone()),
            (Some(_), Some(_)) => {
                problems.push(format!(
                    "{label}: give either rand_probs or confounded_weights, not both"
                ));
                return None;
            }
            (None, None) => {
                problems.push(format!(
                    "{label}: one of rand_probs or confounded_weights is required"
                ));
                return None;
            }
        };
        Some(SmartStage {
            randomization,
            outcome: LinearOutcomeModel {
                intercept: self.intercept,
                state_coefs: self.state_coefs.clone(),
                arm_effects: self.arm_effects.clone(),
                interactions: self.interactions.clone(),
            },
            noise_sd: self.noise_sd,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmartEnvConfig {
    pub state_dim: usize,
    /// Trajectories per replication.
    pub n: usize,
    pub responder_threshold: f64,
    #[serde(default = "default_true")]
    pub rerandomize_responders: bool,
    pub stage1: StageBlock,
    pub stage2_responders: StageBlock,
    pub stage2_nonresponders: StageBlock,
}

impl SmartEnvConfig {
    pub fn to_sim_config(&self, problems: &mut Vec<String>) -> Option<SmartConfig> {
        let stage1 = self.stage1.to_stage("env.smart.stage1", problems);
        let resp = self
            .stage2_responders
            .to_stage("env.smart.stage2_responders", problems);
        let nonresp = self
            .stage2_nonresponders
            .to_stage("env.smart.stage2_nonresponders", problems);
        let cfg = SmartConfig {
            state_dim: self.state_dim,
            stage1: stage1?,
            responder_threshold: self.responder_threshold,
            stage2_responders: resp?,
            stage2_nonresponders: nonresp?,
            rerandomize_responders: self.rerandomize_responders,
        };
        if let Err(e) = cfg.validate() {
            problems.push(format!("env.smart: {e}"));
        }
        if self.n == 0 {
            problems.push("env.smart.n must be at least 1".into());
        }
        Some(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrtEnvConfig {
    pub n_arms: usize,
    pub horizon: usize,
    pub z_max: u32,
    pub context_dim: usize,
    pub arm_effects: Vec<f64>,
    pub context_coefs: Vec<f64>,
    pub habituation_coefs: Vec<f64>,
    pub noise_sd: f64,
    #[serde(default)]
    pub missing_prob: f64,
    #[serde(default)]
    pub burn_in_days: usize,
    #[serde(default)]
    pub zero_reward_missing: bool,
    pub n_users: usize,
}

impl MrtEnvConfig {
    pub fn to_sim_config(&self, problems: &mut Vec<String>) -> MrtConfig {
        let cfg = MrtConfig {
            n_arms: self.n_arms,
            horizon: self.horizon,
            z_max: self.z_max,
            context_dim: self.context_dim,
            arm_effects: self.arm_effects.clone(),
            context_coefs: self.context_coefs.clone(),
            habituation_coefs: self.habituation_coefs.clone(),
            noise_sd: self.noise_sd,
            missing_prob: self.missing_prob,
            burn_in_days: self.burn_in_days,
            zero_reward_missing: self.zero_reward_missing,
        };
        if let Err(e) = cfg.validate() {
            problems.push(format!("env.mrt: {e}"));
        }
        if self.n_users == 0 {
            problems.push("env.mrt.n_users must be at least 1".into());
        }
        cfg
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smart: Option<SmartEnvConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mrt: Option<MrtEnvConfig>,
}

fn default_nu() -> f64 {
    1.0
}
fn default_lambda_ridge() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    1.0
}
fn default_q_ridge() -> f64 {
    1e-6
}
fn default_owl_lambda() -> f64 {
    0.01
}
fn default_prior_ab() -> f64 {
    1.0
}
fn default_pi_min() -> f64 {
    0.1
}
fn default_alpha_cc() -> f64 {
    0.1
}
fn default_lagrange() -> f64 {
    0.1
}
fn default_true() -> bool {
    true
}

/// Method hyperparameters; every field defaults so a minimal block is just
/// `id` and `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodKind {
    /// Uniform-random arm assignment (the nonoptimized comparison group).
    Uniform,
    LinUcb {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_lambda_ridge")]
        lambda_ridge: f64,
        #[serde(default)]
        burn_in: usize,
    },
    LinTs {
        #[serde(default = "default_nu")]
        nu: f64,
        #[serde(default = "default_lambda_ridge")]
        lambda_ridge: f64,
        #[serde(default)]
        burn_in: usize,
    },
    NigTs {
        #[serde(default = "default_prior_ab")]
        prior_a: f64,
        #[serde(default = "default_prior_ab")]
        prior_b: f64,
        #[serde(default = "default_lambda_ridge")]
        prior_scale: f64,
        #[serde(default)]
        burn_in: usize,
    },
    QLearning {
        #[serde(default = "default_q_ridge")]
        ridge_lambda: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
    Bowl {
        #[serde(default = "default_owl_lambda")]
        lambda: f64,
    },
    Sowl {
        #[serde(default = "default_owl_lambda")]
        lambda: f64,
    },
    ActorCritic {
        #[serde(default = "default_pi_min")]
        pi_min: f64,
        #[serde(default = "default_alpha_cc")]
        alpha_cc: f64,
        #[serde(default = "default_lagrange")]
        lagrange: f64,
        #[serde(default = "default_lambda_ridge")]
        critic_ridge: f64,
    },
}

impl MethodKind {
    pub fn is_online(&self) -> bool {
        matches!(
            self,
            MethodKind::Uniform
                | MethodKind::LinUcb { .. }
                | MethodKind::LinTs { .. }
                | MethodKind::NigTs { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub id: String,
    #[serde(flatten)]
    pub kind: MethodKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub replications: u32,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub env: EnvConfig,
    #[serde(rename = "method")]
    pub methods: Vec<MethodConfig>,
}

impl ExperimentConfig {
    /// Every violation at once, not first-only.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut problems = Vec::new();
        if self.replications == 0 {
            problems.push("replications must be at least 1".to_string());
        }
        if self.methods.is_empty() {
            problems.push("at least one [[method]] block is required".to_string());
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.methods {
            if m.id.is_empty() {
                problems.push("method id must be nonempty".into());
            }
            if !seen.insert(m.id.clone()) {
                problems.push(format!("duplicate method id {:?}", m.id));
            }
        }
        match self.scenario {
            Scenario::Smart => {
                match &self.env.smart {
                    Some(smart) => {
                        smart.to_sim_config(&mut problems);
                        let binary = smart.stage1.arm_effects.len() == 2
                            && smart.stage2_responders.arm_effects.len() == 2;
                        for m in &self.methods {
                            match &m.kind {
                                MethodKind::QLearning { .. } => {}
                                MethodKind::Bowl { .. } | MethodKind::Sowl { .. } => {
                                    if !binary {
                                        problems.push(format!(
                                            "method {:?} needs two arms per stage",
                                            m.id
                                        ));
                                    }
                                }
                                other => problems.push(format!(
                                    "method {:?} ({other:?}) does not apply to the smart scenario",
                                    m.id
                                )),
                            }
                        }
                    }
                    None => problems.push("scenario smart requires an [env.smart] block".into()),
                }
                if self.env.mrt.is_some() {
                    problems.push("scenario smart must not carry an [env.mrt] block".into());
                }
            }
            Scenario::Mrt => {
                match &self.env.mrt {
                    Some(mrt) => {
                        mrt.to_sim_config(&mut problems);
                        for m in &self.methods {
                            match &m.kind {
                                k if k.is_online() => {}
                                MethodKind::ActorCritic { .. } => {
                                    if mrt.n_arms != 2 {
                                        problems.push(format!(
                                            "method {:?} needs a binary-arm environment",
                                            m.id
                                        ));
                                    }
                                }
                                other => problems.push(format!(
                                    "method {:?} ({other:?}) does not apply to the mrt scenario",
                                    m.id
                                )),
                            }
                        }
                    }
                    None => problems.push("scenario mrt requires an [env.mrt] block".into()),
                }
                if self.env.smart.is_some() {
                    problems.push("scenario mrt must not carry an [env.smart] block".into());
                }
            }
        }
        for m in &self.methods {
            validate_method(m, &mut problems);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Validation {
                violations: problems,
            })
        }
    }

    /// The one canonical serialization; `load(save(cfg)) == cfg`.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn validate_method(m: &MethodConfig, problems: &mut Vec<String>) {
    let id = &m.id;
    match &m.kind {
        MethodKind::Uniform => {}
        MethodKind::LinUcb {
            alpha,
            lambda_ridge,
            ..
        } => {
            if !(*alpha >= 0.0) {
                problems.push(format!("method {id:?}: alpha must be nonnegative"));
            }
            if !(*lambda_ridge > 0.0) {
                problems.push(format!("method {id:?}: lambda_ridge must be positive"));
            }
        }
        MethodKind::LinTs {
            nu, lambda_ridge, ..
        } => {
            if !(*nu >= 0.0) {
                problems.push(format!("method {id:?}: nu must be nonnegative"));
            }
            if !(*lambda_ridge > 0.0) {
                problems.push(format!("method {id:?}: lambda_ridge must be positive"));
            }
        }
        MethodKind::NigTs {
            prior_a,
            prior_b,
            prior_scale,
            ..
        } => {
            if !(*prior_a > 0.0 && *prior_b > 0.0) {
                problems.push(format!("method {id:?}: prior_a and prior_b must be positive"));
            }
            if !(*prior_scale > 0.0) {
                problems.push(format!("method {id:?}: prior_scale must be positive"));
            }
        }
        MethodKind::QLearning {
            ridge_lambda,
            gamma,
        } => {
            if !(*ridge_lambda >= 0.0) {
                problems.push(format!("method {id:?}: ridge_lambda must be nonnegative"));
            }
            if !(0.0..=1.0).contains(gamma) {
                problems.push(format!("method {id:?}: gamma must lie in [0, 1]"));
            }
        }
        MethodKind::Bowl { lambda } | MethodKind::Sowl { lambda } => {
            if !(*lambda > 0.0) {
                problems.push(format!("method {id:?}: lambda must be positive"));
            }
        }
        MethodKind::ActorCritic {
            pi_min,
            alpha_cc,
            lagrange,
            critic_ridge,
        } => {
            if !(*pi_min > 0.0 && *pi_min < 0.5) {
                problems.push(format!("method {id:?}: pi_min must lie in (0, 0.5)"));
            }
            if !(*alpha_cc > 0.0 && *alpha_cc < 1.0) {
                problems.push(format!("method {id:?}: alpha_cc must lie in (0, 1)"));
            }
            if !(*lagrange >= 0.0) {
                problems.push(format!("method {id:?}: lagrange must be nonnegative"));
            }
            if !(*critic_ridge > 0.0) {
                problems.push(format!("method {id:?}: critic_ridge must be positive"));
            }
        }
    }
}

/// Parse and validate a config file. Parse failures carry line and column;
/// validation failures list every violation at once.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    load_config_str(&text)
}

pub fn load_config_str(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|span| offset_to_line_col(text, span.start))
            .unwrap_or((0, 0));
        HarnessError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn save_config(cfg: &ExperimentConfig, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, cfg.to_canonical_toml())?;
    Ok(())
}

fn offset_to_line_col(text: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for (i, ch) in text.char_indices() {
        if i >= offset {
            break;
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}
