use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, MethodConfig, MethodKind, Scenario};
use super::metrics::{write_metrics_csv, MetricName, MetricsRecord};
use super::HarnessError;
use crate::bandits::{
    actor_critic_fit, ActorCriticOptions, AgentState, LinBanditState, NIGPosterior, OnlineAgent,
};
use crate::core::{Dataset, DatasetSchema, FeatureMap, PolicySpec, StageSchema, Trajectory};
use crate::dtr_direct::{bowl_fit, estimate_value_iptw, sowl_fit, OwlOptions, SowlOptions};
use crate::dtr_indirect::{fit_q_backward, greedy_policy_from_q, QFitOptions};
use crate::numerics::{stream_id_for, RngStream, SpdMatrix};
use crate::simulators::{
    simulate_mrt, simulate_smart, MrtAgent, MrtConfig, RegretRow, SmartTruth,
};

#[derive(Debug, Clone, Serialize)]
pub struct ReplicationStatus {
    pub method: String,
    pub replication: u32,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub statuses: Vec<ReplicationStatus>,
    pub out_dir: PathBuf,
}

impl ExperimentReport {
    pub fn all_ok(&self) -> bool {
        self.statuses.iter().all(|s| s.ok)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    crate_version: &'a str,
    scenario: Scenario,
    master_seed: u64,
    replications: u32,
    config_hash: String,
    methods: Vec<String>,
    statuses: &'a [ReplicationStatus],
}

struct JobOutput {
    metrics: Vec<MetricsRecord>,
    regret_rows: Vec<(String, u32, RegretRow)>,
}

/// Run every method × replication, write `metrics.csv`,
/// `regret_trace.csv` (online scenarios), and `manifest.json` under
/// `out_dir`. Replications execute in parallel (`SEQPOLICY_THREADS` caps
/// the pool) but outputs are merged in a fixed order, so a rerun with the
/// same config and seed is bit-identical. A failing replication is recorded
/// in the manifest and does not stop the others.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<ExperimentReport, HarnessError> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;

    let jobs: Vec<(usize, &MethodConfig, u32)> = cfg
        .methods
        .iter()
        .enumerate()
        .flat_map(|(mi, m)| (0..cfg.replications).map(move |r| (mi, m, r)))
        .collect();

    let pool = build_pool()?;
    let mut results: Vec<(usize, u32, Result<JobOutput, String>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(mi, method, rep)| (mi, rep, run_job(cfg, method, rep)))
            .collect()
    });
    results.sort_by_key(|&(mi, rep, _)| (mi, rep));

    let mut statuses = Vec::with_capacity(results.len());
    let mut metrics = Vec::new();
    let mut regret_rows = Vec::new();
    for (mi, rep, outcome) in results {
        let method = cfg.methods[mi].id.clone();
        match outcome {
            Ok(out) => {
                statuses.push(ReplicationStatus {
                    method,
                    replication: rep,
                    ok: true,
                    error: None,
                });
                metrics.extend(out.metrics);
                regret_rows.extend(out.regret_rows);
            }
            Err(e) => statuses.push(ReplicationStatus {
                method,
                replication: rep,
                ok: false,
                error: Some(e),
            }),
        }
    }

    let metrics_file = fs::File::create(out_dir.join("metrics.csv"))?;
    write_metrics_csv(&metrics, metrics_file)?;

    if cfg.scenario == Scenario::Mrt {
        let mut w = csv::Writer::from_writer(fs::File::create(out_dir.join("regret_trace.csv"))?);
        w.write_record([
            "method",
            "replication",
            "user",
            "day",
            "chosen_arm",
            "regret",
            "cum_regret",
        ])
        .map_err(crate::core::CoreError::from)?;
        for (method, rep, row) in &regret_rows {
            w.write_record(&[
                method.clone(),
                rep.to_string(),
                row.user.to_string(),
                row.day.to_string(),
                row.chosen_arm.to_string(),
                format!("{}", row.regret),
                format!("{}", row.cum_regret),
            ])
            .map_err(crate::core::CoreError::from)?;
        }
        w.flush()?;
    }

    let manifest = Manifest {
        crate_version: env!("CARGO_PKG_VERSION"),
        scenario: cfg.scenario,
        master_seed: cfg.master_seed,
        replications: cfg.replications,
        config_hash: config_hash_hex(cfg),
        methods: cfg.methods.iter().map(|m| m.id.clone()).collect(),
        statuses: &statuses,
    };
    fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )?;

    Ok(ExperimentReport {
        statuses,
        out_dir: out_dir.to_path_buf(),
    })
}

/// SHA-256 of the canonical config serialization, hex-encoded; recorded in
/// every manifest and estimate record so outputs are traceable to their
/// exact configuration.
pub fn config_hash_hex(cfg: &ExperimentConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(cfg.to_canonical_toml().as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn build_pool() -> Result<rayon::ThreadPool, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SEQPOLICY_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                builder = builder.num_threads(n);
            }
        }
    }
    builder
        .build()
        .map_err(|e| HarnessError::Other(format!("thread pool: {e}")))
}

fn run_job(cfg: &ExperimentConfig, method: &MethodConfig, rep: u32) -> Result<JobOutput, String> {
    match cfg.scenario {
        Scenario::Mrt => run_mrt_job(cfg, method, rep),
        Scenario::Smart => run_smart_job(cfg, method, rep),
    }
    .map_err(|e| e.to_string())
}

// ---------------------------------------------------------------- online --

fn run_mrt_job(
    cfg: &ExperimentConfig,
    method: &MethodConfig,
    rep: u32,
) -> Result<JobOutput, HarnessError> {
    let env = cfg.env.mrt.as_ref().expect("validated");
    let mut problems = Vec::new();
    let sim_cfg = env.to_sim_config(&mut problems);
    if !problems.is_empty() {
        return Err(HarnessError::Validation {
            violations: problems,
        });
    }

    if let MethodKind::ActorCritic {
        pi_min,
        alpha_cc,
        lagrange,
        critic_ridge,
    } = method.kind
    {
        return run_actor_critic_job(
            cfg,
            method,
            rep,
            &sim_cfg,
            env.n_users,
            pi_min,
            alpha_cc,
            lagrange,
            critic_ridge,
        );
    }

    let stream = RngStream::new(cfg.master_seed, stream_id_for(rep as u64, &method.id));
    let dim = sim_cfg.feature_dim();
    let kind = method.kind.clone();
    let mut factory = move |_user: usize| -> Box<dyn MrtAgent> {
        Box::new(make_online_agent(&kind, dim, sim_cfg.n_arms))
    };
    let (_dataset, trace) = simulate_mrt(&sim_cfg, &mut factory, env.n_users, &stream)?;

    let total_regret: f64 = trace.iter().map(|r| r.regret).sum();
    let optimal = trace.iter().filter(|r| r.regret == 0.0).count();
    let metrics = vec![
        MetricsRecord {
            method: method.id.clone(),
            replication: rep,
            metric: MetricName::CumRegret,
            value: total_regret,
            stage: None,
        },
        MetricsRecord {
            method: method.id.clone(),
            replication: rep,
            metric: MetricName::PctOptimalAction,
            value: optimal as f64 / trace.len() as f64,
            stage: None,
        },
    ];
    let regret_rows = trace
        .into_iter()
        .map(|row| (method.id.clone(), rep, row))
        .collect();
    Ok(JobOutput {
        metrics,
        regret_rows,
    })
}

fn make_online_agent(kind: &MethodKind, dim: usize, arms: usize) -> OnlineAgent {
    match kind {
        MethodKind::Uniform => OnlineAgent::new(AgentState::Uniform { arms }),
        MethodKind::LinUcb {
            alpha,
            lambda_ridge,
            burn_in,
        } => OnlineAgent::new(AgentState::LinUcb {
            state: LinBanditState::new(dim, *lambda_ridge).expect("validated lambda"),
            alpha: *alpha,
        })
        .with_burn_in(*burn_in),
        MethodKind::LinTs {
            nu,
            lambda_ridge,
            burn_in,
        } => OnlineAgent::new(AgentState::LinTs {
            state: LinBanditState::new(dim, *lambda_ridge).expect("validated lambda"),
            nu: *nu,
        })
        .with_burn_in(*burn_in),
        MethodKind::NigTs {
            prior_a,
            prior_b,
            prior_scale,
            burn_in,
        } => OnlineAgent::new(AgentState::NigTs {
            posterior: NIGPosterior::new(
                vec![0.0; dim],
                SpdMatrix::scaled_identity(dim, *prior_scale),
                *prior_a,
                *prior_b,
            )
            .expect("validated prior"),
        })
        .with_burn_in(*burn_in),
        offline => unreachable!("{offline:?} is not an online method"),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_actor_critic_job(
    cfg: &ExperimentConfig,
    method: &MethodConfig,
    rep: u32,
    sim_cfg: &MrtConfig,
    n_users: usize,
    pi_min: f64,
    alpha_cc: f64,
    lagrange: f64,
    critic_ridge: f64,
) -> Result<JobOutput, HarnessError> {
    if sim_cfg.habituation_coefs.iter().any(|&c| c != 0.0) {
        return Err(HarnessError::Other(
            "actor-critic assumes a stationary environment; set habituation_coefs to zero".into(),
        ));
    }
    // Collect under uniform randomization, then fit offline on the pooled
    // complete cases as single-stage data.
    let stream = RngStream::new(cfg.master_seed, stream_id_for(rep as u64, &method.id));
    let (dataset, _) =
        crate::simulators::simulate_mrt_policy(sim_cfg, &PolicySpec::uniform(sim_cfg.n_arms), n_users, &stream)?;

    let schema = DatasetSchema::fixed(vec![StageSchema {
        state_dim: sim_cfg.context_dim,
        action_arity: 2,
    }]);
    let mut rows = Vec::new();
    for traj in &dataset.trajectories {
        for (day, rec) in traj.records.iter().enumerate() {
            if rec.reward.is_some() {
                rows.push(Trajectory::new(
                    format!("{}d{day}", traj.unit_id),
                    vec![rec.clone()],
                ));
            }
        }
    }
    let flat = Dataset::new(schema, rows)?;

    let opts = ActorCriticOptions {
        pi_min,
        alpha_cc,
        lagrange,
        critic_ridge,
        ..ActorCriticOptions::default()
    };
    let fit = actor_critic_fit(
        &flat,
        &FeatureMap::InterceptState,
        &FeatureMap::InterceptState,
        &opts,
    )
    .map_err(|e| HarnessError::Other(e.to_string()))?;

    // IPTW value of the fitted stochastic policy against the uniform log.
    let mut sum_w = 0.0;
    let mut sum_wy = 0.0;
    let mut optimal = 0usize;
    for traj in &flat.trajectories {
        let rec = &traj.records[0];
        let p1 = fit.state.action_one_prob(&rec.state);
        let d = if rec.action == 1 { p1 } else { 1.0 - p1 };
        let w = d / rec.behavior_prob;
        sum_w += w;
        sum_wy += w * rec.reward.expect("complete cases only");
        let best = best_stationary_arm(sim_cfg, &rec.state);
        let decided = if p1 > 0.5 { 1 } else { 0 };
        if decided == best {
            optimal += 1;
        }
    }
    let n = flat.n_units() as f64;
    let metrics = vec![
        MetricsRecord {
            method: method.id.clone(),
            replication: rep,
            metric: MetricName::ValueEstimate,
            value: sum_wy / sum_w,
            stage: None,
        },
        MetricsRecord {
            method: method.id.clone(),
            replication: rep,
            metric: MetricName::PctOptimalAction,
            value: optimal as f64 / n,
            stage: None,
        },
    ];
    Ok(JobOutput {
        metrics,
        regret_rows: Vec::new(),
    })
}

fn best_stationary_arm(cfg: &MrtConfig, x: &[f64]) -> usize {
    let means: Vec<f64> = (0..cfg.n_arms).map(|a| cfg.true_mean(x, a, 0.0)).collect();
    crate::core::argmax_tie_low(&means)
}

// --------------------------------------------------------------- offline --

fn run_smart_job(
    cfg: &ExperimentConfig,
    method: &MethodConfig,
    rep: u32,
) -> Result<JobOutput, HarnessError> {
    let env = cfg.env.smart.as_ref().expect("validated");
    let mut problems = Vec::new();
    let sim_cfg = env
        .to_sim_config(&mut problems)
        .ok_or(HarnessError::Validation {
            violations: problems.clone(),
        })?;
    if !problems.is_empty() {
        return Err(HarnessError::Validation {
            violations: problems,
        });
    }

    // All methods in a replication analyze the same simulated trial; the
    // test draw is a fresh sample for regime-agreement scoring.
    let train_stream = RngStream::new(cfg.master_seed, stream_id_for(rep as u64, "smart-train"));
    let test_stream = RngStream::new(cfg.master_seed, stream_id_for(rep as u64, "smart-test"));
    let (train, truth) = simulate_smart(&sim_cfg, env.n, &train_stream)?;
    let (test, _) = simulate_smart(&sim_cfg, env.n, &test_stream)?;

    let policy = fit_configured_policy(method, &train).map_err(HarnessError::Other)?;

    let mut metrics = Vec::new();
    let value = estimate_value_iptw(&train, &policy)
        .map_err(|e| HarnessError::Other(e.to_string()))?;
    metrics.push(MetricsRecord {
        method: method.id.clone(),
        replication: rep,
        metric: MetricName::ValueEstimate,
        value: value.point,
        stage: None,
    });

    let (overall, per_stage) = regime_agreement(&policy, &test, &truth)?;
    metrics.push(MetricsRecord {
        method: method.id.clone(),
        replication: rep,
        metric: MetricName::PctOptimalAction,
        value: overall,
        stage: None,
    });
    for (t, v) in per_stage.iter().enumerate() {
        metrics.push(MetricsRecord {
            method: method.id.clone(),
            replication: rep,
            metric: MetricName::PctOptimalAction,
            value: *v,
            stage: Some(t),
        });
    }

    if let MethodKind::QLearning {
        ridge_lambda,
        gamma,
    } = method.kind
    {
        let model = fit_q_backward(
            &train,
            &[FeatureMap::InterceptState, FeatureMap::InterceptState],
            &QFitOptions {
                ridge_lambda,
                gamma,
            },
        )
        .map_err(|e| HarnessError::Other(e.to_string()))?;
        let truth2: Vec<f64> = truth
            .stage2_blocked_coefs(true)
            .into_iter()
            .flatten()
            .collect();
        // The fitted stage-2 model pools both responder branches; compare
        // against the responder branch only when the branches coincide.
        if truth.stage2_blocked_coefs(true) == truth.stage2_blocked_coefs(false) {
            let err = max_abs_diff(&model.stages[1].theta, &truth2);
            metrics.push(MetricsRecord {
                method: method.id.clone(),
                replication: rep,
                metric: MetricName::CoefError,
                value: err,
                stage: Some(1),
            });
        }
        if let Some(blocks) = truth.stage1_q_blocked_coefs() {
            let truth1: Vec<f64> = blocks.into_iter().flatten().collect();
            let err = max_abs_diff(&model.stages[0].theta, &truth1);
            metrics.push(MetricsRecord {
                method: method.id.clone(),
                replication: rep,
                metric: MetricName::CoefError,
                value: err,
                stage: Some(0),
            });
        }
    }

    Ok(JobOutput {
        metrics,
        regret_rows: Vec::new(),
    })
}

/// Fit the method's regime on a training set. Shared with the `fit` CLI
/// verb.
pub fn fit_configured_policy(
    method: &MethodConfig,
    train: &Dataset,
) -> Result<PolicySpec, String> {
    match &method.kind {
        MethodKind::QLearning {
            ridge_lambda,
            gamma,
        } => {
            let maps = vec![FeatureMap::InterceptState; train.schema.n_stages().unwrap_or(1)];
            let model = fit_q_backward(
                train,
                &maps,
                &QFitOptions {
                    ridge_lambda: *ridge_lambda,
                    gamma: *gamma,
                },
            )
            .map_err(|e| e.to_string())?;
            Ok(greedy_policy_from_q(&model))
        }
        MethodKind::Bowl { lambda } => {
            let t = train.schema.n_stages().unwrap_or(1);
            let maps = vec![FeatureMap::State; t];
            let fit = bowl_fit(
                train,
                &maps,
                &vec![*lambda; t],
                &OwlOptions {
                    lambda: *lambda,
                    ..OwlOptions::default()
                },
            )
            .map_err(|e| e.to_string())?;
            Ok(PolicySpec::new(
                fit.stages.iter().map(|d| d.to_stage_rule()).collect(),
            ))
        }
        MethodKind::Sowl { lambda } => {
            let fit = sowl_fit(
                train,
                &[FeatureMap::State, FeatureMap::State],
                &SowlOptions {
                    lambda: *lambda,
                    ..SowlOptions::default()
                },
            )
            .map_err(|e| e.to_string())?;
            Ok(PolicySpec::new(vec![
                fit.stage0.to_stage_rule(),
                fit.stage1.to_stage_rule(),
            ]))
        }
        other => Err(format!("{other:?} does not fit an offline regime")),
    }
}

/// Fraction of test decisions agreeing with the true optimal regime,
/// overall and per stage.
fn regime_agreement(
    policy: &PolicySpec,
    test: &Dataset,
    truth: &SmartTruth,
) -> Result<(f64, Vec<f64>), HarnessError> {
    let mut agree = [0usize; 2];
    let n = test.n_units();
    for traj in &test.trajectories {
        let h0 = traj.history(0);
        let d0 = policy
            .decide(0, &h0)
            .map_err(|e| HarnessError::Other(e.to_string()))?;
        if d0 == truth.optimal_stage1(&traj.records[0].state) {
            agree[0] += 1;
        }
        let h1 = traj.history(1);
        let d1 = policy
            .decide(1, &h1)
            .map_err(|e| HarnessError::Other(e.to_string()))?;
        let state2 = &traj.records[1].state;
        let responder = *state2.last().unwrap() == 1.0;
        if d1 == truth.optimal_stage2(state2, responder) {
            agree[1] += 1;
        }
    }
    let per_stage: Vec<f64> = agree.iter().map(|&a| a as f64 / n as f64).collect();
    let overall = (agree[0] + agree[1]) as f64 / (2 * n) as f64;
    Ok((overall, per_stage))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        .max(if a.len() != b.len() { f64::INFINITY } else { 0.0 })
}
