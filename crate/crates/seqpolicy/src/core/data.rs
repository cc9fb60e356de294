use serde::{Deserialize, Serialize};

use super::features::History;
use super::CoreError;

/// One decision point: the context observed before acting, the action taken,
/// the proximal reward that followed (or a missing-data marker), and the
/// probability the generating policy assigned to that action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub state: Vec<f64>,
    pub action: usize,
    /// `None` marks a missing reward; consumers must impute or reject.
    pub reward: Option<f64>,
    pub behavior_prob: f64,
}

impl StageRecord {
    pub fn new(state: Vec<f64>, action: usize, reward: Option<f64>, behavior_prob: f64) -> Self {
        Self {
            state,
            action,
            reward,
            behavior_prob,
        }
    }
}

/// Ordered records for one unit (patient, user).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub unit_id: String,
    pub records: Vec<StageRecord>,
}

impl Trajectory {
    pub fn new(unit_id: impl Into<String>, records: Vec<StageRecord>) -> Self {
        Self {
            unit_id: unit_id.into(),
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Everything observed before the stage-`t` action.
    pub fn history(&self, t: usize) -> History<'_> {
        History {
            stage: t,
            past: &self.records[..t],
            state: &self.records[t].state,
        }
    }

    /// Total undiscounted reward; errors on any missing reward.
    pub fn total_reward(&self) -> Result<f64, CoreError> {
        discounted_return(self, 0, 1.0)
    }
}

/// Per-stage shape of the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSchema {
    pub state_dim: usize,
    pub action_arity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HorizonKind {
    /// All trajectories share length T.
    Fixed(usize),
    /// Variable-length trajectories from a time-homogeneous process.
    Indefinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub horizon: HorizonKind,
    stages: Vec<StageSchema>,
}

impl DatasetSchema {
    pub fn fixed(stages: Vec<StageSchema>) -> Self {
        let t = stages.len();
        Self {
            horizon: HorizonKind::Fixed(t),
            stages,
        }
    }

    /// One stage schema applied at every step.
    pub fn indefinite(stage: StageSchema) -> Self {
        Self {
            horizon: HorizonKind::Indefinite,
            stages: vec![stage],
        }
    }

    pub fn stage(&self, t: usize) -> &StageSchema {
        match self.horizon {
            HorizonKind::Fixed(_) => &self.stages[t],
            HorizonKind::Indefinite => &self.stages[0],
        }
    }

    pub fn n_stages(&self) -> Option<usize> {
        match self.horizon {
            HorizonKind::Fixed(t) => Some(t),
            HorizonKind::Indefinite => None,
        }
    }

    pub fn max_state_dim(&self) -> usize {
        self.stages.iter().map(|s| s.state_dim).max().unwrap_or(0)
    }
}

/// Immutable after construction; all operations downstream are pure, so
/// datasets are safe to share across workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: DatasetSchema,
    pub trajectories: Vec<Trajectory>,
}

impl Dataset {
    pub fn new(schema: DatasetSchema, trajectories: Vec<Trajectory>) -> Result<Self, CoreError> {
        let ds = Self {
            schema,
            trajectories,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n_units(&self) -> usize {
        self.trajectories.len()
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.trajectories.is_empty() {
            return Err(CoreError::EmptyDataset);
        }
        for traj in &self.trajectories {
            if traj.is_empty() {
                return Err(CoreError::HorizonMismatch {
                    unit: traj.unit_id.clone(),
                    expected: 1,
                    got: 0,
                });
            }
            if let HorizonKind::Fixed(t) = self.schema.horizon {
                if traj.len() != t {
                    return Err(CoreError::HorizonMismatch {
                        unit: traj.unit_id.clone(),
                        expected: t,
                        got: traj.len(),
                    });
                }
            }
            for (t, rec) in traj.records.iter().enumerate() {
                let stage = self.schema.stage(t);
                if rec.state.len() != stage.state_dim {
                    return Err(CoreError::DimensionMismatch {
                        what: format!("state of unit {} at stage {t}", traj.unit_id),
                        expected: stage.state_dim,
                        got: rec.state.len(),
                    });
                }
                if rec.action >= stage.action_arity {
                    return Err(CoreError::InvalidAction {
                        action: rec.action,
                        arity: stage.action_arity,
                        stage: t,
                    });
                }
                if !(rec.behavior_prob > 0.0 && rec.behavior_prob <= 1.0) {
                    return Err(CoreError::InvalidBehaviorProb {
                        value: rec.behavior_prob,
                    });
                }
                if let Some(y) = rec.reward {
                    if !y.is_finite() {
                        return Err(CoreError::Parse(format!(
                            "non-finite reward {y} at stage {t} of unit {}",
                            traj.unit_id
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Discounted return from stage `t` onward: Σ_{τ≥t} γ^{τ−t} y_{τ+1}, with
/// the convention 0⁰ = 1 so that γ = 0 returns the immediate reward alone.
pub fn discounted_return(traj: &Trajectory, t: usize, gamma: f64) -> Result<f64, CoreError> {
    if t >= traj.len() {
        return Err(CoreError::StageOutOfRange {
            stage: t,
            len: traj.len(),
        });
    }
    let mut total = 0.0;
    let mut weight = 1.0;
    for (tau, rec) in traj.records.iter().enumerate().skip(t) {
        let y = rec.reward.ok_or_else(|| CoreError::MissingReward {
            unit: traj.unit_id.clone(),
            stage: tau,
        })?;
        total += weight * y;
        weight *= gamma;
        if weight == 0.0 {
            break;
        }
    }
    Ok(total)
}
