use crate::core::{Dataset, Trajectory};

/// Last observation carried forward: each missing reward takes the most
/// recent observed value. A leading gap has nothing to carry, so it fills
/// with 0 — the documented convention.
pub fn apply_locf(traj: &Trajectory) -> Trajectory {
    let mut out = traj.clone();
    let mut last = 0.0;
    for rec in &mut out.records {
        match rec.reward {
            Some(y) => last = y,
            None => rec.reward = Some(last),
        }
    }
    out
}

pub fn apply_locf_dataset(dataset: &Dataset) -> Dataset {
    Dataset {
        schema: dataset.schema.clone(),
        trajectories: dataset.trajectories.iter().map(apply_locf).collect(),
    }
}
