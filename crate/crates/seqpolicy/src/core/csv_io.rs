use std::io::{Read, Write};

use super::data::{Dataset, DatasetSchema, StageRecord, Trajectory};
use super::CoreError;

/// Write a dataset in the flat CSV layout:
/// `unit_id, stage, state_0..state_{p−1}, action, reward, behavior_prob`.
/// An empty reward cell marks a missing reward; state cells past a stage's
/// declared dimension stay empty. The schema itself travels separately (as
/// a sidecar in the harness config).
pub fn write_dataset_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<(), CoreError> {
    let p_max = dataset.schema.max_state_dim();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["unit_id".to_string(), "stage".to_string()];
    for i in 0..p_max {
        header.push(format!("state_{i}"));
    }
    header.push("action".into());
    header.push("reward".into());
    header.push("behavior_prob".into());
    w.write_record(&header)?;

    for traj in &dataset.trajectories {
        for (t, rec) in traj.records.iter().enumerate() {
            let mut row = vec![traj.unit_id.clone(), t.to_string()];
            for i in 0..p_max {
                row.push(match rec.state.get(i) {
                    Some(v) => format!("{v}"),
                    None => String::new(),
                });
            }
            row.push(rec.action.to_string());
            row.push(match rec.reward {
                Some(y) => format!("{y}"),
                None => String::new(),
            });
            row.push(format!("{}", rec.behavior_prob));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a dataset written by [`write_dataset_csv`], validating against the
/// supplied schema. Rows must be grouped by unit with stages in order.
pub fn read_dataset_csv<R: Read>(reader: R, schema: &DatasetSchema) -> Result<Dataset, CoreError> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let p_max = headers.len().checked_sub(5).ok_or_else(|| {
        CoreError::Parse(format!("expected at least 5 columns, got {}", headers.len()))
    })?;

    let mut trajectories: Vec<Trajectory> = Vec::new();
    let mut current: Option<Trajectory> = None;

    for (line, row) in r.records().enumerate() {
        let row = row?;
        let get = |i: usize| -> Result<&str, CoreError> {
            row.get(i)
                .ok_or_else(|| CoreError::Parse(format!("row {line}: missing column {i}")))
        };
        let unit_id = get(0)?.to_string();
        let stage: usize = get(1)?
            .parse()
            .map_err(|e| CoreError::Parse(format!("row {line}: stage: {e}")))?;

        let starts_new = match &current {
            None => true,
            Some(t) => t.unit_id != unit_id,
        };
        if starts_new {
            if let Some(t) = current.take() {
                trajectories.push(t);
            }
            if stage != 0 {
                return Err(CoreError::Parse(format!(
                    "row {line}: unit {unit_id} starts at stage {stage}, expected 0"
                )));
            }
            current = Some(Trajectory::new(unit_id.clone(), Vec::new()));
        }
        let traj = current.as_mut().unwrap();
        if stage != traj.records.len() {
            return Err(CoreError::Parse(format!(
                "row {line}: unit {unit_id} has stage {stage}, expected {}",
                traj.records.len()
            )));
        }

        let state_dim = schema.stage(stage).state_dim;
        let mut state = Vec::with_capacity(state_dim);
        for i in 0..state_dim.min(p_max) {
            let cell = get(2 + i)?;
            if cell.is_empty() {
                return Err(CoreError::Parse(format!(
                    "row {line}: empty state_{i} but schema declares dimension {state_dim}"
                )));
            }
            state.push(
                cell.parse()
                    .map_err(|e| CoreError::Parse(format!("row {line}: state_{i}: {e}")))?,
            );
        }
        if state.len() != state_dim {
            return Err(CoreError::DimensionMismatch {
                what: format!("row {line}: state"),
                expected: state_dim,
                got: state.len(),
            });
        }
        let action: usize = get(2 + p_max)?
            .parse()
            .map_err(|e| CoreError::Parse(format!("row {line}: action: {e}")))?;
        let reward_cell = get(3 + p_max)?;
        let reward = if reward_cell.is_empty() {
            None
        } else {
            Some(
                reward_cell
                    .parse()
                    .map_err(|e| CoreError::Parse(format!("row {line}: reward: {e}")))?,
            )
        };
        let behavior_prob: f64 = get(4 + p_max)?
            .parse()
            .map_err(|e| CoreError::Parse(format!("row {line}: behavior_prob: {e}")))?;

        traj.records
            .push(StageRecord::new(state, action, reward, behavior_prob));
    }
    if let Some(t) = current.take() {
        trajectories.push(t);
    }
    Dataset::new(schema.clone(), trajectories)
}
