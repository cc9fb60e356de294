use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::QLearnError;
use crate::core::argmax_tie_low;

/// Lookup-table Q-function over discretized history keys, with per-cell
/// visit counts for 1/n learning-rate schedules.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    values: BTreeMap<(u64, usize), f64>,
    visits: BTreeMap<(u64, usize), u64>,
}

/// One observed transition for the tabular update. A terminal transition
/// carries an empty `next_actions` set, which zeroes the max term.
#[derive(Debug, Clone)]
pub struct Transition {
    pub key: u64,
    pub action: usize,
    pub reward: f64,
    pub next_key: u64,
    pub next_actions: Vec<usize>,
}

impl QTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, key: u64, action: usize) -> f64 {
        self.values.get(&(key, action)).copied().unwrap_or(0.0)
    }

    pub fn visits(&self, key: u64, action: usize) -> u64 {
        self.visits.get(&(key, action)).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Greedy action among `actions` at `key`, lowest index on ties.
    pub fn greedy(&self, key: u64, actions: &[usize]) -> Option<usize> {
        if actions.is_empty() {
            return None;
        }
        let vals: Vec<f64> = actions.iter().map(|&a| self.value(key, a)).collect();
        Some(actions[argmax_tie_low(&vals)])
    }
}

/// One step of the tabular rule:
/// `Q(h,a) ← Q(h,a) + α · [y + γ·max_{a'} Q(h',a') − Q(h,a)]`.
///
/// α = 0 leaves the table untouched; α = 1 overwrites with the bootstrapped
/// target. Terminal transitions (empty next-action set) use a zero max term.
pub fn tabular_q_update(
    q: &QTable,
    transition: &Transition,
    alpha: f64,
    gamma: f64,
) -> Result<QTable, QLearnError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(QLearnError::InvalidLearningRate(alpha));
    }
    let mut next = q.clone();
    let max_next = if transition.next_actions.is_empty() {
        0.0
    } else {
        transition
            .next_actions
            .iter()
            .map(|&a| q.value(transition.next_key, a))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let cell = (transition.key, transition.action);
    let old = q.value(transition.key, transition.action);
    let target = transition.reward + gamma * max_next;
    next.values.insert(cell, old + alpha * (target - old));
    *next.visits.entry(cell).or_insert(0) += 1;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transition(reward: f64, next_actions: Vec<usize>) -> Transition {
        Transition {
            key: 0,
            action: 0,
            reward,
            next_key: 1,
            next_actions,
        }
    }

    #[test]
    fn zero_alpha_learns_nothing() {
        let q = QTable::new();
        let t = transition(5.0, vec![]);
        let next = tabular_q_update(&q, &t, 0.0, 1.0).unwrap();
        assert_eq!(next.value(0, 0), 0.0);
        assert_eq!(next.visits(0, 0), 1);
    }

    #[test]
    fn full_overwrite_at_terminal() {
        let q = QTable::new();
        let t = transition(2.0, vec![]);
        let next = tabular_q_update(&q, &t, 1.0, 1.0).unwrap();
        assert_eq!(next.value(0, 0), 2.0);
    }

    #[test]
    fn half_step_hand_evaluation() {
        // Q=1, y=1, max next = 2, α=0.5, γ=1 → 1 + 0.5·(1+2−1) = 2.
        let mut q = QTable::new();
        q.values.insert((0, 0), 1.0);
        q.values.insert((1, 0), 2.0);
        let t = transition(1.0, vec![0]);
        let next = tabular_q_update(&q, &t, 0.5, 1.0).unwrap();
        assert_eq!(next.value(0, 0), 2.0);
    }

    #[test]
    fn invalid_alpha_rejected() {
        let q = QTable::new();
        let t = transition(0.0, vec![]);
        assert!(tabular_q_update(&q, &t, 1.5, 1.0).is_err());
        assert!(tabular_q_update(&q, &t, -0.1, 1.0).is_err());
    }

    #[test]
    fn greedy_breaks_ties_low() {
        let mut q = QTable::new();
        q.values.insert((0, 0), 1.0);
        q.values.insert((0, 1), 1.0);
        assert_eq!(q.greedy(0, &[0, 1]), Some(0));
        q.values.insert((0, 1), 2.0);
        assert_eq!(q.greedy(0, &[0, 1]), Some(1));
    }
}
