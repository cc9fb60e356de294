use serde::{Deserialize, Serialize};

use super::SimError;

/// Per-arm days-since-last-played counters, capped at `z_max`.
///
/// `z[j]` counts days since arm `j` was last chosen; the derived habituation
/// feature is `z̄[j] = z_max − z[j]`, so an arm played yesterday carries the
/// highest habituation and one rested for `z_max` days carries none. All
/// arms start fully rested (z = z_max): no arm begins habituated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryContext {
    z: Vec<u32>,
    z_max: u32,
}

impl RecoveryContext {
    pub fn fully_rested(arms: usize, z_max: u32) -> Self {
        Self {
            z: vec![z_max; arms],
            z_max,
        }
    }

    pub fn from_counts(z: Vec<u32>, z_max: u32) -> Result<Self, SimError> {
        if z.iter().any(|&v| v > z_max) {
            return Err(SimError::InvalidConfig(format!(
                "recovery counts must not exceed z_max = {z_max}"
            )));
        }
        Ok(Self { z, z_max })
    }

    pub fn n_arms(&self) -> usize {
        self.z.len()
    }

    pub fn z_max(&self) -> u32 {
        self.z_max
    }

    pub fn counts(&self) -> &[u32] {
        &self.z
    }

    /// Habituation level of one arm: z_max − z.
    pub fn z_bar(&self, arm: usize) -> f64 {
        (self.z_max - self.z[arm]) as f64
    }

    pub fn z_bars(&self) -> Vec<f64> {
        (0..self.z.len()).map(|a| self.z_bar(a)).collect()
    }

    /// Context after playing `action`: the chosen arm resets to 0, every
    /// other arm advances by one day, saturating at z_max.
    pub fn after_action(&self, action: usize) -> Result<RecoveryContext, SimError> {
        if action >= self.z.len() {
            return Err(SimError::ArmOutOfRange {
                arm: action,
                arms: self.z.len(),
            });
        }
        let z = self
            .z
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if j == action {
                    0
                } else {
                    (v + 1).min(self.z_max)
                }
            })
            .collect();
        Ok(RecoveryContext {
            z,
            z_max: self.z_max,
        })
    }
}

/// Free-function form of [`RecoveryContext::after_action`].
pub fn update_recovery_context(
    ctx: &RecoveryContext,
    action: usize,
) -> Result<RecoveryContext, SimError> {
    ctx.after_action(action)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chosen_arm_resets_to_zero() {
        let ctx = RecoveryContext::from_counts(vec![3, 5], 7).unwrap();
        let next = update_recovery_context(&ctx, 0).unwrap();
        assert_eq!(next.counts(), &[0, 6]);
    }

    #[test]
    fn unchosen_arm_saturates_at_z_max() {
        let ctx = RecoveryContext::from_counts(vec![3, 7], 7).unwrap();
        let next = update_recovery_context(&ctx, 0).unwrap();
        assert_eq!(next.counts(), &[0, 7]);
    }

    #[test]
    fn increment_unchosen_case() {
        let ctx = RecoveryContext::from_counts(vec![0, 0], 7).unwrap();
        let next = update_recovery_context(&ctx, 1).unwrap();
        assert_eq!(next.counts(), &[1, 0]);
    }

    #[test]
    fn out_of_range_action_rejected() {
        let ctx = RecoveryContext::fully_rested(2, 7);
        assert!(matches!(
            update_recovery_context(&ctx, 2),
            Err(SimError::ArmOutOfRange { arm: 2, arms: 2 })
        ));
    }

    #[test]
    fn exactly_one_zero_entry_after_any_step() {
        let mut ctx = RecoveryContext::fully_rested(3, 4);
        for step in 0..50usize {
            let action = step % 3;
            ctx = ctx.after_action(action).unwrap();
            let zeros = ctx.counts().iter().filter(|&&v| v == 0).count();
            assert_eq!(zeros, 1, "step {step}: {:?}", ctx.counts());
            assert!(ctx.counts().iter().all(|&v| v <= 4));
        }
    }

    #[test]
    fn z_bar_is_complement_of_count() {
        let ctx = RecoveryContext::from_counts(vec![0, 3, 7], 7).unwrap();
        assert_eq!(ctx.z_bars(), vec![7.0, 4.0, 0.0]);
    }
}
