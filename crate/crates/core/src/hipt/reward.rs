use serde::{Deserialize, Serialize};

use super::HiptError;

/// `Σ_z π_high(z) · π_low(·|z)`.
pub fn marginal_low_policy<D: AsRef<[f64]>>(high: &[f64], low_per_z: &[D]) -> Vec<f64> {
    assert_eq!(high.len(), low_per_z.len(), "one conditioned policy per prior");
    let width = low_per_z[0].as_ref().len();
    let mut out = vec![0.0; width];
    for (w, row) in high.iter().zip(low_per_z) {
        for (o, p) in out.iter_mut().zip(row.as_ref()) {
            *o += w * p;
        }
    }
    out
}

/// KL(π_low(·|z) ‖ marginal) in nats for the active prior `z`.
///
/// The marginal dominates `π_high(z)·π_low(·|z)`, so the divergence is
/// bounded by `−ln π_high(z)`; the floor only guards underflow.
pub fn influence_reward<D: AsRef<[f64]>>(high: &[f64], low_per_z: &[D], z: usize) -> f64 {
    let marginal = marginal_low_policy(high, low_per_z);
    let own = low_per_z[z].as_ref();
    let floor = |x: f64| x.max(f64::MIN_POSITIVE);
    own.iter()
        .zip(&marginal)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &m)| p * (p.ln() - floor(m.max(high[z] * p)).ln()))
        .sum::<f64>()
        .max(0.0)
}

/// Segment reward for the high level: the mean over the `p` executed
/// steps of `α·r + κ·r_inf`.
pub fn high_level_reward(env: &[f64], influence: &[f64], alpha: f64, kappa: f64, p: usize) -> Result<f64, HiptError> {
    if p == 0 || env.len() != p || influence.len() != p {
        return Err(HiptError::SegmentLength { p, env: env.len(), influence: influence.len() });
    }
    let total: f64 = env.iter().zip(influence).map(|(r, i)| alpha * r + kappa * i).sum();
    Ok(total / p as f64)
}

/// Linear anneal of the influence coefficient κ over environment steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfluenceSchedule {
    pub kappa_start: f64,
    pub kappa_end: f64,
    /// Weight α of the environment reward.
    pub alpha: f64,
    pub anneal_steps: u64,
}

impl Default for InfluenceSchedule {
    fn default() -> Self {
        Self { kappa_start: 1000.0, kappa_end: 1.0, alpha: 1.0, anneal_steps: 1_000_000_000 }
    }
}

impl InfluenceSchedule {
    pub fn validate(&self) -> Result<(), HiptError> {
        if self.kappa_start >= 0.0 && self.kappa_end >= 0.0 && self.alpha.is_finite() {
            Ok(())
        } else {
            Err(HiptError::InvalidConfig(format!("{self:?}")))
        }
    }

    pub fn kappa(&self, env_steps: u64) -> f64 {
        anneal(self, env_steps)
    }
}

pub fn anneal(schedule: &InfluenceSchedule, env_steps: u64) -> f64 {
    if schedule.anneal_steps == 0 || env_steps >= schedule.anneal_steps {
        return schedule.kappa_end;
    }
    let f = env_steps as f64 / schedule.anneal_steps as f64;
    schedule.kappa_start + (schedule.kappa_end - schedule.kappa_start) * f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_halves_give_ln2() {
        let v = influence_reward(&[0.5, 0.5], &[vec![1.0, 0.0], vec![0.0, 1.0]], 0);
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn point_mass_and_identical_give_zero() {
        let low = [vec![0.3, 0.7], vec![0.9, 0.1]];
        assert_eq!(influence_reward(&[1.0, 0.0], &low, 0), 0.0);
        let same = [vec![0.3, 0.7], vec![0.3, 0.7]];
        assert!(influence_reward(&[0.4, 0.6], &same, 1).abs() < 1e-15);
    }

    #[test]
    fn segment_reward_example() {
        assert!((high_level_reward(&[20.0, 0.0], &[0.5, 0.5], 1.0, 1.0, 2).unwrap() - 10.5).abs() < 1e-12);
        assert!(high_level_reward(&[1.0], &[1.0, 2.0], 1.0, 1.0, 1).is_err());
        assert!(high_level_reward(&[], &[], 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn anneal_endpoints() {
        let s = InfluenceSchedule { anneal_steps: 1000, ..Default::default() };
        assert_eq!(anneal(&s, 0), 1000.0);
        assert_eq!(anneal(&s, 500), 500.5);
        assert_eq!(anneal(&s, 1000), 1.0);
        assert_eq!(anneal(&s, 5000), 1.0);
    }
}
