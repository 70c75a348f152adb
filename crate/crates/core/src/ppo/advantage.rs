//! Discounted returns, advantage estimates and batch normalisation.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageMode {
    /// GAE(λ); value targets are `A + V`.
    #[default]
    Gae,
    /// `A = R̂ - V` with `R̂` the bootstrapped discounted reward-to-go.
    Paper,
}

/// One collected episode (or episode fragment).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Value of the state after the last step; ignored when that step is done.
    pub bootstrap_value: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rewards.len();
        for (what, len) in [
            ("obs", self.obs.len()),
            ("actions", self.actions.len()),
            ("log_probs", self.log_probs.len()),
            ("values", self.values.len()),
            ("dones", self.dones.len()),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    actual: len,
                });
            }
        }
        if !self.log_probs.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("trajectory log-probabilities".into()));
        }
        Ok(())
    }
}

/// Bootstrapped discounted reward-to-go.
pub fn discounted_returns(rewards: &[f64], dones: &[bool], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut next = bootstrap;
    for t in (0..rewards.len()).rev() {
        if dones[t] {
            next = 0.0;
        }
        next = rewards[t] + gamma * next;
        out[t] = next;
    }
    out
}

/// `(advantages, returns)` for one trajectory.
pub fn compute_advantages(
    traj: &Trajectory,
    gamma: f64,
    lambda: f64,
    mode: AdvantageMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if traj.is_empty() {
        return Err(Error::Empty("trajectory"));
    }
    traj.validate()?;
    let n = traj.len();
    match mode {
        AdvantageMode::Paper => {
            let ret = discounted_returns(&traj.rewards, &traj.dones, traj.bootstrap_value, gamma);
            let adv = ret.iter().zip(&traj.values).map(|(r, v)| r - v).collect();
            Ok((adv, ret))
        }
        AdvantageMode::Gae => {
            let mut adv = vec![0.0; n];
            let mut next_adv = 0.0;
            let mut next_value = traj.bootstrap_value;
            for t in (0..n).rev() {
                let live = if traj.dones[t] { 0.0 } else { 1.0 };
                let delta = traj.rewards[t] + gamma * live * next_value - traj.values[t];
                next_adv = delta + gamma * lambda * live * next_adv;
                adv[t] = next_adv;
                next_value = traj.values[t];
            }
            let ret = adv.iter().zip(&traj.values).map(|(a, v)| a + v).collect();
            Ok((adv, ret))
        }
    }
}

/// Zero mean, unit variance in place; left untouched when the variance is
/// below `1e-8`.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.len() < 2 {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    if var < 1e-8 {
        return;
    }
    let sd = var.sqrt();
    adv.iter_mut().for_each(|a| *a = (*a - mean) / sd);
}
