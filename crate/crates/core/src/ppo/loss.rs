//! Clipped-surrogate PPO loss and its exact gradient.

use serde::{Deserialize, Serialize};

use super::policy::{entropy, head_grads, log_prob, PolicyParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossCoeffs {
    pub clip_epsilon: f64,
    pub value_coeff: f64,
    pub entropy_coeff: f64,
}

/// Batch means of the loss components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    /// Mean clipped surrogate (the objective, not negated).
    pub surrogate: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// `min(r·A, clip(r, 1-ε, 1+ε)·A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Loss `-surrogate + c_v·(V - R̂)² - c_e·H` averaged over the batch, and its
/// gradient in the flat `[actor | log_std | critic]` layout.
pub fn ppo_loss(
    params: &PolicyParams,
    batch: &[&Sample],
    coeffs: &LossCoeffs,
) -> Result<(LossTerms, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty("loss batch"));
    }
    let n_actor = params.actor.len();
    let n_std = params.log_std.len();
    let mut grad = vec![0.0; params.n_params()];
    let inv_b = 1.0 / batch.len() as f64;
    let eps = coeffs.clip_epsilon;
    let mut terms = LossTerms::default();

    for s in batch {
        let trace = params.actor.trace(&s.obs);
        let dist = params.dist_from_output(trace.output());
        let lp = log_prob(&dist, &s.action);
        let log_ratio = lp - s.old_log_prob;
        let ratio = log_ratio.exp();
        let a = s.advantage;
        let surr = clipped_surrogate(ratio, a, eps);
        // gradient flows only through the unclipped branch
        let d_surr_d_lp = if ratio * a <= ratio.clamp(1.0 - eps, 1.0 + eps) * a {
            ratio * a
        } else {
            0.0
        };
        let h = entropy(&dist);
        let hg = head_grads(
            &dist,
            &s.action,
            -d_surr_d_lp * inv_b,
            -coeffs.entropy_coeff * inv_b,
        );
        params
            .actor
            .backward(&trace, &hg.d_out, &mut grad[..n_actor]);
        for (g, d) in grad[n_actor..n_actor + n_std].iter_mut().zip(&hg.d_log_std) {
            *g += d;
        }

        let ctrace = params.critic.trace(&s.obs);
        let v = ctrace.output()[0];
        let dv = 2.0 * coeffs.value_coeff * (v - s.ret) * inv_b;
        params
            .critic
            .backward(&ctrace, &[dv], &mut grad[n_actor + n_std..]);

        terms.surrogate += surr * inv_b;
        terms.value += (v - s.ret).powi(2) * inv_b;
        terms.entropy += h * inv_b;
        terms.approx_kl += ((ratio - 1.0) - log_ratio) * inv_b;
        if (ratio - 1.0).abs() > eps {
            terms.clip_fraction += inv_b;
        }
    }
    terms.total =
        -terms.surrogate + coeffs.value_coeff * terms.value - coeffs.entropy_coeff * terms.entropy;
    if !terms.total.is_finite() || !grad.iter().all(|g| g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "ppo loss: total {} surrogate {} value {} entropy {}",
            terms.total, terms.surrogate, terms.value, terms.entropy
        )));
    }
    Ok((terms, grad))
}
