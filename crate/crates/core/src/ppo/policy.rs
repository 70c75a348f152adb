//! Actor-critic parameters and the action distribution: independent Gaussians
//! with a state-independent log-std for continuous heads, Bernoulli logits for
//! binary heads.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::network::Mlp;
use crate::seeding::{self, tag};
use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDims {
    pub obs_dim: usize,
    pub n_continuous: usize,
    pub n_binary: usize,
    pub hidden: Vec<usize>,
}

impl PolicyDims {
    pub fn action_dim(&self) -> usize {
        self.n_continuous + self.n_binary
    }

    fn actor_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.obs_dim];
        s.extend(&self.hidden);
        s.push(self.action_dim());
        s
    }

    fn critic_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.obs_dim];
        s.extend(&self.hidden);
        s.push(1);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub dims: PolicyDims,
    /// Outputs continuous means then binary logits.
    pub actor: Mlp,
    pub log_std: Vec<f64>,
    pub critic: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistParams {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    pub logits: Vec<f64>,
}

impl PolicyParams {
    /// Zero output layers, so initial means sit at 0, logits at 0 and the
    /// value at 0.
    pub fn init(dims: PolicyDims, seed: u64, init_log_std: f64) -> Result<Self> {
        Self::check_dims(&dims)?;
        let mut rng = seeding::stream(seed, &[tag::POLICY_INIT]);
        Ok(Self {
            actor: Mlp::init(&dims.actor_sizes(), &mut rng, true),
            log_std: vec![init_log_std; dims.n_continuous],
            critic: Mlp::init(&dims.critic_sizes(), &mut rng, true),
            dims,
        })
    }

    /// Every layer random, log-std drawn around -0.5. Used for gradient checks.
    pub fn init_random(dims: PolicyDims, seed: u64) -> Result<Self> {
        Self::check_dims(&dims)?;
        let mut rng = seeding::stream(seed, &[tag::POLICY_INIT, 1]);
        let actor = Mlp::init(&dims.actor_sizes(), &mut rng, false);
        let critic = Mlp::init(&dims.critic_sizes(), &mut rng, false);
        let log_std = (0..dims.n_continuous)
            .map(|_| -0.5 + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(Self {
            dims,
            actor,
            log_std,
            critic,
        })
    }

    fn check_dims(dims: &PolicyDims) -> Result<()> {
        if dims.obs_dim == 0 || dims.action_dim() == 0 || dims.hidden.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "degenerate policy dims {dims:?}"
            )));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.n_actor_params() + self.critic.len()
    }

    /// Actor weights plus log-std; they come first in the flat layout.
    pub fn n_actor_params(&self) -> usize {
        self.actor.len() + self.log_std.len()
    }

    /// `[actor | log_std | critic]`.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend(&self.actor.params);
        v.extend(&self.log_std);
        v.extend(&self.critic.params);
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                what: "flat parameters",
                expected: self.n_params(),
                actual: v.len(),
            });
        }
        let a = self.actor.len();
        let s = self.log_std.len();
        self.actor.params.copy_from_slice(&v[..a]);
        self.log_std.copy_from_slice(&v[a..a + s]);
        self.critic.params.copy_from_slice(&v[a + s..]);
        Ok(())
    }

    /// Structural consistency and finiteness.
    pub fn validate(&self) -> Result<()> {
        let d = &self.dims;
        if self.actor.sizes != d.actor_sizes() || self.critic.sizes != d.critic_sizes() {
            return Err(Error::InvalidConfig(
                "layer sizes disagree with dims".into(),
            ));
        }
        for (what, m) in [("actor", &self.actor), ("critic", &self.critic)] {
            let want = super::network::param_count(&m.sizes);
            if m.params.len() != want {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: want,
                    actual: m.params.len(),
                });
            }
        }
        if self.log_std.len() != d.n_continuous {
            return Err(Error::DimensionMismatch {
                what: "log_std",
                expected: d.n_continuous,
                actual: self.log_std.len(),
            });
        }
        if !self.flat().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("policy parameters".into()));
        }
        Ok(())
    }

    fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.dims.obs_dim {
            return Err(Error::DimensionMismatch {
                what: "observation",
                expected: self.dims.obs_dim,
                actual: obs.len(),
            });
        }
        Ok(())
    }

    pub fn dist_from_output(&self, out: &[f64]) -> DistParams {
        let n = self.dims.n_continuous;
        DistParams {
            mean: out[..n].to_vec(),
            log_std: self.log_std.clone(),
            logits: out[n..].to_vec(),
        }
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        self.check_obs(obs)?;
        Ok(self.critic.forward(obs)[0])
    }

    /// Distribution parameters and value estimate.
    pub fn forward(&self, obs: &[f64]) -> Result<(DistParams, f64)> {
        self.check_obs(obs)?;
        let out = self.actor.forward(obs);
        let v = self.critic.forward(obs)[0];
        if !out.iter().all(|x| x.is_finite()) || !v.is_finite() {
            return Err(Error::NonFinite("policy output".into()));
        }
        Ok((self.dist_from_output(&out), v))
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Raw action: continuous Gaussian draws (pre-squash) followed by 0/1 binary
/// draws. Returns the joint log-probability.
pub fn sample_action<R: Rng + ?Sized>(dist: &DistParams, rng: &mut R) -> (Vec<f64>, f64) {
    let mut a = Vec::with_capacity(dist.mean.len() + dist.logits.len());
    for (m, ls) in dist.mean.iter().zip(&dist.log_std) {
        a.push(m + ls.exp() * rng.sample::<f64, _>(StandardNormal));
    }
    for &l in &dist.logits {
        let u: f64 = rng.random();
        a.push(if u < sigmoid(l) { 1.0 } else { 0.0 });
    }
    let lp = log_prob(dist, &a);
    (a, lp)
}

/// Means for continuous heads; binary heads on when `p > 0.5`.
pub fn deterministic_action(dist: &DistParams) -> Vec<f64> {
    dist.mean
        .iter()
        .copied()
        .chain(dist.logits.iter().map(|&l| if l > 0.0 { 1.0 } else { 0.0 }))
        .collect()
}

pub fn log_prob(dist: &DistParams, action: &[f64]) -> f64 {
    let n = dist.mean.len();
    let mut lp = 0.0;
    for i in 0..n {
        let z = (action[i] - dist.mean[i]) * (-dist.log_std[i]).exp();
        lp += -0.5 * z * z - dist.log_std[i] - 0.5 * LN_2PI;
    }
    for (j, &l) in dist.logits.iter().enumerate() {
        lp -= if action[n + j] > 0.5 {
            softplus(-l)
        } else {
            softplus(l)
        };
    }
    lp
}

pub fn entropy(dist: &DistParams) -> f64 {
    let g: f64 = dist.log_std.iter().map(|ls| 0.5 + 0.5 * LN_2PI + ls).sum();
    let b: f64 = dist.logits.iter().map(|&l| bernoulli_entropy(l)).sum();
    g + b
}

/// `softplus(l) - l·σ(l)`.
pub fn bernoulli_entropy(logit: f64) -> f64 {
    if logit.is_infinite() {
        return 0.0;
    }
    softplus(logit) - logit * sigmoid(logit)
}

/// Gradients of `log_prob` and `entropy` with respect to the actor outputs
/// (means, logits) and the log-stds.
pub(crate) struct HeadGrads {
    pub d_out: Vec<f64>,
    pub d_log_std: Vec<f64>,
}

/// `w_lp · ∂log π/∂θ + w_ent · ∂H/∂θ` at the head level.
pub(crate) fn head_grads(dist: &DistParams, action: &[f64], w_lp: f64, w_ent: f64) -> HeadGrads {
    let n = dist.mean.len();
    let mut d_out = Vec::with_capacity(n + dist.logits.len());
    let mut d_log_std = Vec::with_capacity(n);
    for i in 0..n {
        let inv_var = (-2.0 * dist.log_std[i]).exp();
        let diff = action[i] - dist.mean[i];
        d_out.push(w_lp * diff * inv_var);
        d_log_std.push(w_lp * (diff * diff * inv_var - 1.0) + w_ent);
    }
    for (j, &l) in dist.logits.iter().enumerate() {
        let p = sigmoid(l);
        let dlp = if action[n + j] > 0.5 { 1.0 - p } else { -p };
        let dh = -l * p * (1.0 - p);
        d_out.push(w_lp * dlp + w_ent * dh);
    }
    HeadGrads { d_out, d_log_std }
}
