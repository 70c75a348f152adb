//! Rollout collection over parallel environment workers and the PPO update
//! loop.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{clip_grad_norm, Adam};
use super::advantage::{compute_advantages, normalize_advantages, AdvantageMode, Trajectory};
use super::loss::{ppo_loss, LossCoeffs, LossTerms, Sample};
use super::policy::{deterministic_action, sample_action, PolicyDims, PolicyParams};
use crate::seeding::{self, tag, SimRng};
use crate::{Error, Result};

pub struct EnvStep {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Episodic environment with a fixed-size raw action: `n_continuous` real
/// values followed by `n_binary` values in {0, 1}.
pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn n_continuous(&self) -> usize;
    fn n_binary(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Result<Vec<f64>>;
    fn step(&mut self, raw_action: &[f64]) -> Result<EnvStep>;
    /// Best achievable undiscounted episode reward, used to normalise curves.
    fn reward_normalizer(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub epochs_per_update: usize,
    pub minibatch_size: usize,
    /// Full episodes collected per update.
    pub episodes_per_update: usize,
    pub num_workers: usize,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
    pub max_grad_norm: f64,
    pub init_log_std: f64,
    pub hidden: Vec<usize>,
    pub updates: usize,
    pub advantage_mode: AdvantageMode,
    pub seed: u64,
    /// Abort when the running reward stays this far below its first value...
    pub divergence_drop: f64,
    /// ...for this many consecutive updates.
    pub divergence_patience: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            clip_epsilon: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            epochs_per_update: 4,
            minibatch_size: 64,
            episodes_per_update: 4,
            num_workers: 4,
            entropy_coeff: 1e-3,
            value_coeff: 0.5,
            max_grad_norm: 0.5,
            init_log_std: -0.5,
            hidden: vec![64, 64],
            updates: 200,
            advantage_mode: AdvantageMode::Gae,
            seed: 0,
            divergence_drop: 0.5,
            divergence_patience: 50,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("ppo: {m}")));
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon must be in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must be in [0, 1]");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.epochs_per_update == 0
            || self.minibatch_size == 0
            || self.episodes_per_update == 0
            || self.num_workers == 0
        {
            return bad("epochs, minibatch size, episodes and workers must be >= 1");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm must be positive");
        }
        if !(self.entropy_coeff >= 0.0 && self.value_coeff >= 0.0) {
            return bad("loss coefficients must be non-negative");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layers must be non-empty");
        }
        Ok(())
    }

    pub fn loss_coeffs(&self) -> LossCoeffs {
        LossCoeffs {
            clip_epsilon: self.clip_epsilon,
            value_coeff: self.value_coeff,
            entropy_coeff: self.entropy_coeff,
        }
    }
}

/// One learning-curve point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub update: usize,
    /// Mean normalised episode reward of this update's rollouts.
    pub mean_reward: f64,
    /// Exponential running average of `mean_reward`.
    pub running_reward: f64,
    pub loss: LossTerms,
}

pub struct TrainOutcome {
    pub params: PolicyParams,
    pub curve: Vec<UpdateRecord>,
}

pub fn policy_dims<E: Environment>(env: &E, hidden: &[usize]) -> PolicyDims {
    PolicyDims {
        obs_dim: env.obs_dim(),
        n_continuous: env.n_continuous(),
        n_binary: env.n_binary(),
        hidden: hidden.to_vec(),
    }
}

struct Episode {
    traj: Trajectory,
    total_reward: f64,
}

fn run_episode<E: Environment>(
    env: &mut E,
    params: &PolicyParams,
    rng: &mut SimRng,
    reset_seed: u64,
) -> Result<Episode> {
    let mut obs = env.reset(reset_seed)?;
    let mut traj = Trajectory::default();
    loop {
        let (dist, v) = params.forward(&obs)?;
        let (action, lp) = sample_action(&dist, rng);
        let st = env.step(&action)?;
        traj.obs.push(std::mem::replace(&mut obs, st.obs));
        traj.actions.push(action);
        traj.log_probs.push(lp);
        traj.rewards.push(st.reward);
        traj.values.push(v);
        traj.dones.push(st.done);
        if st.done {
            break;
        }
    }
    let total_reward = traj.rewards.iter().sum();
    Ok(Episode { traj, total_reward })
}

/// Greedy rollout (means, binary heads on when `p > 0.5`); returns per-step
/// rewards.
pub fn run_deterministic_episode<E: Environment>(
    env: &mut E,
    params: &PolicyParams,
    reset_seed: u64,
) -> Result<Vec<f64>> {
    let mut obs = env.reset(reset_seed)?;
    let mut rewards = Vec::new();
    loop {
        let (dist, _) = params.forward(&obs)?;
        let st = env.step(&deterministic_action(&dist))?;
        rewards.push(st.reward);
        obs = st.obs;
        if st.done {
            return Ok(rewards);
        }
    }
}

/// Trains from a fresh initialisation. `make_env(worker_index)` builds one
/// environment per worker; `on_update` sees every curve point with the
/// parameters after that update.
pub fn train<E, F>(
    make_env: F,
    hp: &Hyperparams,
    on_update: &mut dyn FnMut(&UpdateRecord, &PolicyParams) -> Result<()>,
) -> Result<TrainOutcome>
where
    E: Environment + Send,
    F: Fn(usize) -> Result<E>,
{
    hp.validate()?;
    let n_workers = hp.num_workers.min(hp.episodes_per_update);
    let mut envs = (0..n_workers).map(&make_env).collect::<Result<Vec<E>>>()?;
    let dims = policy_dims(&envs[0], &hp.hidden);
    for e in &envs[1..] {
        if policy_dims(e, &hp.hidden) != dims {
            return Err(Error::InvalidConfig(
                "worker environments disagree on dims".into(),
            ));
        }
    }
    let normalizer = envs[0].reward_normalizer();
    if !(normalizer > 0.0 && normalizer.is_finite()) {
        return Err(Error::range("reward normalizer", normalizer, "> 0"));
    }
    let mut params = PolicyParams::init(dims, hp.seed, hp.init_log_std)?;
    let n_actor = params.n_actor_params();
    let mut actor_opt = Adam::new(n_actor, hp.actor_lr);
    let mut critic_opt = Adam::new(params.n_params() - n_actor, hp.critic_lr);
    let mut worker_rngs: Vec<SimRng> = (0..n_workers)
        .map(|w| seeding::stream(hp.seed, &[tag::WORKER, w as u64]))
        .collect();
    let mut learner_rng = seeding::stream(hp.seed, &[tag::LEARNER]);
    let coeffs = hp.loss_coeffs();

    let mut curve: Vec<UpdateRecord> = Vec::with_capacity(hp.updates);
    let mut initial = 0.0;
    let mut running = 0.0;
    let mut below = 0usize;

    for update in 0..hp.updates {
        let n_eps = hp.episodes_per_update;
        let snapshot = &params;
        let mut collected: Vec<(usize, Result<Episode>)> = std::thread::scope(|s| {
            let handles: Vec<_> = envs
                .iter_mut()
                .zip(worker_rngs.iter_mut())
                .enumerate()
                .map(|(w, (env, rng))| {
                    s.spawn(move || {
                        (w..n_eps)
                            .step_by(n_workers)
                            .map(|e| {
                                let reset = seeding::derive(
                                    hp.seed,
                                    &[tag::WORKER, update as u64, e as u64],
                                );
                                (e, run_episode(env, snapshot, rng, reset))
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("rollout worker panicked"))
                .collect()
        });
        collected.sort_by_key(|(e, _)| *e);

        let mut samples = Vec::new();
        let mut adv_all = Vec::new();
        let mut reward_sum = 0.0;
        for (_, ep) in collected {
            let ep = ep?;
            reward_sum += ep.total_reward / normalizer;
            let (adv, ret) =
                compute_advantages(&ep.traj, hp.gamma, hp.gae_lambda, hp.advantage_mode)?;
            let t = ep.traj;
            for (i, (obs, action)) in t.obs.into_iter().zip(t.actions).enumerate() {
                samples.push(Sample {
                    obs,
                    action,
                    old_log_prob: t.log_probs[i],
                    advantage: 0.0,
                    ret: ret[i],
                });
            }
            adv_all.extend(adv);
        }
        normalize_advantages(&mut adv_all);
        for (s, a) in samples.iter_mut().zip(adv_all) {
            s.advantage = a;
        }
        let mean_reward = reward_sum / n_eps as f64;

        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut acc = LossTerms::default();
        let mut n_mb = 0usize;
        for epoch in 0..hp.epochs_per_update {
            order.shuffle(&mut learner_rng);
            for (mb, chunk) in order.chunks(hp.minibatch_size).enumerate() {
                let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
                let (terms, mut grad) = ppo_loss(&params, &batch, &coeffs).map_err(|e| {
                    Error::NonFinite(format!("update {update} epoch {epoch} minibatch {mb}: {e}"))
                })?;
                let (ga, gc) = grad.split_at_mut(n_actor);
                clip_grad_norm(ga, hp.max_grad_norm);
                clip_grad_norm(gc, hp.max_grad_norm);
                let mut flat = params.flat();
                let (pa, pc) = flat.split_at_mut(n_actor);
                actor_opt.step(pa, ga);
                critic_opt.step(pc, gc);
                params.set_flat(&flat)?;
                acc.total += terms.total;
                acc.surrogate += terms.surrogate;
                acc.value += terms.value;
                acc.entropy += terms.entropy;
                acc.approx_kl += terms.approx_kl;
                acc.clip_fraction += terms.clip_fraction;
                n_mb += 1;
            }
        }
        let k = n_mb.max(1) as f64;
        let loss = LossTerms {
            total: acc.total / k,
            surrogate: acc.surrogate / k,
            value: acc.value / k,
            entropy: acc.entropy / k,
            approx_kl: acc.approx_kl / k,
            clip_fraction: acc.clip_fraction / k,
        };
        if update == 0 {
            initial = mean_reward;
            running = mean_reward;
        } else {
            running = 0.9 * running + 0.1 * mean_reward;
        }
        let rec = UpdateRecord {
            update,
            mean_reward,
            running_reward: running,
            loss,
        };
        curve.push(rec);
        on_update(&rec, &params)?;

        let floor = initial - hp.divergence_drop;
        below = if running < floor { below + 1 } else { 0 };
        if below >= hp.divergence_patience {
            return Err(Error::Diverged {
                update,
                running,
                floor,
                patience: hp.divergence_patience,
            });
        }
    }
    Ok(TrainOutcome { params, curve })
}
