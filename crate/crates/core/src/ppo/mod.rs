//! Actor-critic PPO written from scratch: tanh MLPs, Gaussian and Bernoulli
//! heads, GAE, clipped surrogate loss with analytic gradients, Adam, and a
//! multi-worker rollout loop.

pub mod adam;
pub mod advantage;
pub mod checkpoint;
pub mod loss;
pub mod network;
pub mod policy;
pub mod toy;
pub mod trainer;

pub use advantage::{compute_advantages, normalize_advantages, AdvantageMode, Trajectory};
pub use checkpoint::{load_params, save_params};
pub use loss::{clipped_surrogate, ppo_loss, LossCoeffs, LossTerms, Sample};
pub use policy::{
    deterministic_action, entropy, log_prob, sample_action, DistParams, PolicyDims, PolicyParams,
};
pub use trainer::{
    run_deterministic_episode, train, EnvStep, Environment, Hyperparams, TrainOutcome, UpdateRecord,
};
