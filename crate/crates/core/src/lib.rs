//! Terrestrial / non-terrestrial coexistence in the FR3 upper mid-band.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: satellite pass sampling, slant range and off-axis angles.
//! - [`propagation`]: free-space / NTN loss terms, 3GPP UMa pathloss, thermal noise.
//! - [`antenna`]: circular-aperture beams, 3GPP sector pattern with downtilt.
//! - [`deployment`]: PPP user drops, base-station maps and the immutable [`Scenario`].
//! - [`interference`]: per-link interference, aggregate INR, SINR/throughput and
//!   per-snapshot network metrics.
//! - [`baselines`]: no-coordination and exclusion-zone (ASCENT-style) controllers.
//! - [`rl_env`]: the episodic decision environment over one satellite pass.
//! - [`ppo`]: a from-scratch actor-critic PPO learner.
//!
//! All randomness is drawn from explicitly seeded streams; the same seed always
//! reproduces the same scenario, trajectory and learning curve.

// `!(x > 0.0)` is deliberate throughout: it rejects NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod antenna;
pub mod baselines;
pub mod deployment;
mod error;
pub mod geometry;
pub mod interference;
pub mod ppo;
pub mod propagation;
pub mod rl_env;
pub mod seeding;
pub mod units;

pub use error::{Error, Result};

pub use deployment::{Scenario, ScenarioParams};
pub use geometry::{EarthModel, PassSnapshot, Position3D};
pub use interference::{ControlState, SnapshotMetrics};
