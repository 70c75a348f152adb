//! Two-state corridor with a known optimum, for sanity-checking the learner.
//!
//! State 0 offers a small immediate reward for staying (action 0) or a move to
//! state 1 (action 1). In state 1, action 1 pays 1 and stays, action 0 falls
//! back to state 0. The optimal policy plays action 1 everywhere.

use super::trainer::{EnvStep, Environment};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Corridor {
    pub horizon: usize,
    pub bait: f64,
    state: usize,
    t: usize,
}

impl Default for Corridor {
    fn default() -> Self {
        Self::new(4, 0.1)
    }
}

impl Corridor {
    pub fn new(horizon: usize, bait: f64) -> Self {
        Self {
            horizon,
            bait,
            state: 0,
            t: 0,
        }
    }

    pub fn observe(state: usize) -> Vec<f64> {
        if state == 0 {
            vec![1.0, 0.0]
        } else {
            vec![0.0, 1.0]
        }
    }

    /// `(next_state, reward)`.
    pub fn transition(&self, state: usize, action: bool) -> (usize, f64) {
        match (state, action) {
            (0, false) => (0, self.bait),
            (0, true) => (1, 0.0),
            (_, true) => (1, 1.0),
            (_, false) => (0, 0.0),
        }
    }

    /// Best episode return and an action sequence achieving it, by brute force.
    pub fn optimum(&self) -> (f64, Vec<bool>) {
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for mask in 0u32..(1 << self.horizon) {
            let seq: Vec<bool> = (0..self.horizon).map(|i| mask >> i & 1 == 1).collect();
            let mut s = 0;
            let mut total = 0.0;
            for &a in &seq {
                let (n, r) = self.transition(s, a);
                total += r;
                s = n;
            }
            if total > best.0 {
                best = (total, seq);
            }
        }
        best
    }
}

impl Environment for Corridor {
    fn obs_dim(&self) -> usize {
        2
    }

    fn n_continuous(&self) -> usize {
        0
    }

    fn n_binary(&self) -> usize {
        1
    }

    fn reset(&mut self, _seed: u64) -> Result<Vec<f64>> {
        self.state = 0;
        self.t = 0;
        Ok(Self::observe(0))
    }

    fn step(&mut self, raw_action: &[f64]) -> Result<EnvStep> {
        if self.t >= self.horizon {
            return Err(Error::EpisodeDone);
        }
        if raw_action.len() != 1 {
            return Err(Error::DimensionMismatch {
                what: "corridor action",
                expected: 1,
                actual: raw_action.len(),
            });
        }
        let (next, reward) = self.transition(self.state, raw_action[0] > 0.5);
        self.state = next;
        self.t += 1;
        Ok(EnvStep {
            obs: Self::observe(next),
            reward,
            done: self.t == self.horizon,
        })
    }

    fn reward_normalizer(&self) -> f64 {
        self.optimum().0
    }
}
