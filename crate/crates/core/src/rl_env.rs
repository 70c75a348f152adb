//! Coexistence control as an episodic environment: one episode is one
//! satellite pass, one step is one snapshot.
//!
//! Raw action layout (length `1 + 3G` continuous, then `G` binary, with `G`
//! control groups):
//!
//! ```text
//! [threshold, power_0, ue_cap_0, tilt_0, ..., power_G-1, ue_cap_G-1, tilt_G-1,
//!  mute_0, ..., mute_G-1]
//! ```
//!
//! Continuous entries are unbounded and squashed through `tanh` onto their
//! ranges; binary entries mute the group when `> 0.5`.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::deployment::Scenario;
use crate::geometry::{PassSnapshot, MAX_PASS_ELEVATION_DEG, MIN_PASS_ELEVATION_DEG};
use crate::interference::{
    zero_interference_rate_bps, ControlState, EvalOptions, InrMode, PassCache, SectorControl,
    SnapshotMetrics, MAX_THRESHOLD_DB, MIN_THRESHOLD_DB,
};
use crate::ppo::policy::{deterministic_action, PolicyParams};
use crate::ppo::trainer::{EnvStep, Environment};
use crate::seeding::{self, tag};
use crate::{Error, Result};

pub const OBS_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w1: 0.5,
            w2: 0.3,
            w3: 0.2,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.w1 >= 0.0 && self.w2 >= 0.0 && self.w3 >= 0.0) {
            return Err(Error::InvalidConfig("reward weights must be >= 0".into()));
        }
        if ((self.w1 + self.w2 + self.w3) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("reward weights must sum to 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    PerSector,
    PerCluster(usize),
}

impl Default for Granularity {
    fn default() -> Self {
        Granularity::PerCluster(8)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub weights: RewardWeights,
    pub granularity: Granularity,
    pub power_range_dbm: (f64, f64),
    pub ue_cap_range_dbm: (f64, f64),
    pub initial_threshold_db: f64,
    pub inr_mode: InrMode,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            weights: RewardWeights::default(),
            granularity: Granularity::default(),
            power_range_dbm: (13.0, 33.0),
            ue_cap_range_dbm: (-10.0, 23.0),
            initial_threshold_db: MAX_THRESHOLD_DB,
            inr_mode: InrMode::Linear,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        self.weights.validate()?;
        let p = &scenario.params;
        let (plo, phi) = self.power_range_dbm;
        if !(plo <= phi && phi <= p.gnb_max_power_dbm) {
            return Err(Error::InvalidConfig(format!(
                "power range [{plo}, {phi}] must be ordered and capped at {}",
                p.gnb_max_power_dbm
            )));
        }
        let (ulo, uhi) = self.ue_cap_range_dbm;
        if !(ulo <= uhi && uhi <= p.ue_max_power_dbm) {
            return Err(Error::InvalidConfig(format!(
                "UE cap range [{ulo}, {uhi}] must be ordered and capped at {}",
                p.ue_max_power_dbm
            )));
        }
        if !(MIN_THRESHOLD_DB..=MAX_THRESHOLD_DB).contains(&self.initial_threshold_db) {
            return Err(Error::range(
                "initial_threshold_db",
                self.initial_threshold_db,
                "[-12.2, -6]",
            ));
        }
        if self.granularity == Granularity::PerCluster(0) {
            return Err(Error::InvalidConfig("cluster count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Groups sectors by k-means++ over their site positions (sectors of one site
/// always share a group). Returns the group index of every sector and the
/// number of groups, which is `min(k, distinct sites)`.
pub fn cluster_sectors(scenario: &Scenario, k: usize, seed: u64) -> (Vec<usize>, usize) {
    let pts: Vec<(f64, f64)> = scenario
        .sites
        .iter()
        .map(|s| (s.position.x_m, s.position.y_m))
        .collect();
    let d2 = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);
    let mut rng = seeding::stream(seed, &[tag::CLUSTERING]);
    let mut centers = vec![pts[rng.random_range(0..pts.len())]];
    while centers.len() < k {
        let w: Vec<f64> = pts
            .iter()
            .map(|&p| {
                centers
                    .iter()
                    .map(|&c| d2(p, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = w.len() - 1;
        for (i, &wi) in w.iter().enumerate() {
            if u < wi {
                pick = i;
                break;
            }
            u -= wi;
        }
        centers.push(pts[pick]);
    }
    let nearest = |p: (f64, f64), centers: &[(f64, f64)]| {
        let mut best = 0;
        for (j, &c) in centers.iter().enumerate() {
            if d2(p, c) < d2(p, centers[best]) {
                best = j;
            }
        }
        best
    };
    let mut assign: Vec<usize> = pts.iter().map(|&p| nearest(p, &centers)).collect();
    for _ in 0..100 {
        for (j, c) in centers.iter_mut().enumerate() {
            let members: Vec<_> = pts.iter().zip(&assign).filter(|(_, &a)| a == j).collect();
            if !members.is_empty() {
                let n = members.len() as f64;
                *c = (
                    members.iter().map(|(p, _)| p.0).sum::<f64>() / n,
                    members.iter().map(|(p, _)| p.1).sum::<f64>() / n,
                );
            }
        }
        let next: Vec<usize> = pts.iter().map(|&p| nearest(p, &centers)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    let sector_groups = scenario
        .sectors()
        .iter()
        .map(|s| assign[s.site_index])
        .collect();
    (sector_groups, centers.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupAction {
    pub mute: bool,
    pub dl_power_dbm: f64,
    pub ul_power_cap_dbm: f64,
    pub downtilt_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionVector {
    pub new_threshold_db: f64,
    pub groups: Vec<GroupAction>,
}

/// `tanh` squash of `raw` onto `[lo, hi]`; both bounds are attained.
pub fn squash(raw: f64, lo: f64, hi: f64) -> f64 {
    let s = 0.5 * (raw.tanh() + 1.0);
    (lo * (1.0 - s) + hi * s).clamp(lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `[θ_EL, η, R̄, χ, Γ̄_th]`, each in `[0, 1]`.
pub fn encode_observation(
    metrics: &SnapshotMetrics,
    elevation_deg: f64,
    threshold_db: f64,
    r_max_bps: f64,
) -> Observation {
    let unit = |v: f64| v.clamp(0.0, 1.0);
    let el = (elevation_deg - MIN_PASS_ELEVATION_DEG)
        / (MAX_PASS_ELEVATION_DEG - MIN_PASS_ELEVATION_DEG);
    let thr = (threshold_db - MIN_THRESHOLD_DB) / (MAX_THRESHOLD_DB - MIN_THRESHOLD_DB);
    Observation([
        unit(el),
        unit(metrics.eta),
        normalized_rate(metrics.rate_bps, r_max_bps),
        unit(metrics.chi),
        unit(thr),
    ])
}

pub fn normalized_rate(rate_bps: f64, r_max_bps: f64) -> f64 {
    (rate_bps / r_max_bps).clamp(0.0, 1.0)
}

/// `w1·R̄ + w2·χ - w3·η`.
pub fn compute_reward(rbar: f64, chi: f64, eta: f64, w: &RewardWeights) -> f64 {
    w.w1 * rbar + w.w2 * chi - w.w3 * eta
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: SnapshotMetrics,
    pub control: ControlState,
    pub rbar: f64,
}

/// Single-owner environment over a shared, immutable pass cache.
#[derive(Debug, Clone)]
pub struct CoexistenceEnv {
    cache: Arc<PassCache>,
    cfg: EnvConfig,
    groups: Vec<usize>,
    n_groups: usize,
    r_max_bps: f64,
    opts: EvalOptions,
    t: usize,
    threshold_db: f64,
    started: bool,
}

impl CoexistenceEnv {
    pub fn new(cache: Arc<PassCache>, cfg: EnvConfig) -> Result<Self> {
        let scenario = cache.scenario().clone();
        cfg.validate(&scenario)?;
        let (groups, n_groups) = match cfg.granularity {
            Granularity::PerSector => {
                let n = scenario.sector_count();
                ((0..n).collect(), n)
            }
            Granularity::PerCluster(k) => cluster_sectors(&scenario, k, scenario.seed),
        };
        let mut r_max: f64 = 0.0;
        for s in cache.snapshots() {
            r_max = r_max.max(zero_interference_rate_bps(&scenario, s)?);
        }
        if !(r_max > 0.0) {
            return Err(Error::range("zero-interference throughput", r_max, "> 0"));
        }
        let opts = EvalOptions {
            inr_mode: cfg.inr_mode,
        };
        let threshold_db = cfg.initial_threshold_db;
        Ok(Self {
            cache,
            cfg,
            groups,
            n_groups,
            r_max_bps: r_max,
            opts,
            t: 0,
            threshold_db,
            started: false,
        })
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        self.cache.scenario()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn sector_groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn r_max_bps(&self) -> f64 {
        self.r_max_bps
    }

    pub fn episode_len(&self) -> usize {
        self.cache.len()
    }

    pub fn snapshot(&self, i: usize) -> &PassSnapshot {
        &self.cache.snapshots()[i]
    }

    pub fn reset_env(&mut self, _seed: u64) -> Result<Observation> {
        self.t = 0;
        self.started = true;
        self.threshold_db = self.cfg.initial_threshold_db;
        let control = ControlState::no_coordination(self.scenario(), self.threshold_db);
        let probe = self.cache.evaluate(0, &control, &self.opts)?;
        Ok(encode_observation(
            &probe,
            self.snapshot(0).elevation_deg,
            self.threshold_db,
            self.r_max_bps,
        ))
    }

    pub fn decode_action(&self, raw: &[f64]) -> Result<ActionVector> {
        let g = self.n_groups;
        let want = 1 + 4 * g;
        if raw.len() != want {
            return Err(Error::DimensionMismatch {
                what: "raw action",
                expected: want,
                actual: raw.len(),
            });
        }
        if let Some(i) = raw.iter().position(|v| v.is_nan()) {
            return Err(Error::NonFinite(format!("raw action entry {i}")));
        }
        let (plo, phi) = self.cfg.power_range_dbm;
        let (ulo, uhi) = self.cfg.ue_cap_range_dbm;
        let (tlo, thi) = self.scenario().params.tilt_range_deg;
        let groups = (0..g)
            .map(|j| GroupAction {
                dl_power_dbm: squash(raw[1 + 3 * j], plo, phi),
                ul_power_cap_dbm: squash(raw[2 + 3 * j], ulo, uhi),
                downtilt_deg: squash(raw[3 + 3 * j], tlo, thi),
                mute: raw[1 + 3 * g + j] > 0.5,
            })
            .collect();
        Ok(ActionVector {
            new_threshold_db: squash(raw[0], MIN_THRESHOLD_DB, MAX_THRESHOLD_DB),
            groups,
        })
    }

    pub fn control_for(&self, action: &ActionVector) -> Result<ControlState> {
        if action.groups.len() != self.n_groups {
            return Err(Error::DimensionMismatch {
                what: "action groups",
                expected: self.n_groups,
                actual: action.groups.len(),
            });
        }
        Ok(ControlState {
            sectors: self
                .groups
                .iter()
                .map(|&g| {
                    let a = &action.groups[g];
                    SectorControl {
                        tx_power_dbm: a.dl_power_dbm,
                        downtilt_deg: a.downtilt_deg,
                        muted: a.mute,
                        ue_power_cap_dbm: a.ul_power_cap_dbm,
                    }
                })
                .collect(),
            protection_threshold_db: action.new_threshold_db,
        })
    }

    pub fn step_action(&mut self, action: &ActionVector) -> Result<StepResult> {
        if !self.started || self.t >= self.episode_len() {
            return Err(Error::EpisodeDone);
        }
        let control = self.control_for(action)?;
        let info = self.cache.evaluate(self.t, &control, &self.opts)?;
        let rbar = normalized_rate(info.rate_bps, self.r_max_bps);
        let reward = compute_reward(rbar, info.chi, info.eta, &self.cfg.weights);
        self.threshold_db = action.new_threshold_db;
        self.t += 1;
        let done = self.t == self.episode_len();
        let next_el = self
            .snapshot(self.t.min(self.episode_len() - 1))
            .elevation_deg;
        Ok(StepResult {
            observation: encode_observation(&info, next_el, self.threshold_db, self.r_max_bps),
            reward,
            done,
            info,
            control,
            rbar,
        })
    }

    pub fn step_raw(&mut self, raw: &[f64]) -> Result<StepResult> {
        let a = self.decode_action(raw)?;
        self.step_action(&a)
    }
}

impl Environment for CoexistenceEnv {
    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn n_continuous(&self) -> usize {
        1 + 3 * self.n_groups
    }

    fn n_binary(&self) -> usize {
        self.n_groups
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        Ok(self.reset_env(seed)?.0.to_vec())
    }

    fn step(&mut self, raw_action: &[f64]) -> Result<EnvStep> {
        let r = self.step_raw(raw_action)?;
        Ok(EnvStep {
            obs: r.observation.0.to_vec(),
            reward: r.reward,
            done: r.done,
        })
    }

    /// `(w1 + w2)` per step over the pass.
    fn reward_normalizer(&self) -> f64 {
        (self.cfg.weights.w1 + self.cfg.weights.w2) * self.episode_len() as f64
    }
}

/// Greedy rollout of a policy over one pass.
pub fn evaluate_policy(env: &mut CoexistenceEnv, params: &PolicyParams) -> Result<Vec<StepResult>> {
    let mut obs = env.reset_env(0)?;
    let mut out = Vec::with_capacity(env.episode_len());
    loop {
        let (dist, _) = params.forward(obs.as_slice())?;
        let r = env.step_raw(&deterministic_action(&dist))?;
        obs = r.observation;
        let done = r.done;
        out.push(r);
        if done {
            return Ok(out);
        }
    }
}

/// One trajectory-log row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub episode: usize,
    pub step: usize,
    pub reward: f64,
    pub eta: f64,
    pub chi: f64,
    pub rbar: f64,
    pub threshold_db: f64,
    pub mean_power_dbm: f64,
    pub mean_ue_cap_dbm: f64,
    pub mean_tilt_deg: f64,
}

impl TrajectoryRecord {
    pub fn from_step(episode: usize, step: usize, r: &StepResult) -> Self {
        let n = r.control.sectors.len() as f64;
        let mean = |f: fn(&SectorControl) -> f64| r.control.sectors.iter().map(f).sum::<f64>() / n;
        Self {
            episode,
            step,
            reward: r.reward,
            eta: r.info.eta,
            chi: r.info.chi,
            rbar: r.rbar,
            threshold_db: r.control.protection_threshold_db,
            mean_power_dbm: mean(|s| s.tx_power_dbm),
            mean_ue_cap_dbm: mean(|s| s.ue_power_cap_dbm),
            mean_tilt_deg: mean(|s| s.downtilt_deg),
        }
    }
}
