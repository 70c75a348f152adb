//! Subcommand implementations. Each writes into `cfg.out` and returns the
//! in-memory results so callers (and tests) need not re-read the files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use log::info;
use serde::{Deserialize, Serialize};

use fr3coex_core::baselines::{run_pass, Ascent, Controller, NoCoordination};
use fr3coex_core::deployment::{load_bs_map, synthesize_bs_map, BsSite};
use fr3coex_core::geometry::generate_pass;
use fr3coex_core::interference::{EvalOptions, PassCache};
use fr3coex_core::ppo::trainer::policy_dims;
use fr3coex_core::ppo::{load_params, save_params, train, PolicyParams, UpdateRecord};
use fr3coex_core::rl_env::{evaluate_policy, CoexistenceEnv, TrajectoryRecord};
use fr3coex_core::{Scenario, SnapshotMetrics};

use crate::cdf::{compute_cdf, CdfSummary};
use crate::config::RunConfig;
use crate::output::{read_jsonl, write_config, write_csv, write_jsonl, Meta};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControllerSpec {
    None,
    Ascent,
    Checkpoint(PathBuf),
}

impl ControllerSpec {
    pub fn label(&self) -> String {
        match self {
            ControllerSpec::None => "none".into(),
            ControllerSpec::Ascent => "ascent".into(),
            ControllerSpec::Checkpoint(_) => "policy".into(),
        }
    }
}

impl std::str::FromStr for ControllerSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "ascent" => Ok(Self::Ascent),
            _ => match s.strip_prefix("ckpt:") {
                Some(p) if !p.is_empty() => Ok(Self::Checkpoint(PathBuf::from(p))),
                _ => bail!("controller must be none, ascent or ckpt:PATH (got {s:?})"),
            },
        }
    }
}

/// One scenario drop with its pass and link cache.
pub struct World {
    pub density: f64,
    pub cache: Arc<PassCache>,
}

impl World {
    pub fn scenario(&self) -> &Arc<Scenario> {
        self.cache.scenario()
    }
}

pub fn load_sites(cfg: &RunConfig) -> Result<Vec<BsSite>> {
    let p = &cfg.params;
    Ok(match &cfg.scenario.bs_map {
        Some(path) => load_bs_map(path, &p.footprint, &p.sector, cfg.scenario.out_of_footprint)
            .with_context(|| format!("loading BS map {}", path.display()))?,
        None => synthesize_bs_map(
            cfg.scenario.synthetic_sites,
            cfg.seed,
            &p.footprint,
            p.bs_height_m,
            &p.sector,
        )?,
    })
}

pub fn build_world(cfg: &RunConfig, density: f64) -> Result<World> {
    let sites = load_sites(cfg)?;
    let scenario = Scenario::build(
        cfg.params.clone(),
        &cfg.drop_config(density)?,
        sites,
        cfg.seed,
    )?;
    let pass = generate_pass(
        &cfg.params.earth,
        cfg.pass.min_elevation_deg,
        cfg.pass.max_elevation_deg,
        cfg.pass.step_deg,
    )?;
    info!(
        "density {density:e}: {} sites, {} sectors, {} TN users, {} NTN terminals, {} snapshots",
        scenario.sites.len(),
        scenario.sector_count(),
        scenario.tn_users.len(),
        scenario.ntn_terminals.len(),
        pass.len()
    );
    let cache = PassCache::new(Arc::new(scenario), pass, cfg.pass.cache_budget_mb << 20)?;
    Ok(World {
        density,
        cache: Arc::new(cache),
    })
}

pub fn make_env(cfg: &RunConfig, world: &World) -> Result<CoexistenceEnv> {
    Ok(CoexistenceEnv::new(world.cache.clone(), cfg.env.clone())?)
}

/// Loads a checkpoint whose input and output sizes fit `env`; the hidden
/// layout is taken from the file.
pub fn load_policy(path: &Path, env: &CoexistenceEnv) -> Result<PolicyParams> {
    let probe = load_params(path, None)
        .with_context(|| format!("loading checkpoint {}", path.display()))?;
    let want = policy_dims(env, &probe.dims.hidden);
    load_params(path, Some(&want))
        .with_context(|| format!("checkpoint {} does not fit this scenario", path.display()))
}

/// Per-snapshot metrics for one controller over one world, plus the policy
/// trajectory when the controller is a checkpoint.
pub fn run_controller(
    cfg: &RunConfig,
    world: &World,
    controller: &ControllerSpec,
) -> Result<(Vec<SnapshotMetrics>, Vec<TrajectoryRecord>)> {
    let opts = EvalOptions {
        inr_mode: cfg.env.inr_mode,
    };
    let thr = cfg.baseline.threshold_db;
    match controller {
        ControllerSpec::None => {
            let mut c = NoCoordination { threshold_db: thr };
            Ok((run_pass(&mut c, &world.cache, &opts, thr)?, Vec::new()))
        }
        ControllerSpec::Ascent => {
            let mut c = Ascent::new(cfg.baseline.ascent, thr)?;
            let c: &mut dyn Controller = &mut c;
            Ok((run_pass(c, &world.cache, &opts, thr)?, Vec::new()))
        }
        ControllerSpec::Checkpoint(path) => {
            let mut env = make_env(cfg, world)?;
            let params = load_policy(path, &env)?;
            let steps = evaluate_policy(&mut env, &params)?;
            let traj = steps
                .iter()
                .enumerate()
                .map(|(i, s)| TrajectoryRecord::from_step(0, i, s))
                .collect();
            Ok((steps.into_iter().map(|s| s.info).collect(), traj))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub density: f64,
    pub snapshot: usize,
    pub elevation_deg: f64,
    pub terminal_id: u32,
    pub kind: String,
    pub inr_db: f64,
    pub sinr_db: f64,
    pub rate_bps: f64,
    pub dl_interference_mw: f64,
    pub ul_interference_mw: f64,
    pub interfered: bool,
    pub threshold_db: f64,
    pub chi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub density: f64,
    pub snapshot: usize,
    pub elevation_deg: f64,
    pub threshold_db: f64,
    pub eta: f64,
    pub chi: f64,
    pub rate_bps: f64,
    pub median_inr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub controller: String,
    pub density: f64,
    pub n_terminals: usize,
    pub n_sectors: usize,
    pub n_tn_users: usize,
    pub n_snapshots: usize,
    pub median_inr_db: f64,
    pub mean_eta: f64,
    pub mean_chi: f64,
    pub mean_rate_bps: f64,
    pub inr_cdf: CdfSummary,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

pub fn summarize(label: &str, world: &World, metrics: &[SnapshotMetrics]) -> Result<RunSummary> {
    let inr: Vec<f64> = metrics.iter().flat_map(|m| m.inr_db()).collect();
    let cdf = compute_cdf(&inr)?;
    let s = world.scenario();
    Ok(RunSummary {
        controller: label.into(),
        density: world.density,
        n_terminals: s.ntn_terminals.len(),
        n_sectors: s.sector_count(),
        n_tn_users: s.tn_users.len(),
        n_snapshots: metrics.len(),
        median_inr_db: cdf.median,
        mean_eta: mean(metrics.iter().map(|m| m.eta)),
        mean_chi: mean(metrics.iter().map(|m| m.chi)),
        mean_rate_bps: mean(metrics.iter().map(|m| m.rate_bps)),
        inr_cdf: cdf,
    })
}

fn record_rows(density: f64, metrics: &[SnapshotMetrics]) -> Vec<RecordRow> {
    metrics
        .iter()
        .flat_map(|m| {
            m.terminals.iter().map(move |t| RecordRow {
                density,
                snapshot: m.snapshot_index,
                elevation_deg: m.elevation_deg,
                terminal_id: t.inr.terminal_id,
                kind: t.kind.as_str().into(),
                inr_db: t.inr.inr_db,
                sinr_db: t.sinr_db,
                rate_bps: t.rate_bps,
                dl_interference_mw: t.inr.dl_interference_mw,
                ul_interference_mw: t.inr.ul_interference_mw,
                interfered: t.inr.interfered,
                threshold_db: m.threshold_db,
                chi: m.chi,
            })
        })
        .collect()
}

fn snapshot_rows(density: f64, metrics: &[SnapshotMetrics]) -> Result<Vec<SnapshotRow>> {
    metrics
        .iter()
        .map(|m| {
            let inr: Vec<f64> = m.inr_db().collect();
            Ok(SnapshotRow {
                density,
                snapshot: m.snapshot_index,
                elevation_deg: m.elevation_deg,
                threshold_db: m.threshold_db,
                eta: m.eta,
                chi: m.chi,
                rate_bps: m.rate_bps,
                median_inr_db: compute_cdf(&inr)?.median,
            })
        })
        .collect()
}

fn file_sha256(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn fmt_list<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Sweeps the pass for every configured density under one controller.
pub fn simulate(cfg: &RunConfig, controller: &ControllerSpec) -> Result<Vec<RunSummary>> {
    cfg.validate()?;
    let out = cfg.out_dir();
    ensure_dir(&out)?;
    let label = controller.label();
    let mut records = Vec::new();
    let mut snaps = Vec::new();
    let mut summaries = Vec::new();
    let mut traj = Vec::new();
    let mut counts = Vec::new();
    for &density in &cfg.scenario.ntn_densities {
        let world = build_world(cfg, density)?;
        let (metrics, t) = run_controller(cfg, &world, controller)?;
        records.extend(record_rows(density, &metrics));
        snaps.extend(snapshot_rows(density, &metrics)?);
        let s = summarize(&label, &world, &metrics)?;
        info!(
            "{label} @ {density:e}: median INR {:.2} dB, mean eta {:.3}, mean chi {:.3}",
            s.median_inr_db, s.mean_eta, s.mean_chi
        );
        counts.push(s.n_terminals);
        summaries.push(s);
        traj.extend(t);
    }
    let ckpt_hash = match controller {
        ControllerSpec::Checkpoint(p) => Some(file_sha256(p)?),
        _ => None,
    };
    let meta = |artifact: &str| {
        let m = Meta::new(artifact, cfg);
        let m = match &ckpt_hash {
            Some(h) => m.with("checkpoint_sha256", h),
            None => m,
        };
        m.with("controller", &label)
            .with(
                "densities",
                cfg.scenario
                    .ntn_densities
                    .iter()
                    .map(|d| format!("{d:e}"))
                    .collect::<Vec<_>>()
                    .join(";"),
            )
            .with("n_terminals", fmt_list(&counts))
            .with("inr_mode", format!("{:?}", cfg.env.inr_mode).to_lowercase())
    };
    write_config(&out.join("config.toml"), cfg)?;
    write_csv(&out.join("records.csv"), &meta("records"), &records)?;
    write_csv(&out.join("snapshots.csv"), &meta("snapshots"), &snaps)?;
    write_jsonl(&out.join("summary.jsonl"), &meta("summary"), &summaries)?;
    if !traj.is_empty() {
        write_csv(&out.join("trajectory.csv"), &meta("trajectory"), &traj)?;
    }
    Ok(summaries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub update: usize,
    pub mean_reward: f64,
    pub running_reward: f64,
    pub loss_total: f64,
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

impl From<&UpdateRecord> for CurveRow {
    fn from(r: &UpdateRecord) -> Self {
        Self {
            update: r.update,
            mean_reward: r.mean_reward,
            running_reward: r.running_reward,
            loss_total: r.loss.total,
            surrogate: r.loss.surrogate,
            value_loss: r.loss.value,
            entropy: r.loss.entropy,
            approx_kl: r.loss.approx_kl,
            clip_fraction: r.loss.clip_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub update: usize,
    pub mean_reward: f64,
    pub running_reward: f64,
    pub seeds: usize,
}

pub struct TrainedSeed {
    pub seed: u64,
    pub checkpoint: PathBuf,
    pub curve: Vec<UpdateRecord>,
}

/// Trains `train.seeds` policies on the first configured density.
pub fn train_cmd(cfg: &RunConfig) -> Result<Vec<TrainedSeed>> {
    cfg.validate()?;
    let out = cfg.out_dir();
    ensure_dir(&out)?;
    let density = cfg.scenario.ntn_densities[0];
    if cfg.scenario.ntn_densities.len() > 1 {
        log::warn!("training uses the first density only ({density:e})");
    }
    let world = build_world(cfg, density)?;
    world.cache.prewarm()?;
    let mut trained = Vec::new();
    for k in 0..cfg.train.seeds as u64 {
        let seed = cfg.seed + k;
        let mut hp = cfg.ppo.clone();
        hp.seed = seed;
        let every = cfg.train.log_every;
        let mut log_cb = |r: &UpdateRecord, _: &PolicyParams| {
            if every > 0 && (r.update + 1).is_multiple_of(every) {
                info!(
                    "seed {seed} update {}: reward {:.4} (running {:.4}) kl {:.2e}",
                    r.update + 1,
                    r.mean_reward,
                    r.running_reward,
                    r.loss.approx_kl
                );
            }
            Ok(())
        };
        let outcome = train(
            |_| make_env(cfg, &world).map_err(into_core),
            &hp,
            &mut log_cb,
        )
        .with_context(|| format!("training seed {seed}"))?;

        let meta = |artifact: &str| {
            Meta::new(artifact, cfg)
                .with("train_seed", seed)
                .with("density", density)
                .with("n_terminals", world.scenario().ntn_terminals.len())
                .with(
                    "advantage",
                    format!("{:?}", hp.advantage_mode).to_lowercase(),
                )
        };
        let ckpt = out.join(format!("policy_seed{seed}.json"));
        save_params(&outcome.params, &ckpt)?;
        let rows: Vec<CurveRow> = outcome.curve.iter().map(CurveRow::from).collect();
        write_csv(
            &out.join(format!("curve_seed{seed}.csv")),
            &meta("curve"),
            &rows,
        )?;

        let mut env = make_env(cfg, &world)?;
        let steps = evaluate_policy(&mut env, &outcome.params)?;
        let traj: Vec<TrajectoryRecord> = steps
            .iter()
            .enumerate()
            .map(|(i, s)| TrajectoryRecord::from_step(0, i, s))
            .collect();
        write_csv(
            &out.join(format!("trajectory_seed{seed}.csv")),
            &meta("trajectory"),
            &traj,
        )?;
        trained.push(TrainedSeed {
            seed,
            checkpoint: ckpt,
            curve: outcome.curve,
        });
    }

    let n_updates = trained.iter().map(|t| t.curve.len()).min().unwrap_or(0);
    let avg: Vec<AverageRow> = (0..n_updates)
        .map(|u| AverageRow {
            update: u,
            mean_reward: mean(trained.iter().map(|t| t.curve[u].mean_reward)),
            running_reward: mean(trained.iter().map(|t| t.curve[u].running_reward)),
            seeds: trained.len(),
        })
        .collect();
    let seeds: Vec<u64> = trained.iter().map(|t| t.seed).collect();
    write_csv(
        &out.join("curve_average.csv"),
        &Meta::new("curve_average", cfg).with("train_seeds", fmt_list(&seeds)),
        &avg,
    )?;
    write_config(&out.join("config.toml"), cfg)?;
    Ok(trained)
}

fn into_core(e: anyhow::Error) -> fr3coex_core::Error {
    match e.downcast::<fr3coex_core::Error>() {
        Ok(c) => c,
        Err(e) => fr3coex_core::Error::InvalidConfig(format!("{e:#}")),
    }
}

// ---------------------------------------------------------------------------
// compare

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeRow {
    pub scheme: String,
    pub density: f64,
    pub median_inr_db: f64,
    pub mean_eta: f64,
    pub mean_chi: f64,
    pub mean_rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffRow {
    pub scheme: String,
    pub baseline: String,
    pub density: f64,
    pub d_median_inr_db: f64,
    pub d_mean_eta: f64,
    pub d_mean_chi: f64,
    pub d_mean_rate_bps: f64,
}

/// Full-scale reference values, reported next to desk-scale results. They
/// come from a proprietary dense city map and are not expected to match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTargets {
    pub median_inr_improvement_db: (f64, f64),
    pub policy_activeness: f64,
    pub ascent_activeness_low_density: f64,
    pub ascent_activeness_high_density: f64,
}

pub const REFERENCE_TARGETS: ReferenceTargets = ReferenceTargets {
    median_inr_improvement_db: (6.0, 8.0),
    policy_activeness: 0.87,
    ascent_activeness_low_density: 0.7943,
    ascent_activeness_high_density: 0.2837,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schemes: Vec<SchemeRow>,
    pub differences: Vec<DiffRow>,
    pub reference_targets: ReferenceTargets,
}

/// Builds the comparison table from `(label, simulate output dir)` pairs.
/// Every run must come from the same scenario seed.
pub fn compare(runs: &[(String, PathBuf)], out: &Path) -> Result<Comparison> {
    if runs.len() < 2 {
        bail!("compare needs at least two runs");
    }
    let mut labels = std::collections::BTreeSet::new();
    let mut loaded = Vec::new();
    for (label, dir) in runs {
        if !labels.insert(label.clone()) {
            bail!("duplicate scheme label {label:?}");
        }
        let (meta, rows): (Meta, Vec<RunSummary>) = read_jsonl(&dir.join("summary.jsonl"))?;
        loaded.push((label.clone(), meta, rows));
    }
    let seed = loaded[0].1.seed;
    for (label, meta, _) in &loaded {
        if meta.seed != seed {
            bail!(
                "mismatched scenario seeds: {:?} used {}, {:?} used {}",
                loaded[0].0,
                seed,
                label,
                meta.seed
            );
        }
    }

    let mut schemes = Vec::new();
    // keyed by density bits to keep float keys exact
    let mut by_density: BTreeMap<u64, Vec<SchemeRow>> = BTreeMap::new();
    for (label, _, rows) in &loaded {
        for r in rows {
            let row = SchemeRow {
                scheme: label.clone(),
                density: r.density,
                median_inr_db: r.median_inr_db,
                mean_eta: r.mean_eta,
                mean_chi: r.mean_chi,
                mean_rate_bps: r.mean_rate_bps,
            };
            by_density
                .entry(r.density.to_bits())
                .or_default()
                .push(row.clone());
            schemes.push(row);
        }
    }
    let mut differences = Vec::new();
    for rows in by_density.values() {
        for a in rows {
            for b in rows {
                if a.scheme == b.scheme {
                    continue;
                }
                differences.push(DiffRow {
                    scheme: a.scheme.clone(),
                    baseline: b.scheme.clone(),
                    density: a.density,
                    d_median_inr_db: a.median_inr_db - b.median_inr_db,
                    d_mean_eta: a.mean_eta - b.mean_eta,
                    d_mean_chi: a.mean_chi - b.mean_chi,
                    d_mean_rate_bps: a.mean_rate_bps - b.mean_rate_bps,
                });
            }
        }
    }
    schemes.sort_by(|a, b| {
        a.density
            .total_cmp(&b.density)
            .then_with(|| a.scheme.cmp(&b.scheme))
    });
    differences.sort_by(|a, b| {
        a.density
            .total_cmp(&b.density)
            .then_with(|| a.scheme.cmp(&b.scheme))
            .then_with(|| a.baseline.cmp(&b.baseline))
    });

    ensure_dir(out)?;
    let mut meta = loaded[0].1.clone();
    meta.artifact = "comparison".into();
    meta.extra = BTreeMap::new();
    // the comparison's own hash covers every input run's config
    meta.config_sha256 = {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (label, m, _) in &loaded {
            h.update(format!("{label}={}\n", m.config_sha256));
        }
        hex::encode(h.finalize())
    };
    let mut meta = meta.with("runs", labels.iter().cloned().collect::<Vec<_>>().join(";"));
    for (label, m, _) in &loaded {
        meta = meta.with(&format!("config_sha256.{label}"), &m.config_sha256);
    }
    write_csv(&out.join("comparison.csv"), &meta, &schemes)?;
    write_csv(&out.join("differences.csv"), &meta, &differences)?;
    let cmp = Comparison {
        schemes,
        differences,
        reference_targets: REFERENCE_TARGETS,
    };
    write_jsonl(
        &out.join("comparison.jsonl"),
        &meta,
        std::slice::from_ref(&cmp),
    )?;
    Ok(cmp)
}
