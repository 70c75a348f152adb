//! Run configuration: one TOML file, `FR3COEX_<SECTION>_<KEY>` environment
//! overrides, then command-line flags. Unknown keys are rejected at every level.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use fr3coex_core::baselines::{AscentConfig, DEFAULT_THRESHOLD_DB};
use fr3coex_core::deployment::{CountMode, DropConfig, OutOfFootprint};
use fr3coex_core::ppo::Hyperparams;
use fr3coex_core::rl_env::EnvConfig;
use fr3coex_core::ScenarioParams;

pub const ENV_PREFIX: &str = "FR3COEX_";

/// Table names that environment overrides may address.
const SECTIONS: [&str; 7] = [
    "scenario", "params", "pass", "env", "ppo", "baseline", "train",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioBlock {
    /// NTN terminal densities in terminals/m². `simulate` sweeps all of them;
    /// `train` uses the first.
    pub ntn_densities: Vec<f64>,
    pub tn_user_density: f64,
    /// Terminal mix `T1:T2`, e.g. `"1:0"` or `"3:1"`.
    pub mix: String,
    pub count_mode: CountMode,
    /// Base-station map; when absent, `synthetic_sites` trisector sites are
    /// dropped uniformly.
    pub bs_map: Option<PathBuf>,
    pub synthetic_sites: usize,
    pub out_of_footprint: OutOfFootprint,
}

impl Default for ScenarioBlock {
    fn default() -> Self {
        let d = DropConfig::default();
        Self {
            ntn_densities: vec![d.ntn_density],
            tn_user_density: d.tn_user_density,
            mix: "1:0".into(),
            count_mode: d.count_mode,
            bs_map: None,
            synthetic_sites: 20,
            out_of_footprint: OutOfFootprint::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PassBlock {
    pub min_elevation_deg: f64,
    pub max_elevation_deg: f64,
    pub step_deg: f64,
    /// Upper bound on memory for precomputed link couplings.
    pub cache_budget_mb: usize,
}

impl Default for PassBlock {
    fn default() -> Self {
        // 40 snapshots
        Self {
            min_elevation_deg: 10.0,
            max_elevation_deg: 170.0,
            step_deg: 4.0,
            cache_budget_mb: 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineBlock {
    pub threshold_db: f64,
    pub ascent: AscentConfig,
}

impl Default for BaselineBlock {
    fn default() -> Self {
        Self {
            threshold_db: DEFAULT_THRESHOLD_DB,
            ascent: AscentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainBlock {
    /// Number of training seeds `k`; seeds run `seed..seed + k`.
    pub seeds: usize,
    /// Log a progress line every this many updates (0 disables).
    pub log_every: usize,
}

impl Default for TrainBlock {
    fn default() -> Self {
        Self {
            seeds: 1,
            log_every: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Output directory (default `out`). Not part of the config hash, so the
    /// same run written to two places carries identical metadata.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub scenario: ScenarioBlock,
    pub params: ScenarioParams,
    pub pass: PassBlock,
    pub env: EnvConfig,
    pub ppo: Hyperparams,
    pub baseline: BaselineBlock,
    pub train: TrainBlock,
}

/// Parses `T1:T2` into the T1 fraction.
pub fn parse_mix(mix: &str) -> Result<f64> {
    let (a, b) = mix
        .split_once(':')
        .with_context(|| format!("mix {mix:?} is not of the form T1:T2"))?;
    let a: f64 = a
        .trim()
        .parse()
        .with_context(|| format!("bad T1 share in {mix:?}"))?;
    let b: f64 = b
        .trim()
        .parse()
        .with_context(|| format!("bad T2 share in {mix:?}"))?;
    if !(a >= 0.0 && b >= 0.0 && a + b > 0.0 && (a + b).is_finite()) {
        bail!("mix {mix:?} needs non-negative shares with a positive sum");
    }
    Ok(a / (a + b))
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        if s.ntn_densities.is_empty() {
            bail!("scenario.ntn_densities is empty");
        }
        for &d in &s.ntn_densities {
            if !(d > 0.0 && d.is_finite()) {
                bail!("NTN density {d} must be > 0");
            }
        }
        if !(s.tn_user_density >= 0.0 && s.tn_user_density.is_finite()) {
            bail!("tn_user_density {} must be >= 0", s.tn_user_density);
        }
        parse_mix(&s.mix)?;
        if s.bs_map.is_none() && s.synthetic_sites == 0 {
            bail!("either scenario.bs_map or scenario.synthetic_sites > 0 is required");
        }
        self.params.validate()?;
        self.baseline.ascent.validate()?;
        self.ppo.validate()?;
        if self.train.seeds == 0 {
            bail!("train.seeds must be >= 1");
        }
        if self.pass.cache_budget_mb == 0 {
            bail!("pass.cache_budget_mb must be >= 1");
        }
        Ok(())
    }

    pub fn drop_config(&self, ntn_density: f64) -> Result<DropConfig> {
        Ok(DropConfig {
            tn_user_density: self.scenario.tn_user_density,
            ntn_density,
            t1_fraction: parse_mix(&self.scenario.mix)?,
            count_mode: self.scenario.count_mode,
        })
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// The configuration without its output location.
    pub fn portable(&self) -> Self {
        Self {
            out: None,
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical JSON form of the effective configuration,
    /// output location excluded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.portable()).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Reads the optional config file and applies environment overrides from
/// `vars` (normally `std::env::vars()`).
pub fn load(
    path: Option<&Path>,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<RunConfig> {
    let mut table: toml::Table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => toml::Table::new(),
    };
    // sorted, so the result never depends on environment order
    let overrides: BTreeMap<String, String> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX) && k != "FR3COEX_LOG")
        .collect();
    for (k, v) in &overrides {
        apply_override(&mut table, &k[ENV_PREFIX.len()..], v)?;
    }
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .context("invalid configuration")?;
    Ok(cfg)
}

/// `SCENARIO_TN_USER_DENSITY=2e-5` sets `scenario.tn_user_density`; a name
/// without a section prefix addresses a top-level key (`SEED`).
fn apply_override(table: &mut toml::Table, name: &str, raw: &str) -> Result<()> {
    let lower = name.to_ascii_lowercase();
    let value = parse_value(raw);
    for section in SECTIONS {
        if let Some(key) = lower
            .strip_prefix(section)
            .and_then(|r| r.strip_prefix('_'))
        {
            if key.is_empty() {
                break;
            }
            let entry = table
                .entry(section)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let Some(t) = entry.as_table_mut() else {
                bail!("config key {section:?} is not a table");
            };
            t.insert(key.to_string(), value);
            return Ok(());
        }
    }
    if lower.is_empty() {
        bail!("empty override name {ENV_PREFIX}");
    }
    table.insert(lower, value);
    Ok(())
}

/// A TOML literal when it parses as one, else a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(v: &[(&str, &str)]) -> Vec<(String, String)> {
        v.iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    #[test]
    fn defaults_round_trip_and_validate() {
        let c = load(None, vec![]).unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn env_overrides_sections_and_top_level() {
        let c = load(
            None,
            vars(&[
                ("FR3COEX_SEED", "9"),
                ("FR3COEX_PPO_UPDATES", "17"),
                ("FR3COEX_SCENARIO_MIX", "3:1"),
                ("FR3COEX_SCENARIO_NTN_DENSITIES", "[1e-7, 3e-7]"),
                ("HOME", "/root"),
            ]),
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.ppo.updates, 17);
        assert_eq!(c.scenario.ntn_densities, vec![1e-7, 3e-7]);
        assert_eq!(parse_mix(&c.scenario.mix).unwrap(), 0.75);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(load(None, vars(&[("FR3COEX_PPO_LEARNING_RATE", "1")])).is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[pass]\nstep_deg = 2\nbogus = 1\n").unwrap();
        let e = load(Some(&p), vec![]).unwrap_err();
        assert!(format!("{e:#}").contains("bogus"), "{e:#}");
    }

    #[test]
    fn file_then_env_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(
            &p,
            "seed = 4\n[params]\ncarrier_hz = 10e9\n[env]\ngranularity = \"per_sector\"\n",
        )
        .unwrap();
        let c = load(Some(&p), vars(&[("FR3COEX_SEED", "5")])).unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.params.carrier_hz, 10e9);
        assert_eq!(
            c.env.granularity,
            fr3coex_core::rl_env::Granularity::PerSector
        );
    }

    #[test]
    fn hash_tracks_content_not_location() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.out = Some("elsewhere".into());
        assert_eq!(a.hash(), c.hash());
    }

    #[test]
    fn mix_parsing() {
        assert_eq!(parse_mix("1:0").unwrap(), 1.0);
        assert_eq!(parse_mix("1:1").unwrap(), 0.5);
        assert!(parse_mix("0:0").is_err());
        assert!(parse_mix("2").is_err());
        assert!(parse_mix("-1:2").is_err());
    }
}
