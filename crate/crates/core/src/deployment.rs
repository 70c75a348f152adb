//! Scenario construction: PPP node drops, base-station maps, sectorisation and
//! nearest-site association.
//!
//! BS map files are plain text with a header row
//!
//! ```text
//! id,x_m,y_m,height_m[,azimuths]
//! 17,-2500.0,310.5,25,0;120;240
//! 18,4100,-90,30
//! ```
//!
//! Coordinates are metres in the local frame centred on the footprint.
//! `azimuths` is an optional `;`-separated list of sector bearings in degrees;
//! when absent the site gets the default trisector (0/120/240°). Lines
//! starting with `#` are comments.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::antenna::{ApertureBeam, SectorPattern, TerminalKind, TerminalPattern, UeAntenna};
use crate::geometry::{offaxis_angle, EarthModel, PassSnapshot, Position3D};
use crate::propagation::{
    fspl_db, uma_los_probability, uma_pathloss_db, NoiseModel, NtnLossTable, NtnLossTerms,
    UmaLinkGeometry,
};
use crate::seeding::{self, tag};
use crate::units::wrap_deg;
use crate::{Error, Result};

pub const SCENARIO_FORMAT: &str = "fr3coex-scenario";
pub const SCENARIO_VERSION: u32 = 1;
pub const TRISECTOR_AZIMUTHS: [f64; 3] = [0.0, 120.0, 240.0];

/// Square footprint centred on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub side_m: f64,
}

impl Default for Footprint {
    fn default() -> Self {
        Self { side_m: 20_000.0 }
    }
}

impl Footprint {
    pub fn half(&self) -> f64 {
        self.side_m / 2.0
    }

    pub fn area_m2(&self) -> f64 {
        self.side_m * self.side_m
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let h = self.half();
        (-h..=h).contains(&x) && (-h..=h).contains(&y)
    }

    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64) {
        let h = self.half();
        (x.clamp(-h, h), y.clamp(-h, h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// Poisson-distributed count with mean `λA`.
    Expected,
    /// Exactly `round(λA)` points.
    #[default]
    Fixed,
}

/// Homogeneous PPP over the footprint. Returns `(x, y)` pairs.
///
/// In `Fixed` mode points are drawn sequentially from one stream, so a
/// lower-density drop with the same seed is a prefix of a higher-density one.
pub fn sample_ppp(
    density_per_m2: f64,
    footprint: &Footprint,
    seed: u64,
    count_mode: CountMode,
) -> Result<Vec<(f64, f64)>> {
    if !(density_per_m2 > 0.0 && density_per_m2.is_finite()) {
        return Err(Error::range("density_per_m2", density_per_m2, "> 0"));
    }
    let area = footprint.area_m2();
    if !(area > 0.0 && area.is_finite()) {
        return Err(Error::range("area_m2", area, "> 0"));
    }
    let mean = density_per_m2 * area;
    let mut rng = seeding::stream(seed, &[]);
    let n = match count_mode {
        CountMode::Fixed => mean.round() as usize,
        CountMode::Expected => {
            let p = Poisson::new(mean)
                .map_err(|e| Error::InvalidConfig(format!("poisson mean {mean}: {e}")))?;
            p.sample(&mut rng) as usize
        }
    };
    let (side, h) = (footprint.side_m, footprint.half());
    Ok((0..n)
        .map(|_| {
            let x = -h + side * rng.random::<f64>();
            let y = -h + side * rng.random::<f64>();
            (x, y)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsSite {
    pub id: u32,
    /// `z_m` is the antenna height.
    pub position: Position3D,
    pub sectors: Vec<SectorPattern>,
}

impl BsSite {
    pub fn validate(&self) -> Result<()> {
        if !(self.position.z_m > 0.0) || !self.position.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "site {}: height must be positive and coordinates finite",
                self.id
            )));
        }
        if self.sectors.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "site {}: no sectors",
                self.id
            )));
        }
        for (i, a) in self.sectors.iter().enumerate() {
            for b in &self.sectors[..i] {
                if wrap_deg(a.azimuth_deg - b.azimuth_deg) == 0.0 {
                    return Err(Error::InvalidConfig(format!(
                        "site {}: duplicate sector azimuth {}",
                        self.id, a.azimuth_deg
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutOfFootprint {
    #[default]
    Clamp,
    Drop,
}

fn trisector(template: &SectorPattern) -> Vec<SectorPattern> {
    TRISECTOR_AZIMUTHS
        .iter()
        .map(|&a| template.with_azimuth(a))
        .collect()
}

/// Parses a BS map (see the module docs for the format).
pub fn parse_bs_map(
    text: &str,
    footprint: &Footprint,
    template: &SectorPattern,
    out_of_footprint: OutOfFootprint,
) -> Result<Vec<BsSite>> {
    let mut sites = Vec::new();
    let mut seen = HashSet::new();
    let mut header = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let err = |msg: String| Error::BsMap { line: line_no, msg };
        if !header {
            let ok = cols.len() >= 4
                && cols[..4] == ["id", "x_m", "y_m", "height_m"]
                && (cols.len() == 4 || (cols.len() == 5 && cols[4] == "azimuths"));
            if !ok {
                return Err(err("expected header id,x_m,y_m,height_m[,azimuths]".into()));
            }
            header = true;
            continue;
        }
        if !(4..=5).contains(&cols.len()) {
            return Err(err(format!(
                "expected 4 or 5 columns, found {}",
                cols.len()
            )));
        }
        let id: u32 = cols[0]
            .parse()
            .map_err(|_| err(format!("bad id {:?}", cols[0])))?;
        let num = |s: &str, what: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| err(format!("bad {what} {s:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err(format!("non-finite {what}")))
            }
        };
        let (mut x, mut y) = (num(cols[1], "x_m")?, num(cols[2], "y_m")?);
        let h = num(cols[3], "height_m")?;
        if h <= 0.0 {
            return Err(err(format!("height must be positive, got {h}")));
        }
        if !seen.insert(id) {
            return Err(err(format!("duplicate site id {id}")));
        }
        let sectors = match cols.get(4).filter(|s| !s.is_empty()) {
            None => trisector(template),
            Some(list) => list
                .split(';')
                .map(|a| num(a.trim(), "azimuth").map(|az| template.with_azimuth(az)))
                .collect::<Result<Vec<_>>>()?,
        };
        if !footprint.contains(x, y) {
            match out_of_footprint {
                OutOfFootprint::Clamp => {
                    log::warn!("bs map line {line_no}: site {id} outside footprint, clamped");
                    (x, y) = footprint.clamp(x, y);
                }
                OutOfFootprint::Drop => {
                    log::warn!("bs map line {line_no}: site {id} outside footprint, dropped");
                    continue;
                }
            }
        }
        let site = BsSite {
            id,
            position: Position3D::new(x, y, h),
            sectors,
        };
        site.validate().map_err(|e| err(e.to_string()))?;
        sites.push(site);
    }
    if sites.is_empty() {
        return Err(Error::NoSites);
    }
    Ok(sites)
}

pub fn load_bs_map(
    path: &Path,
    footprint: &Footprint,
    template: &SectorPattern,
    out_of_footprint: OutOfFootprint,
) -> Result<Vec<BsSite>> {
    parse_bs_map(
        &std::fs::read_to_string(path)?,
        footprint,
        template,
        out_of_footprint,
    )
}

/// Writes sites in the BS map format accepted by [`parse_bs_map`].
pub fn format_bs_map(sites: &[BsSite]) -> String {
    let mut s = String::from("id,x_m,y_m,height_m,azimuths\n");
    for site in sites {
        let az: Vec<String> = site
            .sectors
            .iter()
            .map(|p| p.azimuth_deg.to_string())
            .collect();
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            site.id,
            site.position.x_m,
            site.position.y_m,
            site.position.z_m,
            az.join(";")
        ));
    }
    s
}

/// Uniformly placed trisector sites, a stand-in for a real BS map.
pub fn synthesize_bs_map(
    n_sites: usize,
    seed: u64,
    footprint: &Footprint,
    bs_height_m: f64,
    template: &SectorPattern,
) -> Result<Vec<BsSite>> {
    if n_sites == 0 {
        return Err(Error::NoSites);
    }
    let mut rng = seeding::stream(seed, &[tag::SITES]);
    let (side, h) = (footprint.side_m, footprint.half());
    Ok((0..n_sites)
        .map(|i| {
            let x = -h + side * rng.random::<f64>();
            let y = -h + side * rng.random::<f64>();
            BsSite {
                id: i as u32,
                position: Position3D::new(x, y, bs_height_m),
                sectors: trisector(template),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TnUser {
    pub id: u32,
    pub position: Position3D,
    /// Index into [`Scenario::sites`].
    pub serving_site: usize,
    /// Flat sector index (see [`Scenario::sectors`]).
    pub serving_sector: usize,
    pub max_ul_power_dbm: f64,
}

/// Nearest site by horizontal distance, then the sector whose azimuth is
/// angularly closest to the user's bearing. Ties go to the lowest site id,
/// then the lowest sector index.
pub fn associate_users(
    positions: &[Position3D],
    sites: &[BsSite],
    max_ul_power_dbm: f64,
) -> Result<Vec<TnUser>> {
    if sites.is_empty() {
        return Err(Error::NoSites);
    }
    let offsets: Vec<usize> = sites
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.sectors.len();
            Some(o)
        })
        .collect();
    Ok(positions
        .iter()
        .enumerate()
        .map(|(uid, &p)| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, s) in sites.iter().enumerate() {
                let d = p.horizontal_distance(s.position);
                if d < best_d || (d == best_d && s.id < sites[best].id) {
                    best = i;
                    best_d = d;
                }
            }
            let site = &sites[best];
            let v = p - site.position;
            let bearing = v.x_m.atan2(v.y_m).to_degrees();
            let mut best_sec = 0;
            let mut best_off = f64::INFINITY;
            for (j, sec) in site.sectors.iter().enumerate() {
                let off = wrap_deg(bearing - sec.azimuth_deg).abs();
                if off < best_off {
                    best_sec = j;
                    best_off = off;
                }
            }
            TnUser {
                id: uid as u32,
                position: p,
                serving_site: best,
                serving_sector: offsets[best] + best_sec,
                max_ul_power_dbm,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NtnTerminal {
    pub id: u32,
    pub position: Position3D,
    pub kind: TerminalKind,
    pub pattern: TerminalPattern,
}

/// Pathloss model for TN node to NTN terminal paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TnNtnPathloss {
    /// UMa with the actual 3-D geometry and a frozen LOS/NLOS draw per link.
    #[default]
    Uma,
    FreeSpace,
}

/// Physical constants and model switches shared by every node of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    pub earth: EarthModel,
    pub footprint: Footprint,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub temperature_k: f64,
    pub sat_tx_power_dbm: f64,
    pub sat_beam: ApertureBeam,
    pub gnb_max_power_dbm: f64,
    pub ue_max_power_dbm: f64,
    /// Open-loop UE target `P0 + PL(serving)`, clamped to the UE cap.
    pub ue_p0_dbm: f64,
    pub ue_antenna: UeAntenna,
    pub bs_height_m: f64,
    pub ut_height_m: f64,
    pub ntn_height_m: f64,
    pub sector: SectorPattern,
    pub tilt_range_deg: (f64, f64),
    pub t1_peak_gain_dbi: f64,
    pub t2_peak_gain_dbi: f64,
    pub tn_ntn_pathloss: TnNtnPathloss,
    /// When false every TN link is LOS.
    pub nlos_enabled: bool,
    pub ntn_shadowing: bool,
    /// Log-normal shadowing on UMa TN node to NTN terminal paths.
    pub tn_shadowing: bool,
    pub uma_sigma_los_db: f64,
    pub uma_sigma_nlos_db: f64,
    pub loss_table: NtnLossTable,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        let carrier_hz = 12e9;
        Self {
            earth: EarthModel::default(),
            footprint: Footprint::default(),
            carrier_hz,
            bandwidth_hz: 200e6,
            temperature_k: 290.0,
            sat_tx_power_dbm: 48.0,
            sat_beam: ApertureBeam::from_peak_gain(38.3, carrier_hz).expect("valid default"),
            gnb_max_power_dbm: 33.0,
            ue_max_power_dbm: 23.0,
            ue_p0_dbm: -90.0,
            ue_antenna: UeAntenna::default(),
            bs_height_m: 25.0,
            ut_height_m: 1.5,
            ntn_height_m: 1.5,
            sector: SectorPattern::default(),
            tilt_range_deg: (0.0, 15.0),
            t1_peak_gain_dbi: 33.0,
            t2_peak_gain_dbi: 17.0,
            tn_ntn_pathloss: TnNtnPathloss::Uma,
            nlos_enabled: true,
            ntn_shadowing: false,
            tn_shadowing: true,
            uma_sigma_los_db: 4.0,
            uma_sigma_nlos_db: 6.0,
            loss_table: NtnLossTable::default(),
        }
    }
}

impl ScenarioParams {
    pub fn noise(&self) -> NoiseModel {
        NoiseModel::new(self.temperature_k, self.bandwidth_hz)
    }

    pub fn validate(&self) -> Result<()> {
        self.earth.validate()?;
        self.noise().validate()?;
        self.sat_beam.validate()?;
        self.sector.validate(self.tilt_range_deg)?;
        if !(self.footprint.side_m > 0.0) {
            return Err(Error::range("footprint side", self.footprint.side_m, "> 0"));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::range("carrier_hz", self.carrier_hz, "> 0"));
        }
        let k = crate::antenna::wavenumber_per_m(self.carrier_hz);
        if ((self.sat_beam.wavenumber_per_m - k) / k).abs() > 1e-9 {
            return Err(Error::InvalidConfig(
                "satellite beam wavenumber inconsistent with carrier".into(),
            ));
        }
        // UMa effective heights are measured above a 1 m environment height
        for (what, h) in [
            ("bs_height_m", self.bs_height_m),
            ("ut_height_m", self.ut_height_m),
            ("ntn_height_m", self.ntn_height_m),
        ] {
            if !(h > 1.0) {
                return Err(Error::range(what, h, "> 1 m"));
            }
        }
        if !(self.uma_sigma_los_db >= 0.0 && self.uma_sigma_nlos_db >= 0.0) {
            return Err(Error::InvalidConfig(
                "UMa shadowing sigmas must be >= 0".into(),
            ));
        }
        let (lo, hi) = self.tilt_range_deg;
        if !(lo <= hi) {
            return Err(Error::InvalidConfig("tilt range min > max".into()));
        }
        Ok(())
    }
}

/// How NTN terminals and TN users are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DropConfig {
    pub tn_user_density: f64,
    pub ntn_density: f64,
    /// Fraction of NTN terminals that are T1 dishes.
    pub t1_fraction: f64,
    pub count_mode: CountMode,
}

impl Default for DropConfig {
    fn default() -> Self {
        Self {
            tn_user_density: 1.3e-5,
            ntn_density: 6e-8,
            t1_fraction: 1.0,
            count_mode: CountMode::Fixed,
        }
    }
}

/// A sector flattened out of its site.
#[derive(Debug, Clone, Copy)]
pub struct SectorRef<'a> {
    pub index: usize,
    pub site_index: usize,
    pub site: &'a BsSite,
    pub pattern: &'a SectorPattern,
}

impl SectorRef<'_> {
    pub fn position(&self) -> Position3D {
        self.site.position
    }
}

/// Which pair of nodes a frozen LOS draw belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    /// Site (all its sectors) to NTN terminal.
    SiteTerminal,
    /// TN user to NTN terminal.
    UserTerminal,
    /// TN user to its serving site.
    UserServing,
}

impl LinkKind {
    fn key(self) -> u64 {
        match self {
            LinkKind::SiteTerminal => 1,
            LinkKind::UserTerminal => 2,
            LinkKind::UserServing => 3,
        }
    }
}

/// Immutable world description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub params: ScenarioParams,
    pub sites: Vec<BsSite>,
    pub tn_users: Vec<TnUser>,
    pub ntn_terminals: Vec<NtnTerminal>,
}

impl Scenario {
    /// Drops users and terminals over the given sites.
    pub fn build(
        params: ScenarioParams,
        drop: &DropConfig,
        sites: Vec<BsSite>,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        if !(0.0..=1.0).contains(&drop.t1_fraction) {
            return Err(Error::range("t1_fraction", drop.t1_fraction, "[0, 1]"));
        }
        let fp = params.footprint;
        let users_xy = sample_ppp(
            drop.tn_user_density,
            &fp,
            seeding::derive(seed, &[tag::TN_USERS]),
            drop.count_mode,
        )?;
        let user_pos: Vec<Position3D> = users_xy
            .iter()
            .map(|&(x, y)| Position3D::new(x, y, params.ut_height_m))
            .collect();
        let tn_users = associate_users(&user_pos, &sites, params.ue_max_power_dbm)?;

        let term_xy = sample_ppp(
            drop.ntn_density,
            &fp,
            seeding::derive(seed, &[tag::NTN_TERMINALS]),
            drop.count_mode,
        )?;
        let n_t1 = (term_xy.len() as f64 * drop.t1_fraction).round() as usize;
        let t1 =
            TerminalPattern::new(TerminalKind::T1, params.t1_peak_gain_dbi, params.carrier_hz)?;
        let t2 =
            TerminalPattern::new(TerminalKind::T2, params.t2_peak_gain_dbi, params.carrier_hz)?;
        let ntn_terminals = term_xy
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                let pattern = if i < n_t1 { t1 } else { t2 };
                NtnTerminal {
                    id: i as u32,
                    position: Position3D::new(x, y, params.ntn_height_m),
                    kind: pattern.kind,
                    pattern,
                }
            })
            .collect();

        let s = Self {
            format: SCENARIO_FORMAT.into(),
            version: SCENARIO_VERSION,
            seed,
            params,
            sites,
            tn_users,
            ntn_terminals,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != SCENARIO_FORMAT {
            return Err(Error::InvalidConfig(format!(
                "not a scenario file (format {:?})",
                self.format
            )));
        }
        if self.version != SCENARIO_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported scenario version {} (expected {SCENARIO_VERSION})",
                self.version
            )));
        }
        self.params.validate()?;
        if self.sites.is_empty() {
            return Err(Error::NoSites);
        }
        if self.ntn_terminals.is_empty() {
            return Err(Error::InvalidConfig("no NTN terminals".into()));
        }
        let fp = self.params.footprint;
        let mut ids = HashSet::new();
        for s in &self.sites {
            s.validate()?;
            if !ids.insert(s.id) {
                return Err(Error::InvalidConfig(format!("duplicate site id {}", s.id)));
            }
            if !fp.contains(s.position.x_m, s.position.y_m) {
                return Err(Error::InvalidConfig(format!(
                    "site {} outside footprint",
                    s.id
                )));
            }
        }
        let n_sectors = self.sector_count();
        for u in &self.tn_users {
            if u.serving_site >= self.sites.len() || u.serving_sector >= n_sectors {
                return Err(Error::InvalidConfig(format!("user {} serving index", u.id)));
            }
            if !fp.contains(u.position.x_m, u.position.y_m) {
                return Err(Error::InvalidConfig(format!(
                    "user {} outside footprint",
                    u.id
                )));
            }
        }
        for t in &self.ntn_terminals {
            if !fp.contains(t.position.x_m, t.position.y_m) {
                return Err(Error::InvalidConfig(format!(
                    "terminal {} outside footprint",
                    t.id
                )));
            }
        }
        Ok(())
    }

    pub fn sector_count(&self) -> usize {
        self.sites.iter().map(|s| s.sectors.len()).sum()
    }

    /// All sectors in flat order: sites in order, then sectors within a site.
    pub fn sectors(&self) -> Vec<SectorRef<'_>> {
        let mut out = Vec::with_capacity(self.sector_count());
        for (si, site) in self.sites.iter().enumerate() {
            for pattern in &site.sectors {
                out.push(SectorRef {
                    index: out.len(),
                    site_index: si,
                    site,
                    pattern,
                });
            }
        }
        out
    }

    pub fn noise(&self) -> NoiseModel {
        self.params.noise()
    }

    /// Frozen LOS state of a TN link. `a` and `b` are node ids.
    pub fn link_is_los(
        &self,
        kind: LinkKind,
        a: u32,
        b: u32,
        d2d_m: f64,
        low_height_m: f64,
    ) -> bool {
        if !self.params.nlos_enabled {
            return true;
        }
        let u = seeding::keyed_uniform(self.seed, &[tag::LOS, kind.key(), a as u64, b as u64]);
        u < uma_los_probability(d2d_m, low_height_m)
    }

    /// Pathloss between a TN node and an NTN terminal.
    pub fn tn_to_terminal_pathloss_db(
        &self,
        kind: LinkKind,
        node_id: u32,
        node: Position3D,
        terminal: &NtnTerminal,
    ) -> Result<f64> {
        let p = &self.params;
        match p.tn_ntn_pathloss {
            TnNtnPathloss::FreeSpace => {
                let d = node.distance(terminal.position);
                if d == 0.0 {
                    return Err(Error::DegenerateGeometry("coincident nodes"));
                }
                fspl_db(d, p.carrier_hz)
            }
            TnNtnPathloss::Uma => {
                let d2d = node.horizontal_distance(terminal.position);
                let low = node.z_m.min(terminal.position.z_m);
                let los = self.link_is_los(kind, node_id, terminal.id, d2d, low);
                let pl = uma_pathloss_db(&UmaLinkGeometry::between(
                    node,
                    terminal.position,
                    p.carrier_hz,
                    los,
                ))?;
                Ok(pl + self.tn_shadow_db(kind, node_id, terminal.id, los))
            }
        }
    }

    /// Frozen UMa shadow-fading draw of a TN node to NTN terminal link
    /// (0 when TN shadowing is disabled).
    pub fn tn_shadow_db(&self, kind: LinkKind, a: u32, b: u32, los: bool) -> f64 {
        let p = &self.params;
        if !p.tn_shadowing {
            return 0.0;
        }
        let sigma = if los {
            p.uma_sigma_los_db
        } else {
            p.uma_sigma_nlos_db
        };
        sigma
            * seeding::keyed_normal(
                self.seed,
                &[tag::TN_SHADOWING, kind.key(), a as u64, b as u64],
            )
    }

    /// Pathloss from a TN user to its serving site (drives the open-loop UL target).
    pub fn serving_pathloss_db(&self, user: &TnUser) -> Result<f64> {
        let site = &self.sites[user.serving_site];
        let d2d = user.position.horizontal_distance(site.position);
        let los = self.link_is_los(
            LinkKind::UserServing,
            user.id,
            site.id,
            d2d,
            user.position.z_m,
        );
        uma_pathloss_db(&UmaLinkGeometry::between(
            user.position,
            site.position,
            self.params.carrier_hz,
            los,
        ))
    }

    /// Open-loop UL power target before the cap.
    pub fn ue_target_dbm(&self, user: &TnUser) -> Result<f64> {
        Ok(self.params.ue_p0_dbm + self.serving_pathloss_db(user)?)
    }

    /// Unit vector from a terminal towards the satellite.
    pub fn terminal_boresight(
        &self,
        terminal: &NtnTerminal,
        snapshot: &PassSnapshot,
    ) -> Result<Position3D> {
        (snapshot.satellite_position - terminal.position)
            .unit()
            .ok_or(Error::DegenerateGeometry("terminal at satellite position"))
    }

    /// NTN loss terms on the satellite to terminal link, including the frozen
    /// shadow-fading draw when shadowing is enabled.
    pub fn ntn_loss_terms(&self, terminal: &NtnTerminal, snapshot: &PassSnapshot) -> NtnLossTerms {
        let z = if self.params.ntn_shadowing {
            seeding::keyed_normal(
                self.seed,
                &[tag::SHADOWING, snapshot.index as u64, terminal.id as u64],
            )
        } else {
            0.0
        };
        self.params.loss_table.terms_at(snapshot.elevation_deg, z)
    }

    /// Off-axis angle of a terminal from the satellite beam axis, which points
    /// at the footprint centre.
    pub fn satellite_offaxis_deg(
        &self,
        terminal: &NtnTerminal,
        snapshot: &PassSnapshot,
    ) -> Result<f64> {
        let sat = snapshot.satellite_position;
        let axis = (Position3D::ORIGIN - sat)
            .unit()
            .ok_or(Error::DegenerateGeometry("satellite at footprint centre"))?;
        offaxis_angle(sat, axis, terminal.position)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
