//! TN to NTN interference, aggregate INR, NTN SINR/rate and per-snapshot
//! network metrics.
//!
//! Two evaluation paths exist. [`snapshot_metrics`] walks every link through
//! the propagation and antenna models. [`LinkCache`] precomputes the
//! control-independent part of every coupling for one snapshot and evaluates
//! a [`ControlState`] in microseconds; [`PassCache`] memoises those per
//! snapshot for a whole pass. Both paths agree to floating-point rounding.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna::{
    gnb_sector_gain_dbi, sat_beam_gain_dbi, sector_angles, terminal_gain_dbi, SectorPattern,
    TerminalKind,
};
use crate::deployment::{LinkKind, NtnTerminal, Scenario, SectorRef, TnUser};
use crate::geometry::{offaxis_angle, PassSnapshot};
use crate::propagation::{ntn_pathloss_db, thermal_noise_dbm};
use crate::units::{db_to_linear, dbm_to_mw, linear_to_db, mw_to_dbm, INR_FLOOR_DB};
use crate::{Error, Result};

pub const MIN_THRESHOLD_DB: f64 = -12.2;
pub const MAX_THRESHOLD_DB: f64 = -6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorControl {
    pub tx_power_dbm: f64,
    pub downtilt_deg: f64,
    pub muted: bool,
    /// Uplink power cap for users served by this sector.
    pub ue_power_cap_dbm: f64,
}

/// Controller output for one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlState {
    pub sectors: Vec<SectorControl>,
    pub protection_threshold_db: f64,
}

impl ControlState {
    pub fn uniform(n_sectors: usize, sector: SectorControl, threshold_db: f64) -> Self {
        Self {
            sectors: vec![sector; n_sectors],
            protection_threshold_db: threshold_db,
        }
    }

    /// Every sector on at full power and default tilt, UEs at their cap.
    pub fn no_coordination(scenario: &Scenario, threshold_db: f64) -> Self {
        let p = &scenario.params;
        Self::uniform(
            scenario.sector_count(),
            SectorControl {
                tx_power_dbm: p.gnb_max_power_dbm,
                downtilt_deg: p.sector.downtilt_deg,
                muted: false,
                ue_power_cap_dbm: p.ue_max_power_dbm,
            },
            threshold_db,
        )
    }

    pub fn active_fraction(&self) -> f64 {
        if self.sectors.is_empty() {
            return 0.0;
        }
        self.sectors.iter().filter(|s| !s.muted).count() as f64 / self.sectors.len() as f64
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        let n = scenario.sector_count();
        if self.sectors.len() != n {
            return Err(Error::DimensionMismatch {
                what: "control sectors",
                expected: n,
                actual: self.sectors.len(),
            });
        }
        let t = self.protection_threshold_db;
        if !(MIN_THRESHOLD_DB..=MAX_THRESHOLD_DB).contains(&t) {
            return Err(Error::range("protection_threshold_db", t, "[-12.2, -6]"));
        }
        let p = &scenario.params;
        let (lo, hi) = p.tilt_range_deg;
        for s in &self.sectors {
            if !(s.tx_power_dbm <= p.gnb_max_power_dbm) {
                return Err(Error::range(
                    "tx_power_dbm",
                    s.tx_power_dbm,
                    "<= gNB max power",
                ));
            }
            if !(s.ue_power_cap_dbm <= p.ue_max_power_dbm) {
                return Err(Error::range(
                    "ue_power_cap_dbm",
                    s.ue_power_cap_dbm,
                    "<= UE max power",
                ));
            }
            if !(lo..=hi).contains(&s.downtilt_deg) {
                return Err(Error::range(
                    "downtilt_deg",
                    s.downtilt_deg,
                    "mechanical tilt range",
                ));
            }
        }
        Ok(())
    }
}

/// How interference and noise combine into the reported INR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InrMode {
    /// `10 log10((ΣI_DL + ΣI_UL) / kTB)`.
    #[default]
    Linear,
    /// `10 log10 ΣI_DL + 10 log10 ΣI_UL - N` with powers in mW and N in dBm.
    /// A zero sum drops its term.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    pub inr_mode: InrMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InrReport {
    pub terminal_id: u32,
    pub dl_interference_mw: f64,
    pub ul_interference_mw: f64,
    pub inr_db: f64,
    pub interfered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalMetrics {
    pub kind: TerminalKind,
    pub inr: InrReport,
    pub sinr_db: f64,
    pub rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMetrics {
    pub snapshot_index: usize,
    pub elevation_deg: f64,
    pub threshold_db: f64,
    /// Fraction of terminals with INR above the threshold.
    pub eta: f64,
    /// Fraction of unmuted sectors.
    pub chi: f64,
    /// Aggregate NTN throughput.
    pub rate_bps: f64,
    /// In terminal order.
    pub terminals: Vec<TerminalMetrics>,
}

impl SnapshotMetrics {
    pub fn inr_db(&self) -> impl Iterator<Item = f64> + '_ {
        self.terminals.iter().map(|t| t.inr.inr_db)
    }
}

/// Open-loop UL power `min(P0 + PL_serving, cap)`.
pub fn ue_tx_power_dbm(scenario: &Scenario, user: &TnUser, control: &ControlState) -> Result<f64> {
    let cap = control.sectors[user.serving_sector].ue_power_cap_dbm;
    Ok(scenario.ue_target_dbm(user)?.min(cap))
}

/// `P + G_BS(θ', φ') + G_UT(θ'') - PL` for one unmuted sector.
pub fn dl_interference_dbm(
    scenario: &Scenario,
    sector: &SectorRef<'_>,
    terminal: &NtnTerminal,
    control: &ControlState,
    snapshot: &PassSnapshot,
) -> Result<f64> {
    let c = &control.sectors[sector.index];
    let site = sector.position();
    let (theta, phi) = sector_angles(site, sector.pattern.azimuth_deg, terminal.position)?;
    let g_bs = gnb_sector_gain_dbi(&sector.pattern.with_downtilt(c.downtilt_deg), theta, phi);
    let boresight = scenario.terminal_boresight(terminal, snapshot)?;
    let off = offaxis_angle(terminal.position, boresight, site)?;
    let g_ut = terminal_gain_dbi(&terminal.pattern, off)?;
    let pl = scenario.tn_to_terminal_pathloss_db(
        LinkKind::SiteTerminal,
        sector.site.id,
        site,
        terminal,
    )?;
    Ok(c.tx_power_dbm + g_bs + g_ut - pl)
}

/// `P_UE + G_UE + G_UT(θ'') - PL` for one user whose serving sector is unmuted.
pub fn ul_interference_dbm(
    scenario: &Scenario,
    user: &TnUser,
    terminal: &NtnTerminal,
    control: &ControlState,
    snapshot: &PassSnapshot,
) -> Result<f64> {
    let p = ue_tx_power_dbm(scenario, user, control)?;
    let boresight = scenario.terminal_boresight(terminal, snapshot)?;
    let off = offaxis_angle(terminal.position, boresight, user.position)?;
    let g_ut = terminal_gain_dbi(&terminal.pattern, off)?;
    let g_ue = scenario.params.ue_antenna.gain_dbi(off);
    let pl = scenario.tn_to_terminal_pathloss_db(
        LinkKind::UserTerminal,
        user.id,
        user.position,
        terminal,
    )?;
    Ok(p + g_ue + g_ut - pl)
}

/// Aggregate INR in dB from linear interference sums, floored at
/// [`INR_FLOOR_DB`].
pub fn aggregate_inr_db(dl_mw: f64, ul_mw: f64, noise_mw: f64, mode: InrMode) -> f64 {
    let noise_dbm = mw_to_dbm(noise_mw);
    let inr = match mode {
        InrMode::Linear => {
            let total = dl_mw + ul_mw;
            if total > 0.0 {
                linear_to_db(total / noise_mw)
            } else {
                INR_FLOOR_DB
            }
        }
        InrMode::PaperLiteral => match (dl_mw > 0.0, ul_mw > 0.0) {
            (true, true) => mw_to_dbm(dl_mw) + mw_to_dbm(ul_mw) - noise_dbm,
            (true, false) => mw_to_dbm(dl_mw) - noise_dbm,
            (false, true) => mw_to_dbm(ul_mw) - noise_dbm,
            (false, false) => INR_FLOOR_DB,
        },
    };
    inr.max(INR_FLOOR_DB)
}

/// Interference sums and INR at one terminal, summed in sector then user order.
pub fn inr_report(
    scenario: &Scenario,
    terminal: &NtnTerminal,
    control: &ControlState,
    snapshot: &PassSnapshot,
    opts: &EvalOptions,
) -> Result<InrReport> {
    let mut dl = 0.0;
    for s in scenario.sectors() {
        if !control.sectors[s.index].muted {
            dl += dbm_to_mw(dl_interference_dbm(
                scenario, &s, terminal, control, snapshot,
            )?);
        }
    }
    let mut ul = 0.0;
    for u in &scenario.tn_users {
        if !control.sectors[u.serving_sector].muted {
            ul += dbm_to_mw(ul_interference_dbm(
                scenario, u, terminal, control, snapshot,
            )?);
        }
    }
    let noise_mw = dbm_to_mw(thermal_noise_dbm(&scenario.noise())?);
    let inr_db = aggregate_inr_db(dl, ul, noise_mw, opts.inr_mode);
    Ok(InrReport {
        terminal_id: terminal.id,
        dl_interference_mw: dl,
        ul_interference_mw: ul,
        inr_db,
        interfered: inr_db > control.protection_threshold_db,
    })
}

/// Desired satellite signal at a terminal, `P_sat + G_sat + G_UT(0) - PL_NTN`.
pub fn ntn_desired_rx_dbm(
    scenario: &Scenario,
    terminal: &NtnTerminal,
    snapshot: &PassSnapshot,
) -> Result<f64> {
    let p = &scenario.params;
    let off = scenario.satellite_offaxis_deg(terminal, snapshot)?;
    let g_sat = sat_beam_gain_dbi(&p.sat_beam, off)?;
    let g_ut = terminal_gain_dbi(&terminal.pattern, 0.0)?;
    let slant = snapshot.satellite_position.distance(terminal.position);
    let terms = scenario.ntn_loss_terms(terminal, snapshot);
    let pl = ntn_pathloss_db(slant, p.carrier_hz, &terms)?;
    Ok(p.sat_tx_power_dbm + g_sat + g_ut - pl)
}

/// SINR with the linear interference sums and the equal-share rate
/// `(B / N_terminals) log2(1 + γ)`.
pub fn ntn_sinr_and_rate(
    scenario: &Scenario,
    terminal: &NtnTerminal,
    snapshot: &PassSnapshot,
    report: &InrReport,
) -> Result<(f64, f64)> {
    let signal = dbm_to_mw(ntn_desired_rx_dbm(scenario, terminal, snapshot)?);
    let noise = dbm_to_mw(thermal_noise_dbm(&scenario.noise())?);
    Ok(sinr_and_rate(
        signal,
        report.dl_interference_mw + report.ul_interference_mw,
        noise,
        share_hz(scenario),
    ))
}

fn share_hz(scenario: &Scenario) -> f64 {
    scenario.params.bandwidth_hz / scenario.ntn_terminals.len() as f64
}

fn sinr_and_rate(signal_mw: f64, interference_mw: f64, noise_mw: f64, share_hz: f64) -> (f64, f64) {
    let gamma = signal_mw / (interference_mw + noise_mw);
    (linear_to_db(gamma), share_hz * (1.0 + gamma).log2())
}

fn assemble(
    scenario: &Scenario,
    snapshot: &PassSnapshot,
    control: &ControlState,
    terminals: Vec<TerminalMetrics>,
) -> SnapshotMetrics {
    let n = terminals.len() as f64;
    let interfered = terminals.iter().filter(|t| t.inr.interfered).count() as f64;
    let rate = terminals.iter().map(|t| t.rate_bps).sum();
    debug_assert_eq!(terminals.len(), scenario.ntn_terminals.len());
    SnapshotMetrics {
        snapshot_index: snapshot.index,
        elevation_deg: snapshot.elevation_deg,
        threshold_db: control.protection_threshold_db,
        eta: interfered / n,
        chi: control.active_fraction(),
        rate_bps: rate,
        terminals,
    }
}

/// Reference evaluation of one snapshot through the full link models.
pub fn snapshot_metrics(
    scenario: &Scenario,
    control: &ControlState,
    snapshot: &PassSnapshot,
    opts: &EvalOptions,
) -> Result<SnapshotMetrics> {
    control.validate(scenario)?;
    let terminals = scenario
        .ntn_terminals
        .par_iter()
        .map(|t| {
            let inr = inr_report(scenario, t, control, snapshot, opts)?;
            let (sinr_db, rate_bps) = ntn_sinr_and_rate(scenario, t, snapshot, &inr)?;
            Ok(TerminalMetrics {
                kind: t.kind,
                inr,
                sinr_db,
                rate_bps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(scenario, snapshot, control, terminals))
}

/// Total NTN throughput with every TN transmitter silent.
pub fn zero_interference_rate_bps(scenario: &Scenario, snapshot: &PassSnapshot) -> Result<f64> {
    let noise = dbm_to_mw(thermal_noise_dbm(&scenario.noise())?);
    let share = share_hz(scenario);
    let mut total = 0.0;
    for t in &scenario.ntn_terminals {
        let s = dbm_to_mw(ntn_desired_rx_dbm(scenario, t, snapshot)?);
        total += sinr_and_rate(s, 0.0, noise, share).1;
    }
    Ok(total)
}

/// Users grouped by serving sector, each group sorted by open-loop target.
#[derive(Debug, Clone)]
pub struct UplinkLayout {
    /// User indices in layout order.
    order: Vec<usize>,
    /// Targets in mW, layout order.
    targets_mw: Vec<f64>,
    /// `starts[s]..starts[s + 1]` is sector `s`'s slice of `order`.
    starts: Vec<usize>,
}

impl UplinkLayout {
    pub fn build(scenario: &Scenario) -> Result<Self> {
        let n_sectors = scenario.sector_count();
        let targets: Vec<f64> = scenario
            .tn_users
            .iter()
            .map(|u| scenario.ue_target_dbm(u).map(dbm_to_mw))
            .collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..scenario.tn_users.len()).collect();
        order.sort_by(|&a, &b| {
            let (ua, ub) = (&scenario.tn_users[a], &scenario.tn_users[b]);
            ua.serving_sector
                .cmp(&ub.serving_sector)
                .then(targets[a].total_cmp(&targets[b]))
                .then(ua.id.cmp(&ub.id))
        });
        let mut starts = vec![0; n_sectors + 1];
        for u in &scenario.tn_users {
            starts[u.serving_sector + 1] += 1;
        }
        for s in 0..n_sectors {
            starts[s + 1] += starts[s];
        }
        let targets_mw = order.iter().map(|&i| targets[i]).collect();
        Ok(Self {
            order,
            targets_mw,
            starts,
        })
    }

    fn n_sectors(&self) -> usize {
        self.starts.len() - 1
    }

    /// Length of one terminal's prefix/suffix table: one extra slot per sector.
    fn table_len(&self) -> usize {
        self.order.len() + self.n_sectors()
    }
}

/// Control-independent link data for one snapshot.
#[derive(Debug, Clone)]
pub struct LinkCache {
    snapshot: PassSnapshot,
    n_sectors: usize,
    layout: Arc<UplinkLayout>,
    sector_patterns: Vec<SectorPattern>,
    /// `[terminal * n_sectors + sector]`.
    dl_theta_deg: Vec<f64>,
    dl_phi_deg: Vec<f64>,
    /// `G_UT - PL` in dB.
    dl_rest_db: Vec<f64>,
    /// Per terminal, per sector block of `m + 1` entries: prefix sums of
    /// `target · coupling` and suffix sums of `coupling`.
    ul_prefix: Vec<f64>,
    ul_suffix: Vec<f64>,
    signal_mw: Vec<f64>,
    noise_mw: f64,
    share_hz: f64,
    kinds: Vec<TerminalKind>,
    ids: Vec<u32>,
}

impl LinkCache {
    pub fn build(scenario: &Scenario, snapshot: &PassSnapshot) -> Result<Self> {
        Self::build_with_layout(scenario, snapshot, Arc::new(UplinkLayout::build(scenario)?))
    }

    pub fn build_with_layout(
        scenario: &Scenario,
        snapshot: &PassSnapshot,
        layout: Arc<UplinkLayout>,
    ) -> Result<Self> {
        let sectors = scenario.sectors();
        let n_sectors = sectors.len();
        let table = layout.table_len();
        let ue_gain = &scenario.params.ue_antenna;

        struct PerTerminal {
            theta: Vec<f64>,
            phi: Vec<f64>,
            rest: Vec<f64>,
            prefix: Vec<f64>,
            suffix: Vec<f64>,
            signal_mw: f64,
        }

        let per: Vec<PerTerminal> = scenario
            .ntn_terminals
            .par_iter()
            .map(|t| -> Result<PerTerminal> {
                let boresight = scenario.terminal_boresight(t, snapshot)?;
                let mut theta = Vec::with_capacity(n_sectors);
                let mut phi = Vec::with_capacity(n_sectors);
                let mut rest = Vec::with_capacity(n_sectors);
                for s in &sectors {
                    let site = s.position();
                    let (th, ph) = sector_angles(site, s.pattern.azimuth_deg, t.position)?;
                    let off = offaxis_angle(t.position, boresight, site)?;
                    let g_ut = terminal_gain_dbi(&t.pattern, off)?;
                    let pl = scenario.tn_to_terminal_pathloss_db(
                        LinkKind::SiteTerminal,
                        s.site.id,
                        site,
                        t,
                    )?;
                    theta.push(th);
                    phi.push(ph);
                    rest.push(g_ut - pl);
                }
                let mut prefix = vec![0.0; table];
                let mut suffix = vec![0.0; table];
                for s in 0..n_sectors {
                    let (a, b) = (layout.starts[s], layout.starts[s + 1]);
                    let base = a + s;
                    let mut coupling = Vec::with_capacity(b - a);
                    for &ui in &layout.order[a..b] {
                        let u = &scenario.tn_users[ui];
                        let off = offaxis_angle(t.position, boresight, u.position)?;
                        let g = ue_gain.gain_dbi(off) + terminal_gain_dbi(&t.pattern, off)?;
                        let pl = scenario.tn_to_terminal_pathloss_db(
                            LinkKind::UserTerminal,
                            u.id,
                            u.position,
                            t,
                        )?;
                        coupling.push(db_to_linear(g - pl));
                    }
                    for (k, c) in coupling.iter().enumerate() {
                        prefix[base + k + 1] = prefix[base + k] + layout.targets_mw[a + k] * c;
                    }
                    for k in (0..coupling.len()).rev() {
                        suffix[base + k] = suffix[base + k + 1] + coupling[k];
                    }
                }
                let signal_mw = dbm_to_mw(ntn_desired_rx_dbm(scenario, t, snapshot)?);
                Ok(PerTerminal {
                    theta,
                    phi,
                    rest,
                    prefix,
                    suffix,
                    signal_mw,
                })
            })
            .collect::<Result<_>>()?;

        let mut c = Self {
            snapshot: *snapshot,
            n_sectors,
            layout,
            sector_patterns: sectors.iter().map(|s| *s.pattern).collect(),
            dl_theta_deg: Vec::with_capacity(per.len() * n_sectors),
            dl_phi_deg: Vec::with_capacity(per.len() * n_sectors),
            dl_rest_db: Vec::with_capacity(per.len() * n_sectors),
            ul_prefix: Vec::with_capacity(per.len() * table),
            ul_suffix: Vec::with_capacity(per.len() * table),
            signal_mw: Vec::with_capacity(per.len()),
            noise_mw: dbm_to_mw(thermal_noise_dbm(&scenario.noise())?),
            share_hz: share_hz(scenario),
            kinds: scenario.ntn_terminals.iter().map(|t| t.kind).collect(),
            ids: scenario.ntn_terminals.iter().map(|t| t.id).collect(),
        };
        for p in per {
            c.dl_theta_deg.extend(p.theta);
            c.dl_phi_deg.extend(p.phi);
            c.dl_rest_db.extend(p.rest);
            c.ul_prefix.extend(p.prefix);
            c.ul_suffix.extend(p.suffix);
            c.signal_mw.push(p.signal_mw);
        }
        Ok(c)
    }

    pub fn snapshot(&self) -> &PassSnapshot {
        &self.snapshot
    }

    pub fn approx_bytes(&self) -> usize {
        8 * (3 * self.dl_rest_db.len() + 2 * self.ul_prefix.len() + self.signal_mw.len())
    }

    /// Zero-interference throughput of this snapshot.
    pub fn clean_rate_bps(&self) -> f64 {
        self.signal_mw
            .iter()
            .map(|&s| sinr_and_rate(s, 0.0, self.noise_mw, self.share_hz).1)
            .sum()
    }

    /// Same semantics as [`snapshot_metrics`] for the cached snapshot.
    /// `scenario` is used only for validation.
    pub fn evaluate(
        &self,
        scenario: &Scenario,
        control: &ControlState,
        opts: &EvalOptions,
    ) -> Result<SnapshotMetrics> {
        control.validate(scenario)?;
        let layout = &*self.layout;
        let table = layout.table_len();
        let gains: Vec<Option<(SectorPattern, f64)>> = control
            .sectors
            .iter()
            .zip(&self.sector_patterns)
            .map(|(c, p)| (!c.muted).then(|| (p.with_downtilt(c.downtilt_deg), c.tx_power_dbm)))
            .collect();
        let caps_mw: Vec<f64> = control
            .sectors
            .iter()
            .map(|c| dbm_to_mw(c.ue_power_cap_dbm))
            .collect();
        let terminals = (0..self.signal_mw.len())
            .map(|n| {
                let row = n * self.n_sectors;
                let mut dl = 0.0;
                for (s, g) in gains.iter().enumerate() {
                    if let Some((pattern, power)) = g {
                        let i = row + s;
                        let g_bs =
                            gnb_sector_gain_dbi(pattern, self.dl_theta_deg[i], self.dl_phi_deg[i]);
                        dl += dbm_to_mw(power + g_bs + self.dl_rest_db[i]);
                    }
                }
                let mut ul = 0.0;
                let tbase = n * table;
                for (s, g) in gains.iter().enumerate() {
                    if g.is_none() {
                        continue;
                    }
                    let (a, b) = (layout.starts[s], layout.starts[s + 1]);
                    let cap = caps_mw[s];
                    let k = layout.targets_mw[a..b].partition_point(|&t| t <= cap);
                    let i = tbase + a + s + k;
                    ul += self.ul_prefix[i] + cap * self.ul_suffix[i];
                }
                let inr_db = aggregate_inr_db(dl, ul, self.noise_mw, opts.inr_mode);
                let (sinr_db, rate_bps) =
                    sinr_and_rate(self.signal_mw[n], dl + ul, self.noise_mw, self.share_hz);
                TerminalMetrics {
                    kind: self.kinds[n],
                    inr: InrReport {
                        terminal_id: self.ids[n],
                        dl_interference_mw: dl,
                        ul_interference_mw: ul,
                        inr_db,
                        interfered: inr_db > control.protection_threshold_db,
                    },
                    sinr_db,
                    rate_bps,
                }
            })
            .collect();
        Ok(assemble(scenario, &self.snapshot, control, terminals))
    }
}

/// Lazily built [`LinkCache`]s for every snapshot of a pass. Caches are kept
/// while the estimated footprint stays inside the memory budget and rebuilt on
/// demand otherwise. Safe to share between threads.
#[derive(Debug)]
pub struct PassCache {
    scenario: Arc<Scenario>,
    snapshots: Vec<PassSnapshot>,
    layout: Arc<UplinkLayout>,
    slots: Vec<OnceLock<Arc<LinkCache>>>,
    memoize: bool,
}

pub const DEFAULT_CACHE_BUDGET_BYTES: usize = 1 << 30;

impl PassCache {
    pub fn new(
        scenario: Arc<Scenario>,
        snapshots: Vec<PassSnapshot>,
        memory_budget_bytes: usize,
    ) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::Empty("pass snapshots"));
        }
        let layout = Arc::new(UplinkLayout::build(&scenario)?);
        let per_snapshot = 8
            * scenario.ntn_terminals.len()
            * (3 * scenario.sector_count() + 2 * layout.table_len() + 1);
        let memoize = per_snapshot.saturating_mul(snapshots.len()) <= memory_budget_bytes;
        if !memoize {
            log::warn!(
                "link cache for {} snapshots exceeds {} bytes; rebuilding per snapshot",
                snapshots.len(),
                memory_budget_bytes
            );
        }
        let slots = snapshots.iter().map(|_| OnceLock::new()).collect();
        Ok(Self {
            scenario,
            snapshots,
            layout,
            slots,
            memoize,
        })
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn snapshots(&self) -> &[PassSnapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn link_cache(&self, i: usize) -> Result<Arc<LinkCache>> {
        let snap = self.snapshots.get(i).ok_or(Error::DimensionMismatch {
            what: "snapshot index",
            expected: self.snapshots.len(),
            actual: i,
        })?;
        if let Some(c) = self.slots[i].get() {
            return Ok(c.clone());
        }
        let built = Arc::new(LinkCache::build_with_layout(
            &self.scenario,
            snap,
            self.layout.clone(),
        )?);
        if self.memoize {
            // another thread may have won the race; either value is identical
            let _ = self.slots[i].set(built.clone());
        }
        Ok(built)
    }

    /// Builds every memoised cache up front.
    pub fn prewarm(&self) -> Result<()> {
        if self.memoize {
            (0..self.len()).try_for_each(|i| self.link_cache(i).map(|_| ()))?;
        }
        Ok(())
    }

    pub fn evaluate(
        &self,
        i: usize,
        control: &ControlState,
        opts: &EvalOptions,
    ) -> Result<SnapshotMetrics> {
        self.link_cache(i)?.evaluate(&self.scenario, control, opts)
    }
}
