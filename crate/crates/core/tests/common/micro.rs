//! Randomised micro-scenarios and an independent straight-line INR oracle.
//!
//! The oracle shares no helper with the library: slant range, satellite
//! position, off-axis angles, Bessel J1, sector pattern, UMa and noise are all
//! recomputed here from their closed forms. The only things taken from the
//! scenario are the node data and the frozen random draws (LOS flags and UMa
//! shadowing), which are inputs, not models.
//!
//! Shared by the core integration tests and the CLI acceptance suite.

#![allow(dead_code)]

use fr3coex_core::antenna::{SectorPattern, TerminalKind, TerminalPattern};
use fr3coex_core::deployment::{
    associate_users, BsSite, Footprint, LinkKind, NtnTerminal, ScenarioParams, TnNtnPathloss,
};
use fr3coex_core::geometry::{generate_pass, PassSnapshot, Position3D};
use fr3coex_core::interference::{ControlState, InrMode, SectorControl};
use fr3coex_core::seeding;
use fr3coex_core::Scenario;
use rand::Rng;

pub struct Micro {
    pub scenario: Scenario,
    pub snapshot: PassSnapshot,
    pub control: ControlState,
}

/// Knobs for [`micro_scenario`].
#[derive(Clone, Copy)]
pub struct MicroShape {
    pub max_sectors: usize,
    pub max_users: usize,
    pub max_terminals: usize,
}

impl Default for MicroShape {
    fn default() -> Self {
        Self {
            max_sectors: 3,
            max_users: 3,
            max_terminals: 2,
        }
    }
}

const SIDE_M: f64 = 3_000.0;

fn point<R: Rng>(rng: &mut R, z: f64) -> Position3D {
    let h = SIDE_M / 2.0;
    Position3D::new(rng.random_range(-h..h), rng.random_range(-h..h), z)
}

/// A random scenario with at most `shape` nodes, a random pass elevation and
/// a random (valid) control state.
pub fn micro_scenario(seed: u64, shape: MicroShape) -> Micro {
    let mut rng = seeding::stream(seed, &[0x000A_11CE]);
    let mut params = ScenarioParams {
        footprint: Footprint { side_m: SIDE_M },
        nlos_enabled: rng.random_bool(0.5),
        tn_shadowing: rng.random_bool(0.5),
        tn_ntn_pathloss: if rng.random_bool(0.8) {
            TnNtnPathloss::Uma
        } else {
            TnNtnPathloss::FreeSpace
        },
        ..ScenarioParams::default()
    };
    params.bs_height_m = rng.random_range(10.0..40.0);
    let template = params.sector;

    // one multi-sector site, or several single-sector sites
    let n_sectors = rng.random_range(1..=shape.max_sectors);
    let sites: Vec<BsSite> = if rng.random_bool(0.5) {
        let step = 360.0 / n_sectors as f64;
        let base: f64 = rng.random_range(0.0..step);
        vec![BsSite {
            id: 7,
            position: point(&mut rng, params.bs_height_m),
            sectors: (0..n_sectors)
                .map(|k| template.with_azimuth(base + step * k as f64))
                .collect(),
        }]
    } else {
        (0..n_sectors)
            .map(|k| BsSite {
                id: 3 * k as u32 + 1,
                position: point(&mut rng, params.bs_height_m),
                sectors: vec![template.with_azimuth(rng.random_range(-180.0..180.0))],
            })
            .collect()
    };

    let n_users = rng.random_range(0..=shape.max_users);
    let user_pos: Vec<Position3D> = (0..n_users)
        .map(|_| point(&mut rng, params.ut_height_m))
        .collect();
    let tn_users = associate_users(&user_pos, &sites, params.ue_max_power_dbm).unwrap();

    let n_terms = rng.random_range(1..=shape.max_terminals);
    let ntn_terminals = (0..n_terms)
        .map(|i| {
            let (kind, g) = if rng.random_bool(0.5) {
                (TerminalKind::T1, params.t1_peak_gain_dbi)
            } else {
                (TerminalKind::T2, params.t2_peak_gain_dbi)
            };
            NtnTerminal {
                id: i as u32,
                position: point(&mut rng, params.ntn_height_m),
                kind,
                pattern: TerminalPattern::new(kind, g, params.carrier_hz).unwrap(),
            }
        })
        .collect();

    let scenario = Scenario {
        format: "fr3coex-scenario".into(),
        version: 1,
        seed: rng.random(),
        params,
        sites,
        tn_users,
        ntn_terminals,
    };
    scenario.validate().unwrap();

    let elev: f64 = rng.random_range(10.0..169.0);
    let snapshot = generate_pass(&scenario.params.earth, elev, elev + 1.0, 1.0).unwrap()[0];

    let p = &scenario.params;
    let (tlo, thi) = p.tilt_range_deg;
    let sectors = (0..scenario.sector_count())
        .map(|_| SectorControl {
            tx_power_dbm: rng.random_range(13.0..=p.gnb_max_power_dbm),
            downtilt_deg: rng.random_range(tlo..=thi),
            muted: rng.random_bool(0.25),
            ue_power_cap_dbm: rng.random_range(-10.0..=p.ue_max_power_dbm),
        })
        .collect();
    let control = ControlState {
        sectors,
        protection_threshold_db: rng.random_range(-12.2..=-6.0),
    };
    Micro {
        scenario,
        snapshot,
        control,
    }
}

// ---------------------------------------------------------------------------
// oracle

const K_B: f64 = 1.380_649e-23;

/// J1 by the trapezoid rule on `(1/π) ∫₀^π cos(τ - x sin τ) dτ`. The integrand
/// is smooth and periodic, so the rule converges geometrically.
fn bessel_j1(x: f64) -> f64 {
    let n = 2048;
    let h = std::f64::consts::PI / n as f64;
    let f = |t: f64| (t - x * t.sin()).cos();
    let mut s = 0.5 * (f(0.0) + f(std::f64::consts::PI));
    for i in 1..n {
        s += f(i as f64 * h);
    }
    s * h / std::f64::consts::PI
}

/// Satellite position for pass elevation `a` by the law of cosines.
fn satellite(a_deg: f64, r: f64, h: f64) -> [f64; 3] {
    let folded = if a_deg > 90.0 { 180.0 - a_deg } else { a_deg };
    let a = folded.to_radians();
    let d = ((r + h).powi(2) - (r * a.cos()).powi(2)).sqrt() - r * a.sin();
    let e = a_deg.to_radians();
    [d * e.cos(), 0.0, d * e.sin()]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn p3(p: Position3D) -> [f64; 3] {
    [p.x_m, p.y_m, p.z_m]
}

/// Angle between two vectors via `atan2(|u × v|, u · v)`.
fn angle_deg(u: [f64; 3], v: [f64; 3]) -> f64 {
    let c = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let cross = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    cross.atan2(dot).to_degrees()
}

/// Circular-aperture dish gain; rear hemisphere sits on the floor.
fn dish_gain(peak_dbi: f64, off_deg: f64) -> f64 {
    const FLOOR: f64 = -60.0;
    if off_deg > 90.0 {
        return peak_dbi + FLOOR;
    }
    // (ka)² equals the linear peak gain
    let ka = 10f64.powf(peak_dbi / 20.0);
    let x = ka * off_deg.to_radians().sin();
    if x.abs() < 1e-12 {
        return peak_dbi;
    }
    let ratio = 2.0 * bessel_j1(x) / x;
    peak_dbi + (10.0 * (ratio * ratio).log10()).max(FLOOR)
}

fn sector_gain(p: &SectorPattern, tilt: f64, site: [f64; 3], target: [f64; 3]) -> f64 {
    let v = sub(target, site);
    let horiz = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let theta = (-v[2]).atan2(horiz).to_degrees();
    let bearing = v[0].atan2(v[1]).to_degrees();
    let mut phi = (bearing - p.azimuth_deg + 180.0).rem_euclid(360.0) - 180.0;
    if phi == -180.0 {
        phi = 180.0;
    }
    let a_h = (12.0 * (phi / p.hpbw_h_deg).powi(2)).min(p.front_back_db);
    let a_v = (12.0 * ((theta - tilt) / p.hpbw_v_deg).powi(2)).min(p.sla_v_db);
    p.peak_gain_dbi - (a_h + a_v).min(p.front_back_db)
}

/// Textbook FSPL in its km / MHz form.
fn fspl(d: f64, f: f64) -> f64 {
    32.45 + 20.0 * (d / 1e3).log10() + 20.0 * (f / 1e6).log10()
}

/// UMa pathloss between two nodes; the higher one acts as the BS.
fn uma(a: [f64; 3], b: [f64; 3], f: f64, los: bool) -> f64 {
    let (hb, hu) = if a[2] >= b[2] {
        (a[2], b[2])
    } else {
        (b[2], a[2])
    };
    let d2 = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
        .sqrt()
        .max(10.0);
    let d3 = (d2 * d2 + (hb - hu) * (hb - hu)).sqrt();
    let fg = f / 1e9;
    let bp = 4.0 * (hb - 1.0) * (hu - 1.0) * f / 3.0e8;
    let pl_los = if d2 < bp {
        32.4 + 20.0 * d3.log10() + 20.0 * fg.log10()
    } else {
        32.4 + 40.0 * d3.log10() + 20.0 * fg.log10()
            - 10.0 * (bp * bp + (hb - hu) * (hb - hu)).log10()
    };
    if los {
        pl_los
    } else {
        let nlos = 13.54 + 39.08 * d3.log10() + 20.0 * fg.log10() - 0.6 * (hu - 1.5);
        pl_los.max(nlos)
    }
}

fn horizontal(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn tn_link_pl(s: &Scenario, kind: LinkKind, id: u32, node: [f64; 3], t: &NtnTerminal) -> f64 {
    let p = &s.params;
    let tp = p3(t.position);
    match p.tn_ntn_pathloss {
        TnNtnPathloss::FreeSpace => {
            let v = sub(node, tp);
            fspl(
                (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt(),
                p.carrier_hz,
            )
        }
        TnNtnPathloss::Uma => {
            let los = s.link_is_los(kind, id, t.id, horizontal(node, tp), node[2].min(tp[2]));
            uma(node, tp, p.carrier_hz, los) + s.tn_shadow_db(kind, id, t.id, los)
        }
    }
}

/// Oracle output for one terminal: DL and UL sums in mW and both INR forms.
#[derive(Debug, Clone, Copy)]
pub struct OracleInr {
    pub dl_mw: f64,
    pub ul_mw: f64,
    pub linear_db: f64,
    pub paper_literal_db: f64,
}

impl OracleInr {
    pub fn db(&self, mode: InrMode) -> f64 {
        match mode {
            InrMode::Linear => self.linear_db,
            InrMode::PaperLiteral => self.paper_literal_db,
        }
    }
}

pub fn oracle_inr(s: &Scenario, control: &ControlState, elevation_deg: f64) -> Vec<OracleInr> {
    let p = &s.params;
    let sat = satellite(
        elevation_deg,
        p.earth.earth_radius_m,
        p.earth.satellite_altitude_m,
    );
    let noise_w = K_B * p.temperature_k * p.bandwidth_hz;
    let noise_dbm = 10.0 * noise_w.log10() + 30.0;
    let mw = |dbm: f64| 10f64.powf(dbm / 10.0);
    let dbm = |mw: f64| 10.0 * mw.log10();

    let mut out = Vec::new();
    for t in &s.ntn_terminals {
        let tp = p3(t.position);
        let look = sub(sat, tp);
        let g_ut = |node: [f64; 3]| {
            dish_gain(t.pattern.beam.peak_gain_dbi, angle_deg(look, sub(node, tp)))
        };

        let mut dl = 0.0;
        let mut flat = 0;
        for site in &s.sites {
            let sp = p3(site.position);
            for pat in &site.sectors {
                let c = control.sectors[flat];
                flat += 1;
                if c.muted {
                    continue;
                }
                let g_bs = sector_gain(pat, c.downtilt_deg, sp, tp);
                let pl = tn_link_pl(s, LinkKind::SiteTerminal, site.id, sp, t);
                dl += mw(c.tx_power_dbm + g_bs + g_ut(sp) - pl);
            }
        }

        let mut ul = 0.0;
        for u in &s.tn_users {
            let c = control.sectors[u.serving_sector];
            if c.muted {
                continue;
            }
            let site = &s.sites[u.serving_site];
            let up = p3(u.position);
            let sp = p3(site.position);
            let los = s.link_is_los(
                LinkKind::UserServing,
                u.id,
                site.id,
                horizontal(up, sp),
                up[2],
            );
            let target = p.ue_p0_dbm + uma(up, sp, p.carrier_hz, los);
            let p_ue = target.min(c.ue_power_cap_dbm);
            let pl = tn_link_pl(s, LinkKind::UserTerminal, u.id, up, t);
            ul += mw(p_ue + p.ue_antenna.gain_dbi + g_ut(up) - pl);
        }

        let floor = -200.0;
        let linear = if dl + ul > 0.0 {
            dbm(dl + ul) - noise_dbm
        } else {
            floor
        };
        let literal = match (dl > 0.0, ul > 0.0) {
            (true, true) => dbm(dl) + dbm(ul) - noise_dbm,
            (true, false) => dbm(dl) - noise_dbm,
            (false, true) => dbm(ul) - noise_dbm,
            (false, false) => floor,
        };
        out.push(OracleInr {
            dl_mw: dl,
            ul_mw: ul,
            linear_db: linear.max(floor),
            paper_literal_db: literal.max(floor),
        });
    }
    out
}
