//! Pathloss and noise.
//!
//! Unit convention for the log-distance formulas: distance in metres,
//! carrier in GHz (the 32.45 / 32.4 constants assume exactly that).
//!
//! - NTN: free-space loss plus additive clutter, shadowing, atmospheric and
//!   scintillation terms looked up by elevation from a versioned table.
//! - TN: 3GPP TR 38.901 UMa, LOS two-slope model with breakpoint, NLOS as
//!   `max(PL_LOS, PL'_NLOS)`, and the UMa LOS-probability curve.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::Position3D;
use crate::units::{linear_to_db, BOLTZMANN};
use crate::{Error, Result};

/// Light speed used by TR 38.901 for the breakpoint distance.
const BREAKPOINT_LIGHT_SPEED: f64 = 3.0e8;

const UMA_MIN_D2D_M: f64 = 10.0;
pub const UMA_MAX_D2D_M: f64 = 5_000.0;

/// Free-space pathloss `32.45 + 20 log10(d[m]) + 20 log10(f[GHz])`.
pub fn fspl_db(distance_m: f64, carrier_hz: f64) -> Result<f64> {
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(Error::range("distance_m", distance_m, "> 0"));
    }
    if !(carrier_hz > 0.0 && carrier_hz.is_finite()) {
        return Err(Error::range("carrier_hz", carrier_hz, "> 0"));
    }
    Ok(32.45 + 20.0 * distance_m.log10() + 20.0 * (carrier_hz / 1e9).log10())
}

/// Additive NTN loss terms in dB.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NtnLossTerms {
    pub clutter_loss_db: f64,
    /// Sampled shadow fading; may take either sign.
    pub shadow_fading_db: f64,
    pub atmospheric_loss_db: f64,
    pub ionospheric_scintillation_db: f64,
    pub tropospheric_scintillation_db: f64,
}

impl NtnLossTerms {
    pub fn validate(&self) -> Result<()> {
        let det = [
            ("clutter_loss_db", self.clutter_loss_db),
            ("atmospheric_loss_db", self.atmospheric_loss_db),
            (
                "ionospheric_scintillation_db",
                self.ionospheric_scintillation_db,
            ),
            (
                "tropospheric_scintillation_db",
                self.tropospheric_scintillation_db,
            ),
        ];
        for (what, v) in det {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::range(what, v, ">= 0"));
            }
        }
        if !self.shadow_fading_db.is_finite() {
            return Err(Error::NonFinite("shadow_fading_db".into()));
        }
        Ok(())
    }

    pub fn total_db(&self) -> f64 {
        self.clutter_loss_db
            + self.shadow_fading_db
            + self.atmospheric_loss_db
            + self.ionospheric_scintillation_db
            + self.tropospheric_scintillation_db
    }
}

pub fn ntn_pathloss_db(slant_m: f64, carrier_hz: f64, terms: &NtnLossTerms) -> Result<f64> {
    terms.validate()?;
    Ok(fspl_db(slant_m, carrier_hz)? + terms.total_db())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct LossRow {
    elevation_deg: f64,
    clutter_db: f64,
    atmospheric_db: f64,
    ionospheric_db: f64,
    tropospheric_db: f64,
    sigma_sf_db: f64,
}

/// Elevation-indexed NTN loss terms.
///
/// File format: `#` comments, one header line
/// `elevation_deg L_CL L_Atm L_IS L_TS sigma_SF`, then whitespace- or
/// comma-separated rows with strictly increasing elevations in `(0, 90]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtnLossTable {
    rows: Vec<LossRow>,
}

const DEFAULT_LOSS_TABLE: &str = include_str!("../data/ntn_losses_v1.tsv");
const LOSS_HEADER: [&str; 6] = ["elevation_deg", "L_CL", "L_Atm", "L_IS", "L_TS", "sigma_SF"];

impl Default for NtnLossTable {
    fn default() -> Self {
        Self::parse(DEFAULT_LOSS_TABLE).expect("bundled loss table is valid")
    }
}

impl NtnLossTable {
    /// All-zero table: NTN pathloss reduces to free space.
    pub fn free_space() -> Self {
        Self {
            rows: vec![LossRow {
                elevation_deg: 90.0,
                clutter_db: 0.0,
                atmospheric_db: 0.0,
                ionospheric_db: 0.0,
                tropospheric_db: 0.0,
                sigma_sf_db: 0.0,
            }],
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<LossRow> = Vec::new();
        let mut saw_header = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if !saw_header {
                if fields != LOSS_HEADER {
                    return Err(Error::LossTable {
                        line: line_no,
                        msg: format!("expected header {:?}", LOSS_HEADER.join(" ")),
                    });
                }
                saw_header = true;
                continue;
            }
            if fields.len() != 6 {
                return Err(Error::LossTable {
                    line: line_no,
                    msg: format!("expected 6 columns, found {}", fields.len()),
                });
            }
            let mut v = [0.0; 6];
            for (slot, f) in v.iter_mut().zip(&fields) {
                *slot = f.parse().map_err(|_| Error::LossTable {
                    line: line_no,
                    msg: format!("not a number: {f:?}"),
                })?;
            }
            let row = LossRow {
                elevation_deg: v[0],
                clutter_db: v[1],
                atmospheric_db: v[2],
                ionospheric_db: v[3],
                tropospheric_db: v[4],
                sigma_sf_db: v[5],
            };
            if !(row.elevation_deg > 0.0 && row.elevation_deg <= 90.0) {
                return Err(Error::LossTable {
                    line: line_no,
                    msg: "elevation must be in (0, 90]".into(),
                });
            }
            if v[1..].iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::LossTable {
                    line: line_no,
                    msg: "loss terms and sigma must be non-negative".into(),
                });
            }
            if let Some(prev) = rows.last() {
                if row.elevation_deg <= prev.elevation_deg {
                    return Err(Error::LossTable {
                        line: line_no,
                        msg: "elevations must be strictly increasing".into(),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::LossTable {
                line: 0,
                msg: "no rows".into(),
            });
        }
        Ok(Self { rows })
    }

    fn lookup(&self, elevation_deg: f64) -> LossRow {
        let e = if elevation_deg > 90.0 {
            180.0 - elevation_deg
        } else {
            elevation_deg
        };
        let rows = &self.rows;
        if e <= rows[0].elevation_deg {
            return rows[0];
        }
        let last = rows[rows.len() - 1];
        if e >= last.elevation_deg {
            return last;
        }
        let hi = rows.partition_point(|r| r.elevation_deg <= e);
        let (a, b) = (rows[hi - 1], rows[hi]);
        let t = (e - a.elevation_deg) / (b.elevation_deg - a.elevation_deg);
        let lerp = |x: f64, y: f64| x + t * (y - x);
        LossRow {
            elevation_deg: e,
            clutter_db: lerp(a.clutter_db, b.clutter_db),
            atmospheric_db: lerp(a.atmospheric_db, b.atmospheric_db),
            ionospheric_db: lerp(a.ionospheric_db, b.ionospheric_db),
            tropospheric_db: lerp(a.tropospheric_db, b.tropospheric_db),
            sigma_sf_db: lerp(a.sigma_sf_db, b.sigma_sf_db),
        }
    }

    pub fn sigma_sf_db(&self, elevation_deg: f64) -> f64 {
        self.lookup(elevation_deg).sigma_sf_db
    }

    /// Loss terms at an elevation; `shadow_normal` is a standard-normal draw
    /// (or 0 to disable shadowing) scaled by the tabulated sigma.
    pub fn terms_at(&self, elevation_deg: f64, shadow_normal: f64) -> NtnLossTerms {
        let r = self.lookup(elevation_deg);
        NtnLossTerms {
            clutter_loss_db: r.clutter_db,
            shadow_fading_db: shadow_normal * r.sigma_sf_db,
            atmospheric_loss_db: r.atmospheric_db,
            ionospheric_scintillation_db: r.ionospheric_db,
            tropospheric_scintillation_db: r.tropospheric_db,
        }
    }
}

/// Geometry of one UMa link. `d3d_m` is always derived from the other fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UmaLinkGeometry {
    pub d2d_m: f64,
    pub d3d_m: f64,
    pub bs_height_m: f64,
    pub ut_height_m: f64,
    pub carrier_hz: f64,
    pub los: bool,
}

impl UmaLinkGeometry {
    pub fn new(d2d_m: f64, bs_height_m: f64, ut_height_m: f64, carrier_hz: f64, los: bool) -> Self {
        let dh = bs_height_m - ut_height_m;
        Self {
            d2d_m,
            d3d_m: (d2d_m * d2d_m + dh * dh).sqrt(),
            bs_height_m,
            ut_height_m,
            carrier_hz,
            los,
        }
    }

    /// Link between two nodes; the higher one plays the base-station role.
    pub fn between(a: Position3D, b: Position3D, carrier_hz: f64, los: bool) -> Self {
        let (hi, lo) = if a.z_m >= b.z_m {
            (a.z_m, b.z_m)
        } else {
            (b.z_m, a.z_m)
        };
        Self::new(a.horizontal_distance(b), hi, lo, carrier_hz, los)
    }

    fn clamped(&self) -> Self {
        if self.d2d_m < UMA_MIN_D2D_M {
            Self::new(
                UMA_MIN_D2D_M,
                self.bs_height_m,
                self.ut_height_m,
                self.carrier_hz,
                self.los,
            )
        } else {
            *self
        }
    }
}

/// `4 (h_BS - h_E)(h_UT - h_E) f_c / c`.
pub fn uma_breakpoint_m(geom: &UmaLinkGeometry, env_height_m: f64) -> Result<f64> {
    let hb = geom.bs_height_m - env_height_m;
    let hu = geom.ut_height_m - env_height_m;
    if !(hb > 0.0) {
        return Err(Error::range("effective bs height", hb, "> 0"));
    }
    if !(hu > 0.0) {
        return Err(Error::range("effective ut height", hu, "> 0"));
    }
    if !(geom.carrier_hz > 0.0) {
        return Err(Error::range("carrier_hz", geom.carrier_hz, "> 0"));
    }
    Ok(4.0 * hb * hu * geom.carrier_hz / BREAKPOINT_LIGHT_SPEED)
}

fn check_uma(geom: &UmaLinkGeometry) -> Result<()> {
    if !(geom.d2d_m >= 0.0 && geom.d2d_m.is_finite()) {
        return Err(Error::range("d2d_m", geom.d2d_m, ">= 0"));
    }
    if !(geom.d3d_m > 0.0) {
        return Err(Error::DegenerateGeometry("coincident UMa link endpoints"));
    }
    Ok(())
}

/// First LOS branch (`d2d` below the breakpoint).
pub fn uma_los_near_db(geom: &UmaLinkGeometry) -> f64 {
    32.4 + 20.0 * geom.d3d_m.log10() + 20.0 * (geom.carrier_hz / 1e9).log10()
}

/// Second LOS branch (`d2d` at or beyond the breakpoint).
pub fn uma_los_far_db(geom: &UmaLinkGeometry, breakpoint_m: f64) -> f64 {
    let dh = geom.bs_height_m - geom.ut_height_m;
    32.4 + 40.0 * geom.d3d_m.log10() + 20.0 * (geom.carrier_hz / 1e9).log10()
        - 10.0 * (breakpoint_m * breakpoint_m + dh * dh).log10()
}

/// UMa LOS pathloss. Distances below 10 m are evaluated at 10 m; beyond
/// 5 km the far branch is extrapolated.
pub fn uma_los_pathloss_db(geom: &UmaLinkGeometry) -> Result<f64> {
    check_uma(geom)?;
    let g = geom.clamped();
    let bp = uma_breakpoint_m(&g, 1.0)?;
    Ok(if g.d2d_m < bp {
        uma_los_near_db(&g)
    } else {
        uma_los_far_db(&g, bp)
    })
}

/// UMa NLOS pathloss `max(PL_LOS, PL'_NLOS)`.
pub fn uma_nlos_pathloss_db(geom: &UmaLinkGeometry) -> Result<f64> {
    let los = uma_los_pathloss_db(geom)?;
    let g = geom.clamped();
    let nlos = 13.54 + 39.08 * g.d3d_m.log10() + 20.0 * (g.carrier_hz / 1e9).log10()
        - 0.6 * (g.ut_height_m - 1.5);
    Ok(los.max(nlos))
}

pub fn uma_pathloss_db(geom: &UmaLinkGeometry) -> Result<f64> {
    if geom.los {
        uma_los_pathloss_db(geom)
    } else {
        uma_nlos_pathloss_db(geom)
    }
}

/// TR 38.901 UMa LOS probability.
pub fn uma_los_probability(d2d_m: f64, ut_height_m: f64) -> f64 {
    if d2d_m <= 18.0 {
        return 1.0;
    }
    let c = if ut_height_m <= 13.0 {
        0.0
    } else {
        ((ut_height_m - 13.0) / 10.0).powf(1.5)
    };
    let base = 18.0 / d2d_m + (-d2d_m / 63.0).exp() * (1.0 - 18.0 / d2d_m);
    base * (1.0 + c * 1.25 * (d2d_m / 100.0).powi(3) * (-d2d_m / 150.0).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub boltzmann: f64,
    pub temperature_k: f64,
    pub bandwidth_hz: f64,
}

impl NoiseModel {
    pub fn new(temperature_k: f64, bandwidth_hz: f64) -> Self {
        Self {
            boltzmann: BOLTZMANN,
            temperature_k,
            bandwidth_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("boltzmann", self.boltzmann),
            ("temperature_k", self.temperature_k),
            ("bandwidth_hz", self.bandwidth_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::range(what, v, "> 0"));
            }
        }
        Ok(())
    }
}

/// `10 log10(kTB / 1 mW)`.
pub fn thermal_noise_dbm(noise: &NoiseModel) -> Result<f64> {
    noise.validate()?;
    Ok(linear_to_db(noise.boltzmann * noise.temperature_k * noise.bandwidth_hz) + 30.0)
}
