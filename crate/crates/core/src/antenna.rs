//! Antenna gain patterns.
//!
//! - Circular-aperture beam `G_max · 4 |J1(x)/x|²`, `x = k a sin θ`, used for
//!   the satellite spot beam and both NTN terminal classes.
//! - 3GPP sector pattern with mechanical downtilt for gNB sectors.
//! - Isotropic (constant) TN UE antenna.
//!
//! Vertical angles for the sector pattern are measured from the horizontal
//! plane, positive *downward*, so a target at `θ' = θ_d` sits on boresight.
//! Azimuths are compass bearings (clockwise from north / +y).

use serde::{Deserialize, Serialize};

use crate::geometry::Position3D;
use crate::units::{wrap_deg, SPEED_OF_LIGHT};
use crate::{Error, Result};

/// Gain floor relative to the peak, applied near Bessel nulls.
pub const DEFAULT_NULL_FLOOR_DB: f64 = -60.0;

pub fn wavenumber_per_m(carrier_hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * carrier_hz / SPEED_OF_LIGHT
}

/// Relative gain `10 log10(4 |J1(x)/x|²)` for `x = ka·sinθ`, floored.
fn aperture_relative_db(ka: f64, offaxis_deg: f64, floor_db: f64) -> f64 {
    let x = ka * offaxis_deg.to_radians().sin();
    if x.abs() < 1e-12 {
        return 0.0;
    }
    let r = 2.0 * libm::j1(x) / x;
    let rel = 10.0 * (r * r).log10();
    // log10(0) = -inf at exact nulls; max() maps that onto the floor
    rel.max(floor_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApertureBeam {
    pub peak_gain_dbi: f64,
    pub aperture_radius_m: f64,
    pub wavenumber_per_m: f64,
    #[serde(default = "default_floor")]
    pub null_floor_db: f64,
}

fn default_floor() -> f64 {
    DEFAULT_NULL_FLOOR_DB
}

impl ApertureBeam {
    pub fn new(peak_gain_dbi: f64, aperture_radius_m: f64, carrier_hz: f64) -> Result<Self> {
        let b = Self {
            peak_gain_dbi,
            aperture_radius_m,
            wavenumber_per_m: wavenumber_per_m(carrier_hz),
            null_floor_db: DEFAULT_NULL_FLOOR_DB,
        };
        b.validate()?;
        Ok(b)
    }

    /// Aperture sized so a uniformly illuminated disc realises `peak_gain_dbi`
    /// (`(ka)² = G_max` in linear terms).
    pub fn from_peak_gain(peak_gain_dbi: f64, carrier_hz: f64) -> Result<Self> {
        let k = wavenumber_per_m(carrier_hz);
        let ka = 10f64.powf(peak_gain_dbi / 20.0);
        Self::new(peak_gain_dbi, ka / k, carrier_hz)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_gain_dbi > 0.0) {
            return Err(Error::range("peak_gain_dbi", self.peak_gain_dbi, "> 0"));
        }
        if !(self.aperture_radius_m > 0.0) {
            return Err(Error::range(
                "aperture_radius_m",
                self.aperture_radius_m,
                "> 0",
            ));
        }
        if !(self.wavenumber_per_m > 0.0) {
            return Err(Error::range(
                "wavenumber_per_m",
                self.wavenumber_per_m,
                "> 0",
            ));
        }
        if !(self.null_floor_db < 0.0) {
            return Err(Error::range("null_floor_db", self.null_floor_db, "< 0"));
        }
        Ok(())
    }

    pub fn ka(&self) -> f64 {
        self.wavenumber_per_m * self.aperture_radius_m
    }

    pub fn relative_db(&self, offaxis_deg: f64) -> f64 {
        aperture_relative_db(self.ka(), offaxis_deg, self.null_floor_db)
    }
}

/// Satellite beam gain at an off-axis angle in `[0°, 90°]`.
pub fn sat_beam_gain_dbi(beam: &ApertureBeam, offaxis_deg: f64) -> Result<f64> {
    if !(0.0..=90.0).contains(&offaxis_deg) {
        return Err(Error::range("offaxis_deg", offaxis_deg, "[0, 90]"));
    }
    if offaxis_deg == 0.0 {
        return Ok(beam.peak_gain_dbi);
    }
    Ok(beam.peak_gain_dbi + beam.relative_db(offaxis_deg))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SectorPattern {
    pub peak_gain_dbi: f64,
    pub hpbw_h_deg: f64,
    pub hpbw_v_deg: f64,
    pub sla_v_db: f64,
    pub front_back_db: f64,
    pub downtilt_deg: f64,
    pub azimuth_deg: f64,
}

impl Default for SectorPattern {
    fn default() -> Self {
        Self {
            peak_gain_dbi: 8.0,
            hpbw_h_deg: 65.0,
            hpbw_v_deg: 65.0,
            sla_v_db: 30.0,
            front_back_db: 30.0,
            downtilt_deg: 6.0,
            azimuth_deg: 0.0,
        }
    }
}

impl SectorPattern {
    pub fn with_azimuth(self, azimuth_deg: f64) -> Self {
        Self {
            azimuth_deg,
            ..self
        }
    }

    pub fn with_downtilt(self, downtilt_deg: f64) -> Self {
        Self {
            downtilt_deg,
            ..self
        }
    }

    pub fn validate(&self, tilt_range: (f64, f64)) -> Result<()> {
        for (what, v) in [
            ("hpbw_h_deg", self.hpbw_h_deg),
            ("hpbw_v_deg", self.hpbw_v_deg),
        ] {
            if !(v > 0.0 && v < 180.0) {
                return Err(Error::range(what, v, "(0, 180)"));
            }
        }
        if !(self.sla_v_db > 0.0) {
            return Err(Error::range("sla_v_db", self.sla_v_db, "> 0"));
        }
        if !(self.front_back_db > 0.0) {
            return Err(Error::range("front_back_db", self.front_back_db, "> 0"));
        }
        if !(tilt_range.0..=tilt_range.1).contains(&self.downtilt_deg) {
            return Err(Error::range(
                "downtilt_deg",
                self.downtilt_deg,
                "mechanical tilt range",
            ));
        }
        Ok(())
    }
}

/// `G_max - min(-[G_V + G_H], A_max)` with
/// `G_H = -min(12 (φ'/φ_3dB)², A_max)` and
/// `G_V = -min(12 ((θ'-θ_d)/θ_3dB)², SLA_V)`.
///
/// `phi_deg` is wrapped into `[-180°, 180°]`.
pub fn gnb_sector_gain_dbi(p: &SectorPattern, theta_deg: f64, phi_deg: f64) -> f64 {
    let phi = wrap_deg(phi_deg);
    let gh = -(12.0 * (phi / p.hpbw_h_deg).powi(2)).min(p.front_back_db);
    let gv = -(12.0 * ((theta_deg - p.downtilt_deg) / p.hpbw_v_deg).powi(2)).min(p.sla_v_db);
    p.peak_gain_dbi - (-(gv + gh)).min(p.front_back_db)
}

/// `(θ', φ')` of `target` seen from a sector mounted at `site` with the given
/// boresight azimuth. θ' is positive below the horizon.
pub fn sector_angles(site: Position3D, azimuth_deg: f64, target: Position3D) -> Result<(f64, f64)> {
    let v = target - site;
    let h = v.horizontal_norm();
    if h == 0.0 && v.z_m == 0.0 {
        return Err(Error::DegenerateGeometry("target coincides with sector"));
    }
    let theta = (-v.z_m).atan2(h).to_degrees();
    let bearing = v.x_m.atan2(v.y_m).to_degrees();
    Ok((theta, wrap_deg(bearing - azimuth_deg)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TerminalKind {
    /// Fixed gateway dish, high gain, narrow beam.
    T1,
    /// Direct-to-cell handheld, low gain, wide beam.
    T2,
}

impl TerminalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminalKind::T1 => "T1",
            TerminalKind::T2 => "T2",
        }
    }
}

/// NTN terminal antenna; boresight tracks the satellite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalPattern {
    pub kind: TerminalKind,
    pub beam: ApertureBeam,
}

impl TerminalPattern {
    pub fn new(kind: TerminalKind, peak_gain_dbi: f64, carrier_hz: f64) -> Result<Self> {
        Ok(Self {
            kind,
            beam: ApertureBeam::from_peak_gain(peak_gain_dbi, carrier_hz)?,
        })
    }

    pub fn peak_gain_dbi(&self) -> f64 {
        self.beam.peak_gain_dbi
    }
}

/// Terminal gain for an off-axis angle in `[0°, 180°]`. Past 90° (behind the
/// aperture plane) the pattern sits on its floor.
pub fn terminal_gain_dbi(t: &TerminalPattern, offaxis_deg: f64) -> Result<f64> {
    if !(0.0..=180.0).contains(&offaxis_deg) {
        return Err(Error::range("offaxis_deg", offaxis_deg, "[0, 180]"));
    }
    let b = &t.beam;
    Ok(if offaxis_deg > 90.0 {
        b.peak_gain_dbi + b.null_floor_db
    } else {
        b.peak_gain_dbi + b.relative_db(offaxis_deg)
    })
}

/// TN UE antenna: constant gain, isotropic by default.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UeAntenna {
    pub gain_dbi: f64,
}

impl UeAntenna {
    pub fn gain_dbi(&self, _offaxis_deg: f64) -> f64 {
        self.gain_dbi
    }
}

pub fn ue_gain_dbi(offaxis_deg: f64) -> f64 {
    UeAntenna::default().gain_dbi(offaxis_deg)
}
