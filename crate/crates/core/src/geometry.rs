//! Satellite pass geometry.
//!
//! Positions live in a local east-north-up frame anchored at the footprint
//! centre (x east, y north, z up). Ground-to-ground distances ignore Earth
//! curvature; the ground-to-satellite range keeps it through [`slant_distance`].
//!
//! The pass is parameterised by the elevation angle seen from the footprint
//! centre, swept along the x axis from the eastern horizon (small angles)
//! through zenith (90°) to the western horizon (up to 170°). Angles above 90°
//! are the mirror image of `180° - α`.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MIN_PASS_ELEVATION_DEG: f64 = 10.0;
pub const MAX_PASS_ELEVATION_DEG: f64 = 170.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EarthModel {
    pub earth_radius_m: f64,
    pub satellite_altitude_m: f64,
}

impl Default for EarthModel {
    fn default() -> Self {
        Self {
            earth_radius_m: 6_371_000.0,
            satellite_altitude_m: 600_000.0,
        }
    }
}

impl EarthModel {
    pub fn new(earth_radius_m: f64, satellite_altitude_m: f64) -> Result<Self> {
        let m = Self {
            earth_radius_m,
            satellite_altitude_m,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.earth_radius_m > 0.0 && self.earth_radius_m.is_finite()) {
            return Err(Error::range("earth_radius_m", self.earth_radius_m, "> 0"));
        }
        if !(self.satellite_altitude_m > 0.0 && self.satellite_altitude_m.is_finite()) {
            return Err(Error::range(
                "satellite_altitude_m",
                self.satellite_altitude_m,
                "> 0",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position3D {
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
}

impl Position3D {
    pub const ORIGIN: Position3D = Position3D::new(0.0, 0.0, 0.0);

    pub const fn new(x_m: f64, y_m: f64, z_m: f64) -> Self {
        Self { x_m, y_m, z_m }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x_m * other.x_m + self.y_m * other.y_m + self.z_m * other.z_m
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn horizontal_norm(self) -> f64 {
        self.x_m.hypot(self.y_m)
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn unit(self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn distance(self, other: Self) -> f64 {
        (other - self).norm()
    }

    pub fn horizontal_distance(self, other: Self) -> f64 {
        (other - self).horizontal_norm()
    }

    pub fn is_finite(self) -> bool {
        self.x_m.is_finite() && self.y_m.is_finite() && self.z_m.is_finite()
    }
}

impl Add for Position3D {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x_m + o.x_m, self.y_m + o.y_m, self.z_m + o.z_m)
    }
}

impl Sub for Position3D {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x_m - o.x_m, self.y_m - o.y_m, self.z_m - o.z_m)
    }
}

impl Mul<f64> for Position3D {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x_m * s, self.y_m * s, self.z_m * s)
    }
}

/// One sample of the satellite pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassSnapshot {
    pub index: usize,
    pub elevation_deg: f64,
    pub slant_distance_m: f64,
    pub satellite_position: Position3D,
    /// Seconds since the first snapshot; used for reporting only.
    pub epoch_s: f64,
}

/// Time spent per 1° of elevation change, linear in `|90° - α|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellModel {
    pub zenith_s_per_deg: f64,
    pub horizon_s_per_deg: f64,
}

impl Default for DwellModel {
    fn default() -> Self {
        Self {
            zenith_s_per_deg: 1.0,
            horizon_s_per_deg: 10.0,
        }
    }
}

impl DwellModel {
    pub fn seconds_per_deg(&self, elevation_deg: f64) -> f64 {
        let off = ((90.0 - elevation_deg).abs() / (90.0 - MIN_PASS_ELEVATION_DEG)).min(1.0);
        self.zenith_s_per_deg + (self.horizon_s_per_deg - self.zenith_s_per_deg) * off
    }
}

fn check_pass_elevation(elevation_deg: f64) -> Result<()> {
    if !(elevation_deg > 0.0 && elevation_deg <= MAX_PASS_ELEVATION_DEG) {
        return Err(Error::range("elevation_deg", elevation_deg, "(0, 170]"));
    }
    Ok(())
}

/// Satellite-to-ground range at elevation `α`:
/// `d = sqrt(R² sin²α + h² + 2hR) - R sinα`.
///
/// Elevations in `(90°, 170°]` are folded to `180° - α`.
pub fn slant_distance(elevation_deg: f64, earth: &EarthModel) -> Result<f64> {
    check_pass_elevation(elevation_deg)?;
    earth.validate()?;
    let folded = if elevation_deg > 90.0 {
        180.0 - elevation_deg
    } else {
        elevation_deg
    };
    let r = earth.earth_radius_m;
    let h = earth.satellite_altitude_m;
    if folded == 90.0 {
        // (R + h) - R, kept exact
        return Ok(h);
    }
    let s = folded.to_radians().sin();
    Ok((r * r * s * s + h * h + 2.0 * h * r).sqrt() - r * s)
}

/// Satellite position in the local frame for a pass elevation.
///
/// The satellite sits in the x-z plane at range `slant_distance(α)` and
/// elevation `α` from the footprint centre, east of zenith for `α < 90°`.
pub fn satellite_position_at(elevation_deg: f64, earth: &EarthModel) -> Result<Position3D> {
    if !(MIN_PASS_ELEVATION_DEG..=MAX_PASS_ELEVATION_DEG).contains(&elevation_deg) {
        return Err(Error::range("elevation_deg", elevation_deg, "[10, 170]"));
    }
    let d = slant_distance(elevation_deg, earth)?;
    if elevation_deg == 90.0 {
        return Ok(Position3D::new(0.0, 0.0, d));
    }
    let a = elevation_deg.to_radians();
    Ok(Position3D::new(d * a.cos(), 0.0, d * a.sin()))
}

/// Along-track elevation of a satellite position seen from the footprint
/// centre, in `[0°, 180°]`.
pub fn pass_elevation_deg(satellite: Position3D) -> f64 {
    satellite.z_m.atan2(satellite.x_m).to_degrees()
}

/// Angle between `boresight_unit` and the direction from `from` to `to`, in
/// degrees.
pub fn offaxis_angle(from: Position3D, boresight_unit: Position3D, to: Position3D) -> Result<f64> {
    let n = boresight_unit.norm();
    if !((n - 1.0).abs() <= 1e-9) {
        return Err(Error::range("boresight norm", n, "1"));
    }
    let dir = (to - from)
        .unit()
        .ok_or(Error::DegenerateGeometry("zero-length separation"))?;
    let c = dir.dot(boresight_unit).clamp(-1.0, 1.0);
    Ok(c.acos().to_degrees())
}

/// Snapshots at `min, min + step, ...` over the half-open range `[min, max)`.
pub fn generate_pass(
    earth: &EarthModel,
    min_deg: f64,
    max_deg: f64,
    step_deg: f64,
) -> Result<Vec<PassSnapshot>> {
    generate_pass_with_dwell(earth, min_deg, max_deg, step_deg, &DwellModel::default())
}

pub fn generate_pass_with_dwell(
    earth: &EarthModel,
    min_deg: f64,
    max_deg: f64,
    step_deg: f64,
    dwell: &DwellModel,
) -> Result<Vec<PassSnapshot>> {
    if !(step_deg > 0.0 && step_deg.is_finite()) {
        return Err(Error::range("step_deg", step_deg, "> 0"));
    }
    if !(min_deg < max_deg) {
        return Err(Error::InvalidConfig(format!(
            "degenerate pass range [{min_deg}, {max_deg})"
        )));
    }
    if min_deg < MIN_PASS_ELEVATION_DEG || max_deg > MAX_PASS_ELEVATION_DEG {
        return Err(Error::InvalidConfig(format!(
            "pass range [{min_deg}, {max_deg}) outside [10, 170]"
        )));
    }
    // relative slack keeps 10 + k*1 from spilling over 170 through rounding
    let count = ((max_deg - min_deg) / step_deg - 1e-9).ceil() as usize;
    let mut out = Vec::with_capacity(count);
    let mut epoch = 0.0;
    for index in 0..count {
        let elevation_deg = min_deg + index as f64 * step_deg;
        if index > 0 {
            epoch += dwell.seconds_per_deg(elevation_deg - step_deg) * step_deg;
        }
        out.push(PassSnapshot {
            index,
            elevation_deg,
            slant_distance_m: slant_distance(elevation_deg, earth)?,
            satellite_position: satellite_position_at(elevation_deg, earth)?,
            epoch_s: epoch,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn earth() -> EarthModel {
        EarthModel::default()
    }

    #[test]
    fn slant_at_zenith_is_altitude() {
        assert_eq!(slant_distance(90.0, &earth()).unwrap(), 600_000.0);
    }

    #[test]
    fn slant_at_ten_degrees() {
        // high-precision evaluation: 1931.63535890901768 km
        let d = slant_distance(10.0, &earth()).unwrap();
        assert_relative_eq!(d, 1_931_635.358_909_017_7, max_relative = 1e-12);
    }

    #[test]
    fn slant_mirror() {
        let e = earth();
        assert_eq!(
            slant_distance(150.0, &e).unwrap(),
            slant_distance(30.0, &e).unwrap()
        );
    }

    #[test]
    fn slant_rejects_bad_input() {
        assert!(slant_distance(0.0, &earth()).is_err());
        assert!(slant_distance(-5.0, &earth()).is_err());
        assert!(slant_distance(170.5, &earth()).is_err());
        assert!(EarthModel::new(0.0, 1.0).is_err());
    }

    #[test]
    fn satellite_position_examples() {
        let e = earth();
        assert_eq!(
            satellite_position_at(90.0, &e).unwrap(),
            Position3D::new(0.0, 0.0, 600_000.0)
        );
        let p10 = satellite_position_at(10.0, &e).unwrap();
        let d = slant_distance(10.0, &e).unwrap();
        assert_relative_eq!(p10.x_m, d * 10f64.to_radians().cos(), max_relative = 1e-14);
        assert_relative_eq!(p10.z_m, d * 10f64.to_radians().sin(), max_relative = 1e-14);
        assert_relative_eq!(p10.x_m, 1_902_289.477_446_12, max_relative = 1e-12);
        let p170 = satellite_position_at(170.0, &e).unwrap();
        assert_relative_eq!(p170.x_m, -p10.x_m, max_relative = 1e-14);
        assert_relative_eq!(p170.z_m, p10.z_m, max_relative = 1e-14);
        assert!(satellite_position_at(9.0, &e).is_err());
    }

    #[test]
    fn offaxis_examples() {
        let o = Position3D::ORIGIN;
        let down = Position3D::new(0.0, 0.0, -1.0);
        assert_eq!(
            offaxis_angle(o, down, Position3D::new(0.0, 0.0, -10.0)).unwrap(),
            0.0
        );
        let up = Position3D::new(0.0, 0.0, 1.0);
        assert_relative_eq!(
            offaxis_angle(o, up, Position3D::new(1.0, 0.0, 1.0)).unwrap(),
            45.0,
            epsilon = 1e-12
        );
        let east = Position3D::new(1.0, 0.0, 0.0);
        assert_eq!(
            offaxis_angle(o, east, Position3D::new(-1.0, 0.0, 0.0)).unwrap(),
            180.0
        );
        assert!(offaxis_angle(o, east, o).is_err());
        assert!(offaxis_angle(o, Position3D::new(2.0, 0.0, 0.0), east).is_err());
    }

    #[test]
    fn one_degree_pass_has_160_snapshots() {
        let pass = generate_pass(&earth(), 10.0, 170.0, 1.0).unwrap();
        assert_eq!(pass.len(), 160);
        assert_eq!(pass[80].elevation_deg, 90.0);
        assert_eq!(pass[80].slant_distance_m, 600_000.0);
        assert!(pass.windows(2).all(|w| w[1].epoch_s > w[0].epoch_s));
    }

    #[test]
    fn coarse_pass() {
        let pass = generate_pass(&earth(), 30.0, 40.0, 5.0).unwrap();
        let el: Vec<f64> = pass.iter().map(|s| s.elevation_deg).collect();
        assert_eq!(el, vec![30.0, 35.0]);
        assert_eq!(generate_pass(&earth(), 10.0, 170.0, 4.0).unwrap().len(), 40);
    }

    #[test]
    fn pass_rejects_degenerate_ranges() {
        assert!(generate_pass(&earth(), 40.0, 40.0, 1.0).is_err());
        assert!(generate_pass(&earth(), 10.0, 20.0, 0.0).is_err());
        assert!(generate_pass(&earth(), 5.0, 20.0, 1.0).is_err());
    }

    #[test]
    fn dwell_endpoints() {
        let d = DwellModel::default();
        assert_eq!(d.seconds_per_deg(90.0), 1.0);
        assert_eq!(d.seconds_per_deg(10.0), 10.0);
        assert_eq!(d.seconds_per_deg(170.0), 10.0);
    }

    proptest! {
        #[test]
        fn slant_strictly_decreasing(a in 0.5f64..89.0, da in 0.01f64..1.0,
                                     h in 100e3f64..2000e3, r in 1000e3f64..10000e3) {
            let e = EarthModel::new(r, h).unwrap();
            let lo = slant_distance(a, &e).unwrap();
            let hi = slant_distance(a + da, &e).unwrap();
            prop_assert!(hi < lo);
            prop_assert!(hi >= h);
        }

        #[test]
        fn slant_symmetric(a in 10.0f64..=90.0) {
            let e = earth();
            let (x, y) = (slant_distance(a, &e).unwrap(), slant_distance(180.0 - a, &e).unwrap());
            prop_assert!((x - y).abs() <= 1e-12 * x);
        }

        #[test]
        fn elevation_recomputed_from_position(a in 10.0f64..=170.0, h in 300e3f64..1500e3) {
            let e = EarthModel::new(6_371_000.0, h).unwrap();
            let p = satellite_position_at(a, &e).unwrap();
            prop_assert!(p.z_m > 0.0);
            prop_assert!((pass_elevation_deg(p) - a).abs() < 1e-6);
        }
    }
}
