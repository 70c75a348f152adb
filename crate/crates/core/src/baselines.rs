//! Reference controllers: fixed full-power operation and an exclusion-zone
//! mute rule in the style of ASCENT.

use serde::{Deserialize, Serialize};

use crate::deployment::Scenario;
use crate::geometry::PassSnapshot;
use crate::interference::{ControlState, EvalOptions, PassCache, SnapshotMetrics};
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD_DB: f64 = -6.0;

/// All sectors on at full power with default tilt; identical every snapshot.
pub fn no_coordination_step(
    scenario: &Scenario,
    _snapshot: &PassSnapshot,
    threshold_db: f64,
) -> ControlState {
    ControlState::no_coordination(scenario, threshold_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AscentConfig {
    pub exclusion_radius_m: f64,
    pub inr_trigger_db: f64,
    /// Mute set is recomputed every this many snapshots and held in between.
    pub reevaluate_every: usize,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            exclusion_radius_m: 2_000.0,
            inr_trigger_db: DEFAULT_THRESHOLD_DB,
            reevaluate_every: 1,
        }
    }
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.exclusion_radius_m > 0.0 && self.exclusion_radius_m.is_finite()) {
            return Err(Error::range(
                "exclusion_radius_m",
                self.exclusion_radius_m,
                "> 0",
            ));
        }
        if !self.inr_trigger_db.is_finite() {
            return Err(Error::NonFinite("inr_trigger_db".into()));
        }
        if self.reevaluate_every == 0 {
            return Err(Error::InvalidConfig("reevaluate_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Mutes every sector whose site lies within the exclusion radius (horizontal
/// distance) of a terminal whose INR in `prev_metrics` exceeded the trigger.
/// Unmuted sectors stay at full power and default tilt.
pub fn ascent_step(
    scenario: &Scenario,
    snapshot: &PassSnapshot,
    prev_metrics: &SnapshotMetrics,
    cfg: &AscentConfig,
    threshold_db: f64,
) -> ControlState {
    let mut control = no_coordination_step(scenario, snapshot, threshold_db);
    let hot: Vec<_> = scenario
        .ntn_terminals
        .iter()
        .zip(&prev_metrics.terminals)
        .filter(|(_, m)| m.inr.inr_db > cfg.inr_trigger_db)
        .map(|(t, _)| t.position)
        .collect();
    if hot.is_empty() {
        return control;
    }
    for s in scenario.sectors() {
        let p = s.position();
        if hot
            .iter()
            .any(|t| t.horizontal_distance(p) <= cfg.exclusion_radius_m)
        {
            control.sectors[s.index].muted = true;
        }
    }
    control
}

/// A per-snapshot controller driven by the previous snapshot's metrics.
pub trait Controller {
    fn name(&self) -> &str;

    /// `prev` is `None` on the first snapshot of a pass.
    fn control(
        &mut self,
        scenario: &Scenario,
        snapshot: &PassSnapshot,
        prev: Option<&SnapshotMetrics>,
    ) -> Result<ControlState>;
}

#[derive(Debug, Clone)]
pub struct NoCoordination {
    pub threshold_db: f64,
}

impl Controller for NoCoordination {
    fn name(&self) -> &str {
        "none"
    }

    fn control(
        &mut self,
        scenario: &Scenario,
        snapshot: &PassSnapshot,
        _prev: Option<&SnapshotMetrics>,
    ) -> Result<ControlState> {
        Ok(no_coordination_step(scenario, snapshot, self.threshold_db))
    }
}

/// Stateful ASCENT wrapper. On the first snapshot the caller supplies a
/// no-coordination probe as `prev`.
#[derive(Debug, Clone)]
pub struct Ascent {
    pub cfg: AscentConfig,
    pub threshold_db: f64,
    held: Option<ControlState>,
    steps: usize,
}

impl Ascent {
    pub fn new(cfg: AscentConfig, threshold_db: f64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            threshold_db,
            held: None,
            steps: 0,
        })
    }
}

impl Controller for Ascent {
    fn name(&self) -> &str {
        "ascent"
    }

    fn control(
        &mut self,
        scenario: &Scenario,
        snapshot: &PassSnapshot,
        prev: Option<&SnapshotMetrics>,
    ) -> Result<ControlState> {
        let due = self.steps.is_multiple_of(self.cfg.reevaluate_every);
        self.steps += 1;
        match (&self.held, due) {
            (Some(h), false) => Ok(h.clone()),
            _ => {
                let prev = prev.ok_or(Error::Empty("previous snapshot metrics"))?;
                let c = ascent_step(scenario, snapshot, prev, &self.cfg, self.threshold_db);
                self.held = Some(c.clone());
                Ok(c)
            }
        }
    }
}

/// Runs a controller over every snapshot of a pass. The first snapshot's
/// `prev` is a no-coordination probe of that snapshot.
pub fn run_pass(
    controller: &mut dyn Controller,
    cache: &PassCache,
    opts: &EvalOptions,
    threshold_db: f64,
) -> Result<Vec<SnapshotMetrics>> {
    let scenario = cache.scenario().clone();
    let mut out: Vec<SnapshotMetrics> = Vec::with_capacity(cache.len());
    for (i, snap) in cache.snapshots().iter().enumerate() {
        let probe;
        let prev = match out.last() {
            Some(m) => m,
            None => {
                let c = no_coordination_step(&scenario, snap, threshold_db);
                probe = cache.evaluate(i, &c, opts)?;
                &probe
            }
        };
        let control = controller.control(&scenario, snap, Some(prev))?;
        out.push(cache.evaluate(i, &control, opts)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::SectorPattern;
    use crate::deployment::{BsSite, DropConfig, Footprint, ScenarioParams};
    use crate::geometry::{generate_pass, Position3D};
    use crate::interference::{snapshot_metrics, EvalOptions};

    fn scenario() -> Scenario {
        let params = ScenarioParams {
            footprint: Footprint { side_m: 6000.0 },
            ..ScenarioParams::default()
        };
        // sites on a line 1 km apart
        let sites = (0..5)
            .map(|i| BsSite {
                id: i,
                position: Position3D::new(-2000.0 + 1000.0 * i as f64, 0.0, 25.0),
                sectors: [0.0, 120.0, 240.0]
                    .iter()
                    .map(|&a| SectorPattern::default().with_azimuth(a))
                    .collect(),
            })
            .collect();
        let drop = DropConfig {
            tn_user_density: 1e-6,
            ntn_density: 1e-7,
            ..DropConfig::default()
        };
        Scenario::build(params, &drop, sites, 5).unwrap()
    }

    #[test]
    fn no_coordination_is_fixed() {
        let sc = scenario();
        let pass = generate_pass(&sc.params.earth, 10.0, 12.0, 1.0).unwrap();
        let a = no_coordination_step(&sc, &pass[0], -6.0);
        assert_eq!(a, no_coordination_step(&sc, &pass[1], -6.0));
        assert_eq!(a.active_fraction(), 1.0);
        assert!(a.sectors.iter().all(|s| s.tx_power_dbm == 33.0));
    }

    fn metrics_with(sc: &Scenario, inr: &[(usize, f64)]) -> SnapshotMetrics {
        let pass = generate_pass(&sc.params.earth, 50.0, 51.0, 1.0).unwrap();
        let c = ControlState::no_coordination(sc, -6.0);
        let mut m = snapshot_metrics(sc, &c, &pass[0], &EvalOptions::default()).unwrap();
        m.terminals.iter_mut().for_each(|t| t.inr.inr_db = -30.0);
        for &(i, v) in inr {
            m.terminals[i].inr.inr_db = v;
        }
        m
    }

    #[test]
    fn ascent_mutes_exactly_the_ball() {
        let sc = scenario();
        let pass = generate_pass(&sc.params.earth, 50.0, 51.0, 1.0).unwrap();
        let cfg = AscentConfig::default();
        let quiet = metrics_with(&sc, &[]);
        assert_eq!(
            ascent_step(&sc, &pass[0], &quiet, &cfg, -6.0).active_fraction(),
            1.0
        );

        let t = 3;
        let hot = metrics_with(&sc, &[(t, 0.0)]);
        let c = ascent_step(&sc, &pass[0], &hot, &cfg, -6.0);
        let pos = sc.ntn_terminals[t].position;
        for s in sc.sectors() {
            let inside = s.position().horizontal_distance(pos) <= 2000.0;
            assert_eq!(c.sectors[s.index].muted, inside);
            assert_eq!(c.sectors[s.index].tx_power_dbm, 33.0);
        }
        let tiny = AscentConfig {
            exclusion_radius_m: 1e-9,
            ..cfg
        };
        assert_eq!(
            ascent_step(&sc, &pass[0], &hot, &tiny, -6.0),
            no_coordination_step(&sc, &pass[0], -6.0)
        );
    }

    #[test]
    fn ascent_holds_between_reevaluations() {
        let sc = scenario();
        let pass = generate_pass(&sc.params.earth, 50.0, 53.0, 1.0).unwrap();
        let cfg = AscentConfig {
            exclusion_radius_m: 1e5,
            reevaluate_every: 2,
            ..AscentConfig::default()
        };
        let mut a = Ascent::new(cfg, -6.0).unwrap();
        let hot = metrics_with(&sc, &[(0, 5.0)]);
        let quiet = metrics_with(&sc, &[]);
        let c0 = a.control(&sc, &pass[0], Some(&hot)).unwrap();
        assert_eq!(c0.active_fraction(), 0.0);
        let c1 = a.control(&sc, &pass[1], Some(&quiet)).unwrap();
        assert_eq!(c1, c0);
        let c2 = a.control(&sc, &pass[2], Some(&quiet)).unwrap();
        assert_eq!(c2.active_fraction(), 1.0);
        assert!(Ascent::new(
            AscentConfig {
                exclusion_radius_m: 0.0,
                ..cfg
            },
            -6.0
        )
        .is_err());
    }
}
