//! Library INR against the straight-line oracle, plus the identity linking the
//! linear and two-log INR forms.

#[path = "common/micro.rs"]
mod micro;

use fr3coex_core::interference::{snapshot_metrics, EvalOptions, InrMode, LinkCache};
use fr3coex_core::units::INR_FLOOR_DB;
use micro::{micro_scenario, oracle_inr, MicroShape};

#[test]
fn reference_and_fast_paths_match_oracle() {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let m = micro_scenario(seed, MicroShape::default());
        let oracle = oracle_inr(&m.scenario, &m.control, m.snapshot.elevation_deg);
        let cache = LinkCache::build(&m.scenario, &m.snapshot).unwrap();
        for mode in [InrMode::Linear, InrMode::PaperLiteral] {
            let opts = EvalOptions { inr_mode: mode };
            let reference = snapshot_metrics(&m.scenario, &m.control, &m.snapshot, &opts).unwrap();
            let fast = cache.evaluate(&m.scenario, &m.control, &opts).unwrap();
            for (i, o) in oracle.iter().enumerate() {
                for got in [
                    reference.terminals[i].inr.inr_db,
                    fast.terminals[i].inr.inr_db,
                ] {
                    let err = (got - o.db(mode)).abs();
                    worst = worst.max(err);
                    assert!(
                        err <= 1e-6,
                        "seed {seed} terminal {i} {mode:?}: library {got} oracle {}",
                        o.db(mode)
                    );
                }
            }
        }
    }
    eprintln!("worst INR disagreement {worst:.3e} dB");
}

#[test]
fn oracle_sees_real_interference() {
    // guard against a vacuous comparison on all-floor INRs
    let live = (0..20u64)
        .flat_map(|s| {
            let m = micro_scenario(s, MicroShape::default());
            oracle_inr(&m.scenario, &m.control, m.snapshot.elevation_deg)
        })
        .filter(|o| o.dl_mw > 0.0 && o.ul_mw > 0.0)
        .count();
    assert!(
        live >= 5,
        "only {live} terminals with both DL and UL interference"
    );
}

#[test]
fn two_log_shift_is_the_algebraic_identity() {
    let mut checked = 0;
    let mut seed = 100u64;
    while checked < 10 {
        seed += 1;
        let m = micro_scenario(seed, MicroShape::default());
        let lin = snapshot_metrics(
            &m.scenario,
            &m.control,
            &m.snapshot,
            &EvalOptions::default(),
        )
        .unwrap();
        let lit = snapshot_metrics(
            &m.scenario,
            &m.control,
            &m.snapshot,
            &EvalOptions {
                inr_mode: InrMode::PaperLiteral,
            },
        )
        .unwrap();
        for (a, b) in lin.terminals.iter().zip(&lit.terminals) {
            let (d, u) = (a.inr.dl_interference_mw, a.inr.ul_interference_mw);
            // the identity holds above the reporting floor
            if !(d > 0.0 && u > 0.0) || b.inr.inr_db <= INR_FLOOR_DB {
                continue;
            }
            // literal - linear = 10log10 U - (10log10(D + U) - 10log10 D)
            let predicted = 10.0 * u.log10() - (10.0 * (d + u).log10() - 10.0 * d.log10());
            let shift = b.inr.inr_db - a.inr.inr_db;
            assert!(
                (shift - predicted).abs() <= 1e-9,
                "seed {seed}: {shift} vs {predicted}"
            );
            checked += 1;
        }
    }
}
