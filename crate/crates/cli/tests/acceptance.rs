//! The eight acceptance criteria. Each test writes one `PASS`/`FAIL` line
//! straight to stderr, so the verdicts show up without `--nocapture`.

mod common;

#[path = "../../core/tests/common/gradcheck.rs"]
mod gradcheck;
#[path = "../../core/tests/common/micro.rs"]
mod micro;

use std::io::Write;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};

use fr3coex_cli::commands::{self, ControllerSpec, RecordRow};
use fr3coex_cli::config::RunConfig;
use fr3coex_cli::output::read_csv;
use fr3coex_core::antenna::{gnb_sector_gain_dbi, SectorPattern};
use fr3coex_core::geometry::{slant_distance, EarthModel};
use fr3coex_core::interference::{snapshot_metrics, ControlState, EvalOptions, InrMode, LinkCache};
use fr3coex_core::ppo::policy::sigmoid;
use fr3coex_core::ppo::toy::Corridor;
use fr3coex_core::ppo::{train, Hyperparams};
use fr3coex_core::propagation::{
    fspl_db, thermal_noise_dbm, uma_breakpoint_m, uma_los_far_db, uma_los_near_db, NoiseModel,
    UmaLinkGeometry,
};
use fr3coex_core::units::INR_FLOOR_DB;
use micro::{micro_scenario, oracle_inr, Micro, MicroShape};

fn criterion(n: u32, name: &str, body: impl FnOnce() -> String) {
    let r = catch_unwind(AssertUnwindSafe(body));
    let line = match &r {
        Ok(detail) => format!("acceptance {n} [{name}]: PASS  {detail}"),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            format!("acceptance {n} [{name}]: FAIL  {msg}")
        }
    };
    // bypasses the test harness capture
    let _ = writeln!(std::io::stderr().lock(), "{line}");
    if let Err(e) = r {
        resume_unwind(e);
    }
}

#[test]
fn c1_analytic_link_budget() {
    criterion(1, "analytic link budget", || {
        let earth = EarthModel::default();
        let zenith = slant_distance(90.0, &earth).unwrap();
        assert_eq!(zenith, earth.satellite_altitude_m);

        let fspl = fspl_db(600e3, 12e9).unwrap();
        assert!((fspl - 169.60).abs() <= 0.01, "FSPL {fspl}");

        let n = thermal_noise_dbm(&NoiseModel::new(290.0, 200e6)).unwrap();
        assert!((n - -90.97).abs() <= 0.01, "noise {n}");

        let mut worst_jump: f64 = 0.0;
        for (hb, hu) in [(25.0, 1.5), (10.0, 1.5), (35.0, 22.5)] {
            let probe = UmaLinkGeometry::new(100.0, hb, hu, 12e9, true);
            let bp = uma_breakpoint_m(&probe, 1.0).unwrap();
            let g = UmaLinkGeometry::new(bp, hb, hu, 12e9, true);
            let jump = (uma_los_near_db(&g) - uma_los_far_db(&g, bp)).abs();
            worst_jump = worst_jump.max(jump);
        }
        assert!(worst_jump <= 1e-9, "UMa breakpoint jump {worst_jump}");

        let p = SectorPattern::default();
        assert_eq!(
            gnb_sector_gain_dbi(&p, p.downtilt_deg, 0.0),
            p.peak_gain_dbi
        );
        let mut min = f64::INFINITY;
        for i in 0..=360 {
            for j in 0..=180 {
                min = min.min(gnb_sector_gain_dbi(&p, j as f64 - 90.0, i as f64 - 180.0));
            }
        }
        assert_eq!(min, p.peak_gain_dbi - p.front_back_db);
        format!("FSPL {fspl:.4} dB, noise {n:.4} dBm, UMa jump {worst_jump:.1e} dB, gain floor {min} dBi")
    });
}

#[test]
fn c2_brute_force_inr_oracle() {
    criterion(2, "brute-force INR oracle", || {
        let mut worst: f64 = 0.0;
        let mut live = 0;
        for seed in 0..20u64 {
            let m = micro_scenario(seed, MicroShape::default());
            assert!(m.scenario.sector_count() <= 3 && m.scenario.tn_users.len() <= 3);
            assert!(m.scenario.ntn_terminals.len() <= 2);
            let oracle = oracle_inr(&m.scenario, &m.control, m.snapshot.elevation_deg);
            let cache = LinkCache::build(&m.scenario, &m.snapshot).unwrap();
            for mode in [InrMode::Linear, InrMode::PaperLiteral] {
                let opts = EvalOptions { inr_mode: mode };
                let reference =
                    snapshot_metrics(&m.scenario, &m.control, &m.snapshot, &opts).unwrap();
                let fast = cache.evaluate(&m.scenario, &m.control, &opts).unwrap();
                for (i, o) in oracle.iter().enumerate() {
                    for got in [
                        reference.terminals[i].inr.inr_db,
                        fast.terminals[i].inr.inr_db,
                    ] {
                        worst = worst.max((got - o.db(mode)).abs());
                    }
                    if mode == InrMode::Linear && o.dl_mw > 0.0 && o.ul_mw > 0.0 {
                        live += 1;
                    }
                }
            }
        }
        assert!(worst <= 1e-6, "worst disagreement {worst:e} dB");
        assert!(
            live >= 5,
            "only {live} terminals see both DL and UL interference"
        );
        format!("worst disagreement {worst:.2e} dB over 20 seeds, {live} live terminals")
    });
}

fn inrs(m: &Micro, c: &ControlState) -> Vec<f64> {
    snapshot_metrics(&m.scenario, c, &m.snapshot, &EvalOptions::default())
        .unwrap()
        .inr_db()
        .collect()
}

fn with_headroom(m: &mut Micro) {
    let max = m.scenario.params.gnb_max_power_dbm;
    for s in &mut m.control.sectors {
        s.tx_power_dbm = s.tx_power_dbm.min(max - 3.0);
    }
}

#[test]
fn c3_monotonicity() {
    criterion(3, "monotonicity", || {
        let shape = MicroShape {
            max_sectors: 6,
            max_users: 8,
            max_terminals: 3,
        };
        let (mut mutes, mut max_rise, mut worst_single): (usize, f64, f64) = (0, f64::MIN, 0.0);
        for seed in 0..100u64 {
            let mut m = micro_scenario(1000 + seed, shape);
            with_headroom(&mut m);
            let before = inrs(&m, &m.control);
            for k in 0..m.control.sectors.len() {
                if m.control.sectors[k].muted {
                    continue;
                }
                let mut c = m.control.clone();
                c.sectors[k].muted = true;
                for (a, b) in before.iter().zip(inrs(&m, &c)) {
                    assert!(
                        b <= a + 1e-12,
                        "seed {seed}: muting sector {k} raised INR {a} -> {b}"
                    );
                }
                mutes += 1;
            }
            let mut c = m.control.clone();
            for s in &mut c.sectors {
                s.tx_power_dbm += 3.0;
            }
            for (a, b) in before.iter().zip(inrs(&m, &c)) {
                assert!(
                    b - a <= 3.0 + 1e-9 && b >= a - 1e-12,
                    "seed {seed}: +3 dB moved INR {a} -> {b}"
                );
                if *a > INR_FLOOR_DB {
                    max_rise = max_rise.max(b - a);
                }
            }

            let single = MicroShape {
                max_sectors: 1,
                max_users: 0,
                max_terminals: 3,
            };
            let mut m = micro_scenario(5000 + seed, single);
            with_headroom(&mut m);
            m.control.sectors[0].muted = false;
            let before = inrs(&m, &m.control);
            let mut c = m.control.clone();
            c.sectors[0].tx_power_dbm += 3.0;
            for (a, b) in before.iter().zip(inrs(&m, &c)) {
                worst_single = worst_single.max(((b - a) - 3.0).abs());
            }
        }
        assert!(
            worst_single <= 1e-9,
            "single interferer off by {worst_single:e} dB"
        );
        format!(
            "100 scenarios, {mutes} mute checks, largest +3 dB rise {max_rise:.4} dB, single-interferer error {worst_single:.1e} dB"
        )
    });
}

#[test]
fn c4_gradient_correctness() {
    criterion(4, "gradient correctness", || {
        let mut worst: f64 = 0.0;
        for case in 0..10u64 {
            let r = gradcheck::check(case);
            assert!(r.n_params <= 64, "net too large: {}", r.n_params);
            assert!(
                r.max_rel_err <= 1e-4,
                "case {case}: relative error {:e} at param {}",
                r.max_rel_err,
                r.worst_index
            );
            worst = worst.max(r.max_rel_err);
        }
        format!("10 networks, worst relative error {worst:.2e}")
    });
}

#[test]
fn c5_ppo_toy_optimum() {
    criterion(5, "PPO toy optimum", || {
        let mut ps = Vec::new();
        for seed in 0..3 {
            let hp = Hyperparams {
                seed,
                updates: 200,
                ..Hyperparams::default()
            };
            let out = train(|_| Ok(Corridor::default()), &hp, &mut |_, _| Ok(())).unwrap();
            assert!(out.curve.len() <= 200);
            let p = [0usize, 1]
                .iter()
                .map(|&s| sigmoid(out.params.forward(&Corridor::observe(s)).unwrap().0.logits[0]))
                .fold(1.0, f64::min);
            assert!(p > 0.95, "seed {seed}: p(optimal) = {p}");
            ps.push(format!("{p:.4}"));
        }
        format!("p(optimal) per seed: {}", ps.join(", "))
    });
}

#[test]
fn c6_desk_scale_coexistence() {
    criterion(6, "desk-scale coexistence", || {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig {
            seed: 1,
            out: Some(dir.path().join("train")),
            ..RunConfig::default()
        };
        cfg.scenario.ntn_densities = vec![6e-8];
        cfg.ppo.updates = 300;
        cfg.train.log_every = 0;
        assert!(cfg.ppo.updates <= 500);

        let trained = commands::train_cmd(&cfg).unwrap();
        let curve = &trained[0].curve;
        let (r0, r1) = (
            curve[0].running_reward,
            curve.last().unwrap().running_reward,
        );
        assert!(r1 > r0, "running reward fell from {r0} to {r1}");

        cfg.out = Some(dir.path().join("none"));
        let none = commands::simulate(&cfg, &ControllerSpec::None)
            .unwrap()
            .remove(0);
        cfg.out = Some(dir.path().join("policy"));
        let ckpt = ControllerSpec::Checkpoint(trained[0].checkpoint.clone());
        let policy = commands::simulate(&cfg, &ckpt).unwrap().remove(0);
        for s in [&none, &policy] {
            assert_eq!((s.n_sectors, s.n_terminals, s.n_snapshots), (60, 24, 40));
        }
        let gain = none.median_inr_db - policy.median_inr_db;
        assert!(
            gain >= 3.0,
            "median INR only {gain:.3} dB below no coordination"
        );
        assert!(policy.mean_chi >= 0.70, "policy chi {:.4}", policy.mean_chi);

        cfg.out = Some(dir.path().join("ascent"));
        cfg.scenario.ntn_densities = vec![6e-8, 1e-7, 3e-7];
        assert_eq!(cfg.baseline.threshold_db, -6.0);
        let ascent = commands::simulate(&cfg, &ControllerSpec::Ascent).unwrap();
        let chi: Vec<f64> = ascent.iter().map(|s| s.mean_chi).collect();
        assert!(
            chi.windows(2).all(|w| w[1] < w[0]),
            "ASCENT chi not strictly decreasing: {chi:?}"
        );

        format!(
            "median INR {:.2} vs {:.2} dB (gain {gain:.2}), policy chi {:.3}, ASCENT chi {:.3} > {:.3} > {:.3}, running reward {r0:.3} -> {r1:.3}",
            policy.median_inr_db, none.median_inr_db, policy.mean_chi, chi[0], chi[1], chi[2]
        )
    });
}

#[test]
fn c7_determinism() {
    criterion(7, "determinism", || {
        let root = tempfile::tempdir().unwrap();
        let cfg = common::write_config(root.path(), 3);
        let cfg = common::s(&cfg);
        let mut files = 0;
        let mut outs = Vec::new();
        for rep in ["a", "b"] {
            let d = root.path().join(rep);
            let p = |x: &str| d.join(x).to_str().unwrap().to_string();
            common::run_ok(&[
                "simulate",
                "--config",
                cfg,
                "--controller",
                "none",
                "--out",
                &p("none"),
            ]);
            common::run_ok(&[
                "simulate",
                "--config",
                cfg,
                "--controller",
                "ascent",
                "--out",
                &p("ascent"),
            ]);
            common::run_ok(&[
                "train",
                "--config",
                cfg,
                "--seeds",
                "2",
                "--out",
                &p("train"),
            ]);
            let ckpt = p("train/policy_seed3.json");
            common::run_ok(&[
                "evaluate",
                "--config",
                cfg,
                "--checkpoint",
                &ckpt,
                "--out",
                &p("eval"),
            ]);
            common::run_ok(&[
                "compare",
                "--run",
                &format!("none={}", p("none")),
                "--run",
                &format!("ascent={}", p("ascent")),
                "--run",
                &format!("policy={}", p("eval")),
                "--out",
                &p("cmp"),
            ]);
            outs.push(d);
        }
        for sub in ["none", "ascent", "train", "eval", "cmp"] {
            let a = common::dir_bytes(&outs[0].join(sub));
            let b = common::dir_bytes(&outs[1].join(sub));
            assert!(!a.is_empty(), "{sub}: no output");
            assert_eq!(
                a.keys().collect::<Vec<_>>(),
                b.keys().collect::<Vec<_>>(),
                "{sub}: file sets differ"
            );
            for (name, bytes) in &a {
                assert!(bytes == &b[name], "{sub}/{name} differs between runs");
            }
            files += a.len();
        }
        format!(
            "{files} files byte-identical across two runs of simulate, train, evaluate and compare"
        )
    });
}

#[test]
fn c8_two_log_inr_switch() {
    criterion(8, "two-log INR switch", || {
        let root = tempfile::tempdir().unwrap();
        let (mut checked, mut worst): (usize, f64) = (0, 0.0);
        for seed in 0..10u64 {
            let cfg = common::write_config(root.path(), 100 + seed);
            let lin_dir = root.path().join(format!("lin{seed}"));
            let lit_dir = root.path().join(format!("lit{seed}"));
            common::run_ok(&[
                "simulate",
                "--config",
                common::s(&cfg),
                "--out",
                common::s(&lin_dir),
            ]);
            common::run_ok(&[
                "simulate",
                "--config",
                common::s(&cfg),
                "--paper-literal-inr",
                "--out",
                common::s(&lit_dir),
            ]);
            let (_, lin): (_, Vec<RecordRow>) = read_csv(&lin_dir.join("records.csv")).unwrap();
            let (h, lit): (_, Vec<RecordRow>) = read_csv(&lit_dir.join("records.csv")).unwrap();
            assert_eq!(h["inr_mode"], "paperliteral");
            assert_eq!(lin.len(), lit.len());
            let mut here = 0;
            for (a, b) in lin.iter().zip(&lit) {
                assert_eq!((a.snapshot, a.terminal_id), (b.snapshot, b.terminal_id));
                let (d, u) = (a.dl_interference_mw, a.ul_interference_mw);
                if !(d > 0.0 && u > 0.0) || b.inr_db <= INR_FLOOR_DB {
                    continue;
                }
                let predicted = 10.0 * u.log10() - (10.0 * (d + u).log10() - 10.0 * d.log10());
                worst = worst.max(((b.inr_db - a.inr_db) - predicted).abs());
                here += 1;
            }
            assert!(
                here > 0,
                "seed {seed}: no terminal with both DL and UL interference"
            );
            checked += here;
        }
        assert!(worst <= 1e-9, "identity off by {worst:e} dB");
        format!("10 micro-scenarios, {checked} terminal-snapshots, worst deviation {worst:.1e} dB")
    });
}
