//! Central finite-difference check of the PPO loss gradient on small random
//! networks and batches. Shared with the CLI acceptance suite.

#![allow(dead_code)]

use fr3coex_core::ppo::{
    log_prob, ppo_loss, sample_action, LossCoeffs, PolicyDims, PolicyParams, Sample,
};
use fr3coex_core::seeding;
use rand::Rng;

pub struct GradReport {
    pub n_params: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
}

/// Gradients smaller than this are compared in absolute terms.
const SCALE_FLOOR: f64 = 1e-6;
const STEP: f64 = 1e-5;

fn random_dims<R: Rng>(rng: &mut R) -> PolicyDims {
    loop {
        let n_continuous = rng.random_range(0..=2);
        let n_binary = rng.random_range(0..=2);
        if n_continuous + n_binary == 0 {
            continue;
        }
        let dims = PolicyDims {
            obs_dim: rng.random_range(1..=3),
            n_continuous,
            n_binary,
            hidden: vec![rng.random_range(2..=4)],
        };
        let p = PolicyParams::init_random(dims.clone(), 0).unwrap();
        if p.n_params() <= 64 {
            return dims;
        }
    }
}

/// Builds network and batch `case` and compares analytic and numeric gradients.
pub fn check(case: u64) -> GradReport {
    let mut rng = seeding::stream(case, &[0x6AD]);
    let dims = random_dims(&mut rng);
    let params = PolicyParams::init_random(dims.clone(), case).unwrap();
    let coeffs = LossCoeffs {
        clip_epsilon: 0.2,
        value_coeff: 0.5,
        entropy_coeff: 0.01,
    };

    let n = rng.random_range(3..=6);
    let batch: Vec<Sample> = (0..n)
        .map(|_| {
            let obs: Vec<f64> = (0..dims.obs_dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let (dist, _) = params.forward(&obs).unwrap();
            let (action, _) = sample_action(&dist, &mut rng);
            let lp = log_prob(&dist, &action);
            // ratios inside the trust region or well outside it, never on a kink
            let log_ratio = if rng.random_bool(0.6) {
                rng.random_range(-0.1..0.1)
            } else if rng.random_bool(0.5) {
                0.5
            } else {
                -0.5
            };
            Sample {
                obs,
                action,
                old_log_prob: lp - log_ratio,
                advantage: rng.random_range(-2.0..2.0),
                ret: rng.random_range(-1.0..1.0),
            }
        })
        .collect();
    let refs: Vec<&Sample> = batch.iter().collect();

    let (_, grad) = ppo_loss(&params, &refs, &coeffs).unwrap();
    let base = params.flat();
    let loss_at = |v: &[f64]| {
        let mut p = params.clone();
        p.set_flat(v).unwrap();
        ppo_loss(&p, &refs, &coeffs).unwrap().0.total
    };
    let mut report = GradReport {
        n_params: base.len(),
        max_rel_err: 0.0,
        worst_index: 0,
    };
    for i in 0..base.len() {
        let mut up = base.clone();
        up[i] += STEP;
        let mut dn = base.clone();
        dn[i] -= STEP;
        let numeric = (loss_at(&up) - loss_at(&dn)) / (2.0 * STEP);
        let scale = grad[i].abs().max(numeric.abs()).max(SCALE_FLOOR);
        let rel = (grad[i] - numeric).abs() / scale;
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_index = i;
        }
    }
    report
}
