//! Empirical CDFs with the midpoint convention `F(x_(i)) = (i - 1/2) / n`.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

pub const PERCENTILES: [f64; 5] = [5.0, 25.0, 50.0, 75.0, 95.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfSummary {
    /// Sorted samples.
    pub values: Vec<f64>,
    pub fractions: Vec<f64>,
    pub median: f64,
    pub p5: f64,
    pub p25: f64,
    pub p75: f64,
    pub p95: f64,
}

/// Value at cumulative fraction `q` (0..=1), linear between midpoint knots and
/// clamped to the extreme samples outside them.
fn quantile(values: &[f64], fractions: &[f64], q: f64) -> f64 {
    let n = values.len();
    if q <= fractions[0] {
        return values[0];
    }
    if q >= fractions[n - 1] {
        return values[n - 1];
    }
    let hi = fractions.partition_point(|&f| f < q);
    if fractions[hi] == q {
        return values[hi];
    }
    let lo = hi - 1;
    let t = (q - fractions[lo]) / (fractions[hi] - fractions[lo]);
    values[lo] + t * (values[hi] - values[lo])
}

pub fn compute_cdf(samples: &[f64]) -> Result<CdfSummary> {
    if samples.is_empty() {
        bail!("CDF of an empty sample");
    }
    if let Some(x) = samples.iter().find(|x| !x.is_finite()) {
        bail!("non-finite sample {x} in CDF input");
    }
    let mut values = samples.to_vec();
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let fractions: Vec<f64> = (0..values.len()).map(|i| (i as f64 + 0.5) / n).collect();
    let at = |p: f64| quantile(&values, &fractions, p / 100.0);
    Ok(CdfSummary {
        median: at(50.0),
        p5: at(5.0),
        p25: at(25.0),
        p75: at(75.0),
        p95: at(95.0),
        values,
        fractions,
    })
}

pub fn median(samples: &[f64]) -> Result<f64> {
    Ok(compute_cdf(samples)?.median)
}
