//! Cluster bootstrap over problems and quantile-binned pooled rates.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::substream;

/// Lower and upper percentiles of a two-sigma interval.
pub const LOWER_PERCENTILE: f64 = 0.02275;
pub const UPPER_PERCENTILE: f64 = 0.97725;

/// Quantile of sorted data with linear interpolation between order
/// statistics (`h = (n - 1) q`).
pub fn quantile_linear(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum PValue {
    Value(f64),
    /// No replicate reached zero; the bound is `1 / replicates`.
    Below(f64),
}

impl fmt::Display for PValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PValue::Value(p) => write!(f, "{p}"),
            PValue::Below(b) => write!(f, "<{b}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BootstrapSummary {
    /// Statistic on the original sample.
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub p_value: PValue,
}

fn summarize(estimate: f64, mut reps: Vec<f64>) -> BootstrapSummary {
    let r = reps.len() as f64;
    let le = reps.iter().filter(|&&v| v <= 0.0).count() as f64 / r;
    let ge = reps.iter().filter(|&&v| v >= 0.0).count() as f64 / r;
    let p = (2.0 * le.min(ge)).min(1.0);
    reps.sort_by(f64::total_cmp);
    BootstrapSummary {
        estimate,
        lower: quantile_linear(&reps, LOWER_PERCENTILE),
        upper: quantile_linear(&reps, UPPER_PERCENTILE),
        p_value: if p == 0.0 { PValue::Below(1.0 / r) } else { PValue::Value(p) },
    }
}

/// Resamples whole problems with replacement and evaluates several
/// statistics on each resample, so differences between them keep their
/// joint distribution.
pub fn cluster_bootstrap_many<R, F>(
    problems: &[R],
    statistics: F,
    replicates: usize,
    seed: u64,
) -> Result<Vec<BootstrapSummary>>
where
    R: Sync,
    F: Fn(&[&R]) -> Vec<f64> + Sync,
{
    if problems.len() < 2 {
        return Err(Error::InvalidArgument("cluster bootstrap needs at least two problems".into()));
    }
    if replicates == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    let all: Vec<&R> = problems.iter().collect();
    let estimates = statistics(&all);
    let reps: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, &[r as u64]);
            let pick: Vec<&R> = (0..problems.len()).map(|_| &problems[rng.random_range(0..problems.len())]).collect();
            statistics(&pick)
        })
        .collect();
    if reps.iter().any(|v| v.len() != estimates.len()) {
        return Err(Error::InvalidArgument("statistic returned a varying number of values".into()));
    }
    Ok(estimates
        .iter()
        .enumerate()
        .map(|(j, &est)| summarize(est, reps.iter().map(|v| v[j]).collect()))
        .collect())
}

pub fn cluster_bootstrap<R, F>(problems: &[R], statistic: F, replicates: usize, seed: u64) -> Result<BootstrapSummary>
where
    R: Sync,
    F: Fn(&[&R]) -> f64 + Sync,
{
    Ok(cluster_bootstrap_many(problems, |s| vec![statistic(s)], replicates, seed)?[0])
}

/// Per-problem trial record: empirical Pass@1 and `k` successes in `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BinRecord {
    pub pass1: f64,
    pub k: u64,
    pub n: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub problems: usize,
    pub successes: u64,
    pub trials: u64,
    pub rate: f64,
}

/// Equal-count quantile bins on Pass@1 with duplicate edges merged; the
/// last bin is closed on the right. Bins without trials are omitted.
pub fn binned_rates(records: &[BinRecord], bins: usize) -> Result<Vec<Bin>> {
    if records.is_empty() || bins == 0 {
        return Err(Error::InvalidArgument("binning needs records and at least one bin".into()));
    }
    let mut sorted: Vec<f64> = records.iter().map(|r| r.pass1).collect();
    sorted.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = (0..=bins).map(|j| quantile_linear(&sorted, j as f64 / bins as f64)).collect();
    edges.dedup();
    let count = edges.len().saturating_sub(1).max(1);
    let mut out: Vec<Bin> = (0..count)
        .map(|j| Bin {
            lower: edges[j],
            upper: *edges.get(j + 1).unwrap_or(&edges[j]),
            problems: 0,
            successes: 0,
            trials: 0,
            rate: 0.0,
        })
        .collect();
    for r in records {
        let j = edges[..count].iter().rposition(|&e| e <= r.pass1).unwrap_or(0);
        let bin = &mut out[j];
        bin.problems += 1;
        bin.successes += r.k;
        bin.trials += r.n;
    }
    out.retain(|b| b.trials > 0);
    for b in &mut out {
        b.rate = b.successes as f64 / b.trials as f64;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_match_linear_rule() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_linear(&v, 0.0), 1.0);
        assert_eq!(quantile_linear(&v, 0.5), 2.5);
        assert_eq!(quantile_linear(&v, 1.0), 4.0);
        assert!((quantile_linear(&v, 0.1) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn constant_statistic_has_zero_width() {
        let problems: Vec<f64> = vec![0.3; 8];
        let s = cluster_bootstrap(&problems, |ps| ps.iter().map(|&&x| x).sum::<f64>() / ps.len() as f64, 200, 42)
            .unwrap();
        assert_eq!(s.lower, s.upper);
        assert_eq!(s.p_value, PValue::Below(1.0 / 200.0));
    }

    #[test]
    fn sign_flipping_statistic_has_large_p() {
        let problems: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let s = cluster_bootstrap(&problems, |ps| ps.iter().map(|&&x| x).sum::<f64>() / ps.len() as f64, 1000, 42)
            .unwrap();
        match s.p_value {
            PValue::Value(p) => assert!(p > 0.5, "{p}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn paired_difference_is_narrower() {
        // f and g share a large per-problem component
        let problems: Vec<(f64, f64)> =
            (0..60).map(|i| {
                let base = ((i * 37) % 17) as f64;
                (base + 0.1 * (i % 3) as f64, base)
            }).collect();
        let mean = |ps: &[&(f64, f64)], pick: fn(&(f64, f64)) -> f64| ps.iter().map(|p| pick(p)).sum::<f64>() / ps.len() as f64;
        let out = cluster_bootstrap_many(
            &problems,
            |ps| {
                let f = mean(ps, |p| p.0);
                let g = mean(ps, |p| p.1);
                vec![f, g, f - g]
            },
            500,
            42,
        )
        .unwrap();
        let half = |s: &BootstrapSummary| (s.upper - s.lower) / 2.0;
        assert!(half(&out[2]) < half(&out[0]) + half(&out[1]));
        assert!(half(&out[2]) < 0.1 * half(&out[0]));
    }

    #[test]
    fn bins_collapse_on_equal_values() {
        let recs: Vec<BinRecord> = (0..12).map(|_| BinRecord { pass1: 0.4, k: 1, n: 2 }).collect();
        let bins = binned_rates(&recs, 5).unwrap();
        assert_eq!(bins.len(), 1);
        assert_eq!(bins[0].rate, 0.5);
    }

    #[test]
    fn uniform_pass1_gives_equal_bins() {
        let recs: Vec<BinRecord> = (0..10).map(|i| BinRecord { pass1: i as f64 / 10.0, k: i % 2, n: 1 }).collect();
        let bins = binned_rates(&recs, 5).unwrap();
        assert_eq!(bins.len(), 5);
        assert!(bins.iter().all(|b| b.problems == 2));
        assert!(bins.iter().all(|b| (0.0..=1.0).contains(&b.rate)));
    }
}
