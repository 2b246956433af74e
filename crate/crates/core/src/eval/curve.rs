//! Monotone envelopes, budget-at-target interpolation, token-efficiency
//! ratios and their parametric bootstrap.

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::budget::CostAccuracyCurve;
use crate::rng::{substream, StreamRng};

/// A (cost, accuracy) operating point with two-sigma uncertainties on both.
/// Fixed-budget curve points have `budget_ci = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub budget: f64,
    pub budget_ci: f64,
    pub accuracy: f64,
    pub ci: f64,
}

impl CostAccuracyCurve {
    pub fn operating_points(&self) -> Vec<OperatingPoint> {
        self.points
            .iter()
            .map(|p| OperatingPoint { budget: p.budget, budget_ci: 0.0, accuracy: p.accuracy, ci: p.ci })
            .collect()
    }
}

/// Running maximum of accuracy along increasing budget.
pub fn monotone_envelope(curve: &CostAccuracyCurve) -> CostAccuracyCurve {
    let mut out = curve.clone();
    let mut best = f64::NEG_INFINITY;
    for p in &mut out.points {
        best = best.max(p.accuracy);
        p.accuracy = best;
    }
    out
}

/// Sorts `(budget, accuracy)` pairs by budget and applies the running max.
pub fn envelope_pairs(mut pairs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = f64::NEG_INFINITY;
    for p in &mut pairs {
        best = best.max(p.1);
        p.1 = best;
    }
    pairs
}

/// Budget at which a monotone envelope first reaches `target`, linear in
/// `(accuracy, log10 budget)` on the first bracketing segment. `None` when
/// the target lies above the envelope.
pub fn budget_at_accuracy(envelope: &[(f64, f64)], target: f64) -> Result<Option<f64>> {
    if envelope.is_empty() {
        return Err(Error::InvalidArgument("empty envelope".into()));
    }
    let Some(i) = envelope.iter().position(|&(_, acc)| acc >= target) else {
        return Ok(None);
    };
    if i == 0 {
        return Ok(Some(envelope[0].0));
    }
    let (b0, a0) = envelope[i - 1];
    let (b1, a1) = envelope[i];
    let frac = (target - a0) / (a1 - a0);
    let log_b = b0.log10() + frac * (b1.log10() - b0.log10());
    Ok(Some(10f64.powf(log_b)))
}

pub fn ratio_target(pass1: f64, plateau: f64, alpha: f64) -> f64 {
    pass1 + alpha * (plateau - pass1)
}

/// `B_method / B_mv` at the target `pass1 + alpha (plateau - pass1)`.
pub fn token_efficiency_ratio(
    method_envelope: &[(f64, f64)],
    mv_envelope: &[(f64, f64)],
    pass1: f64,
    plateau: f64,
    alpha: f64,
) -> Result<Option<f64>> {
    if plateau < pass1 {
        return Err(Error::Undefined(format!("plateau {plateau} below Pass@1 {pass1}")));
    }
    let target = ratio_target(pass1, plateau, alpha);
    let mv = budget_at_accuracy(mv_envelope, target)?;
    let method = budget_at_accuracy(method_envelope, target)?;
    Ok(match (method, mv) {
        (Some(m), Some(b)) => Some(m / b),
        _ => None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioEstimate {
    /// From the unperturbed curves; `None` when unreachable.
    pub ratio: Option<f64>,
    /// Two standard deviations of the replicate ratios; suppressed when
    /// fewer than half the replicates reach the target.
    pub ci: Option<f64>,
    pub reach_fraction: f64,
}

fn pairs(points: &[OperatingPoint]) -> Vec<(f64, f64)> {
    points.iter().map(|p| (p.budget, p.accuracy)).collect()
}

/// MV plateau: the stored accuracy at the largest budget.
pub fn plateau(mv: &[OperatingPoint]) -> Result<OperatingPoint> {
    mv.iter()
        .copied()
        .max_by(|a, b| a.budget.total_cmp(&b.budget))
        .ok_or_else(|| Error::InvalidArgument("empty MV curve".into()))
}

fn ratio_for(method: &[OperatingPoint], mv: &[OperatingPoint], pass1: f64, alpha: f64) -> Result<Option<f64>> {
    let top = plateau(mv)?.accuracy;
    // a perturbed plateau can dip below Pass@1; clamp so the target stays defined
    let top = top.max(pass1);
    token_efficiency_ratio(&envelope_pairs(pairs(method)), &envelope_pairs(pairs(mv)), pass1, top, alpha)
}

fn perturb(points: &[OperatingPoint], rng: &mut StreamRng) -> Vec<OperatingPoint> {
    points
        .iter()
        .map(|p| {
            let za: f64 = StandardNormal.sample(rng);
            let zb: f64 = StandardNormal.sample(rng);
            OperatingPoint {
                budget: (p.budget + zb * p.budget_ci / 2.0).max(1.0),
                accuracy: p.accuracy + za * p.ci / 2.0,
                ..*p
            }
        })
        .collect()
}

/// Ratio of each perturbed replicate (`None` where the target is missed).
pub fn bootstrap_replicates(
    method: &[OperatingPoint],
    mv: &[OperatingPoint],
    pass1: f64,
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    (0..replicates)
        .map(|r| {
            let mut rng = substream(seed, &[r as u64]);
            let m = perturb(method, &mut rng);
            let b = perturb(mv, &mut rng);
            ratio_for(&m, &b, pass1, alpha)
        })
        .collect()
}

/// Point ratio plus a parametric-bootstrap CI: each replicate adds
/// `N(0, (ci/2)^2)` noise to every accuracy and `N(0, (budget_ci/2)^2)` to
/// every natural-stopping cost (the MV plateau moves with its curve), then
/// recomputes envelopes, target and ratio. Pass@1 stays fixed.
pub fn parametric_bootstrap_ratio(
    method: &[OperatingPoint],
    mv: &[OperatingPoint],
    pass1: f64,
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<RatioEstimate> {
    if replicates == 0 {
        return Err(Error::InvalidArgument("need at least one bootstrap replicate".into()));
    }
    if plateau(mv)?.accuracy < pass1 {
        return Err(Error::Undefined("majority-vote plateau below Pass@1".into()));
    }
    let ratio = ratio_for(method, mv, pass1, alpha)?;
    let reached: Vec<f64> =
        bootstrap_replicates(method, mv, pass1, alpha, replicates, seed)?.into_iter().flatten().collect();
    let reach_fraction = reached.len() as f64 / replicates as f64;
    let ci = if reach_fraction >= 0.5 {
        let n = reached.len() as f64;
        // shift by the first replicate so identical replicates give exactly zero
        let shift = reached[0];
        let mean = reached.iter().map(|x| x - shift).sum::<f64>() / n;
        let var = if reached.len() > 1 {
            reached.iter().map(|x| (x - shift - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(2.0 * var.sqrt())
    } else {
        None
    };
    Ok(RatioEstimate { ratio, ci, reach_fraction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::budget::CurvePoint;

    fn curve(points: &[(f64, f64)]) -> CostAccuracyCurve {
        CostAccuracyCurve {
            method: "m".into(),
            points: points.iter().map(|&(budget, accuracy)| CurvePoint { budget, accuracy, ci: 0.0 }).collect(),
        }
    }

    fn accs(c: &CostAccuracyCurve) -> Vec<f64> {
        c.points.iter().map(|p| p.accuracy).collect()
    }

    #[test]
    fn envelope_cases() {
        let c = curve(&[(10.0, 0.5), (20.0, 0.4), (30.0, 0.6)]);
        let e = monotone_envelope(&c);
        assert_eq!(accs(&e), vec![0.5, 0.5, 0.6]);
        assert_eq!(monotone_envelope(&e), e);
        let single = curve(&[(10.0, 0.3)]);
        assert_eq!(monotone_envelope(&single), single);
    }

    #[test]
    fn interpolation_cases() {
        let env = [(1000.0, 0.4), (10000.0, 0.6)];
        let b = budget_at_accuracy(&env, 0.5).unwrap().unwrap();
        assert!((b / 10f64.powf(3.5) - 1.0).abs() < 1e-12);
        assert_eq!(budget_at_accuracy(&env, 0.6).unwrap(), Some(10000.0));
        assert_eq!(budget_at_accuracy(&env, 0.4).unwrap(), Some(1000.0));
        assert_eq!(budget_at_accuracy(&[(1.0, 0.9)], 0.99).unwrap(), None);
        assert!(budget_at_accuracy(&[], 0.5).is_err());
    }

    #[test]
    fn ratio_targets() {
        assert_eq!(ratio_target(0.4, 0.8, 0.0), 0.4);
        assert_eq!(ratio_target(0.4, 0.8, 1.0), 0.8);
        let env = [(1000.0, 0.4), (2000.0, 0.7), (8000.0, 0.8)];
        for alpha in [0.75, 0.9, 0.99] {
            assert_eq!(token_efficiency_ratio(&env, &env, 0.4, 0.8, alpha).unwrap(), Some(1.0));
        }
        assert!(token_efficiency_ratio(&env, &env, 0.9, 0.8, 0.5).is_err());
    }

    fn op(budget: f64, accuracy: f64, ci: f64) -> OperatingPoint {
        OperatingPoint { budget, budget_ci: 0.0, accuracy, ci }
    }

    #[test]
    fn zero_noise_bootstrap_is_degenerate() {
        let mv = [op(1e3, 0.4, 0.0), op(1e4, 0.6, 0.0), op(1e5, 0.8, 0.0)];
        let m = [op(1e3, 0.5, 0.0), op(1e4, 0.8, 0.0), op(1e5, 0.8, 0.0)];
        let est = parametric_bootstrap_ratio(&m, &mv, 0.4, 0.75, 50, 42).unwrap();
        assert_eq!(est.ci, Some(0.0));
        assert_eq!(est.reach_fraction, 1.0);
        let want = token_efficiency_ratio(
            &envelope_pairs(pairs(&m)),
            &envelope_pairs(pairs(&mv)),
            0.4,
            0.8,
            0.75,
        )
        .unwrap();
        assert_eq!(est.ratio, want);
    }

    #[test]
    fn replicate_mean_near_closed_form() {
        // MV gains 0.1 per decade from 0.4 at 1e3, the method 0.2 per decade
        // (capped at 0.8); target 0.7 sits at 1e6 vs 10^4.5
        let budgets: Vec<f64> = (0..41).map(|i| 10f64.powf(3.0 + i as f64 * 0.1)).collect();
        let mv: Vec<OperatingPoint> =
            budgets.iter().map(|&b| op(b, 0.4 + 0.1 * (b.log10() - 3.0), 0.004)).collect();
        let m: Vec<OperatingPoint> =
            budgets.iter().map(|&b| op(b, (0.4 + 0.2 * (b.log10() - 3.0)).min(0.8), 0.004)).collect();
        let closed = 10f64.powf(-1.5);
        let reps: Vec<f64> = bootstrap_replicates(&m, &mv, 0.4, 0.75, 400, 42).unwrap().into_iter().flatten().collect();
        let mean = reps.iter().sum::<f64>() / reps.len() as f64;
        let est = parametric_bootstrap_ratio(&m, &mv, 0.4, 0.75, 400, 42).unwrap();
        assert!((est.ratio.unwrap() - closed).abs() < 1e-9);
        let sd = est.ci.unwrap() / 2.0;
        assert!(sd > 0.0);
        assert!((mean - closed).abs() <= 3.0 * sd, "{mean} vs {closed} (sd {sd})");
    }

    #[test]
    fn unreachable_target_suppresses_ci() {
        let mv = [op(1e3, 0.4, 0.0), op(1e4, 0.9, 0.0)];
        let m = [op(1e3, 0.4, 0.0), op(1e4, 0.5, 0.0)];
        let est = parametric_bootstrap_ratio(&m, &mv, 0.4, 0.9, 10, 1).unwrap();
        assert_eq!(est.ratio, None);
        assert_eq!(est.ci, None);
        assert_eq!(est.reach_fraction, 0.0);
    }
}
