//! Per-problem AUROC, its macro average, and empirical reproduction rates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pool::{build_group, AnswerPool, Problem};
use crate::signals::{impute_missing_scores, prefix_consistency_score, sample_signal, Imputation, SignalKind, TraceScore};

/// Mann-Whitney form of the area under the empirical ROC; tied
/// (positive, negative) pairs count one half.
pub fn per_problem_auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument("scores and labels differ in length".into()));
    }
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Undefined("AUROC needs both classes".into()));
    }
    // twice the statistic, kept integral
    let mut doubled: u64 = 0;
    for p in &pos {
        for n in &neg {
            doubled += match p.partial_cmp(n) {
                Some(std::cmp::Ordering::Greater) => 2,
                Some(std::cmp::Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    Ok(doubled as f64 / (2 * pos.len() * neg.len()) as f64)
}

/// Which per-trace score to rank.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScoreSource {
    Signal(SignalKind),
    /// `c_i(a_i)`: the share of the trace's own group agreeing with its
    /// initial answer.
    PrefixConsistency { tau: f64, k: usize },
}

impl ScoreSource {
    pub fn name(&self) -> String {
        match self {
            ScoreSource::Signal(kind) => kind.name().to_string(),
            ScoreSource::PrefixConsistency { .. } => "prefix-consistency".to_string(),
        }
    }
}

/// Handling of samples whose signal is missing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MissingScores {
    Drop,
    ImputeMedian,
}

/// Scores for every sample of `problem` (parsed or not).
pub fn problem_scores(problem: &Problem, source: ScoreSource) -> Result<Vec<Option<f64>>> {
    problem
        .samples
        .iter()
        .map(|s| match source {
            ScoreSource::Signal(kind) => Ok(sample_signal(s, kind).value),
            ScoreSource::PrefixConsistency { tau, k } => {
                let Some(a) = s.cluster else { return Ok(None) };
                let g = build_group(s, tau, k)?;
                Ok(Some(prefix_consistency_score(&g, a).value::<f64>()))
            }
        })
        .collect()
}

/// Problems with at least one correct and one wrong parsed initial answer.
pub fn is_mixed(problem: &Problem) -> bool {
    let Some(gold) = problem.gold_cluster else { return false };
    let parsed = problem.samples.iter().filter_map(|s| s.cluster);
    let (mut right, mut wrong) = (false, false);
    for c in parsed {
        if c == gold {
            right = true;
        } else {
            wrong = true;
        }
    }
    right && wrong
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MacroAuroc {
    pub value: f64,
    /// Problems that entered the average.
    pub problems: usize,
}

/// Unweighted mean of per-problem AUROC over mixed problems.
pub fn macro_auroc(pool: &AnswerPool, source: ScoreSource, missing: MissingScores) -> Result<MacroAuroc> {
    let mut values = Vec::new();
    for problem in pool.problems.iter().filter(|p| is_mixed(p)) {
        let gold = problem.gold_cluster;
        let raw = problem_scores(problem, source)?;
        let mut scored: Vec<(Option<f64>, bool)> = Vec::new();
        let mut traces = Vec::new();
        for (s, score) in problem.samples.iter().zip(raw) {
            if s.cluster.is_some() {
                scored.push((score, s.cluster == gold));
                traces.push(TraceScore { kind: SignalKind::Mean, value: score });
            }
        }
        if missing == MissingScores::ImputeMedian {
            if impute_missing_scores(&mut traces) == Imputation::AllMissing {
                continue;
            }
            for (slot, t) in scored.iter_mut().zip(&traces) {
                slot.0 = t.value;
            }
        }
        let (scores, labels): (Vec<f64>, Vec<bool>) =
            scored.into_iter().filter_map(|(s, l)| s.map(|s| (s, l))).unzip();
        match per_problem_auroc(&scores, &labels) {
            Ok(v) => values.push(v),
            // dropping missing scores can leave a single class
            Err(Error::Undefined(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if values.is_empty() {
        return Err(Error::Undefined("no problem has both a correct and a wrong scored sample".into()));
    }
    Ok(MacroAuroc { value: values.iter().sum::<f64>() / values.len() as f64, problems: values.len() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReproductionRates {
    pub r_c: f64,
    pub r_w: f64,
    pub d: f64,
    pub problems: usize,
}

/// Per-problem share of regenerations reproducing a correct (resp. wrong)
/// initial answer, macro-averaged over mixed problems. Unparsed
/// regenerations count as not reproducing.
pub fn empirical_rates(pool: &AnswerPool, tau: f64) -> Result<ReproductionRates> {
    let (mut sum_c, mut sum_w, mut count) = (0.0, 0.0, 0usize);
    for problem in pool.problems.iter().filter(|p| is_mixed(p)) {
        let gold = problem.gold_cluster;
        let (mut hit_c, mut n_c, mut hit_w, mut n_w) = (0usize, 0usize, 0usize, 0usize);
        for s in &problem.samples {
            let Some(a) = s.cluster else { continue };
            let conts: Vec<_> = s.continuations_at(tau).collect();
            if conts.is_empty() {
                return Err(Error::InsufficientRegenerations { needed: 1, found: 0, tau });
            }
            let hits = conts.iter().filter(|c| c.cluster == Some(a)).count();
            if Some(a) == gold {
                hit_c += hits;
                n_c += conts.len();
            } else {
                hit_w += hits;
                n_w += conts.len();
            }
        }
        sum_c += hit_c as f64 / n_c as f64;
        sum_w += hit_w as f64 / n_w as f64;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Undefined("no problem has both correct and wrong initial answers".into()));
    }
    let (r_c, r_w) = (sum_c / count as f64, sum_w / count as f64);
    Ok(ReproductionRates { r_c, r_w, d: r_c - r_w, problems: count })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auroc_basic_cases() {
        assert_eq!(per_problem_auroc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(per_problem_auroc(&[0.5; 4], &[true, false, true, false]).unwrap(), 0.5);
        assert_eq!(per_problem_auroc(&[0.1, 0.9], &[true, false]).unwrap(), 0.0);
        assert!(matches!(per_problem_auroc(&[0.1, 0.2], &[true, true]), Err(Error::Undefined(_))));
    }

    /// Trapezoid rule over the ROC polyline, independent of the pairwise count.
    fn trapezoid(scores: &[f64], labels: &[bool]) -> f64 {
        let mut thresholds: Vec<f64> = scores.to_vec();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let p = labels.iter().filter(|&&l| l).count() as f64;
        let n = labels.len() as f64 - p;
        let mut pts = vec![(0.0, 0.0)];
        for t in thresholds {
            let tp = scores.iter().zip(labels).filter(|(s, &l)| l && **s >= t).count() as f64;
            let fp = scores.iter().zip(labels).filter(|(s, &l)| !l && **s >= t).count() as f64;
            pts.push((fp / n, tp / p));
        }
        pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
    }

    #[test]
    fn matches_trapezoid_oracle() {
        let scores = [0.3, 0.7, 0.7, 0.1, 0.5, 0.7, 0.2, 0.9];
        let labels = [true, true, false, false, true, false, false, true];
        let got = per_problem_auroc(&scores, &labels).unwrap();
        assert!((got - trapezoid(&scores, &labels)).abs() < 1e-12);
    }
}
