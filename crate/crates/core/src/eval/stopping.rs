//! Natural stopping points of the adaptive rules (AC, ESC).

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::budget::{scorable, trial_mean_ci};
use crate::eval::curve::OperatingPoint;
use crate::pool::{AnswerPool, ClusterId};
use crate::rng::substream;
use crate::voting::{ac_stop, esc_stop, StopOutcome};

pub const AC_THRESHOLDS: [f64; 10] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.97, 0.99, 0.995, 0.999];
pub const ESC_WINDOWS: [usize; 9] = [2, 3, 4, 5, 6, 7, 8, 9, 10];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StoppingRule {
    Ac(f64),
    Esc(usize),
}

impl StoppingRule {
    pub fn family(&self) -> &'static str {
        match self {
            StoppingRule::Ac(_) => "ac",
            StoppingRule::Esc(_) => "esc",
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            StoppingRule::Ac(c) => c,
            StoppingRule::Esc(w) => w as f64,
        }
    }

    pub fn ac_sweep() -> Vec<StoppingRule> {
        AC_THRESHOLDS.iter().map(|&c| StoppingRule::Ac(c)).collect()
    }

    pub fn esc_sweep() -> Vec<StoppingRule> {
        ESC_WINDOWS.iter().map(|&w| StoppingRule::Esc(w)).collect()
    }

    pub fn run(&self, stream: &[Option<ClusterId>]) -> Result<StopOutcome> {
        match *self {
            StoppingRule::Ac(c) => ac_stop(stream.iter().copied(), c),
            StoppingRule::Esc(w) => esc_stop(stream.iter().copied(), w),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StoppingPoint {
    pub method: String,
    pub param: f64,
    /// Mean tokens consumed at the natural stopping point.
    pub budget: f64,
    /// Two trial-level standard errors of the mean cost.
    pub budget_ci: f64,
    pub accuracy: f64,
    pub ci: f64,
}

impl StoppingPoint {
    pub fn operating_point(&self) -> OperatingPoint {
        OperatingPoint { budget: self.budget, budget_ci: self.budget_ci, accuracy: self.accuracy, ci: self.ci }
    }
}

/// Runs every rule on `trials` with-replacement streams of `horizon` draws
/// per problem. Rules share the streams of a (problem, trial) cell.
pub fn ac_esc_curve(
    pool: &AnswerPool,
    rules: &[StoppingRule],
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<StoppingPoint>> {
    if rules.is_empty() {
        return Err(Error::InvalidArgument("empty stopping sweep".into()));
    }
    if horizon == 0 || trials == 0 {
        return Err(Error::InvalidArgument("horizon and trials must be positive".into()));
    }
    let problems: Vec<(usize, &crate::pool::Problem)> = scorable(pool).collect();
    if problems.is_empty() {
        return Err(Error::Undefined("pool has no problem with a gold answer".into()));
    }
    // cells[problem][trial][rule] = (cost, correct)
    let cells: Vec<Vec<Vec<(u64, bool)>>> = problems
        .par_iter()
        .map(|(q, problem)| -> Result<Vec<Vec<(u64, bool)>>> {
            (0..trials)
                .map(|m| {
                    let mut rng = substream(seed, &[*q as u64, m as u64]);
                    let draws: Vec<usize> =
                        (0..horizon).map(|_| rng.random_range(0..problem.samples.len())).collect();
                    let stream: Vec<Option<ClusterId>> = draws.iter().map(|&i| problem.samples[i].cluster).collect();
                    rules
                        .iter()
                        .map(|rule| {
                            let out = rule.run(&stream)?;
                            let cost = draws[..out.consumed].iter().map(|&i| problem.samples[i].n_tokens).sum();
                            Ok((cost, problem.is_correct(out.answer)))
                        })
                        .collect()
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let nq = problems.len() as f64;
    let points = rules
        .iter()
        .enumerate()
        .map(|(r, rule)| {
            let per_trial_cost: Vec<f64> = (0..trials)
                .map(|m| cells.iter().map(|c| c[m][r].0 as f64).sum::<f64>() / nq)
                .collect();
            let mean_cost = per_trial_cost.iter().sum::<f64>() / trials as f64;
            let budget_ci = if trials > 1 {
                let var = per_trial_cost.iter().map(|c| (c - mean_cost).powi(2)).sum::<f64>()
                    / (trials as f64 - 1.0);
                2.0 * (var / trials as f64).sqrt()
            } else {
                0.0
            };
            let p_hat: Vec<f64> = cells
                .iter()
                .map(|c| c.iter().filter(|t| t[r].1).count() as f64 / trials as f64)
                .collect();
            StoppingPoint {
                method: rule.family().to_string(),
                param: rule.param(),
                budget: mean_cost,
                budget_ci,
                accuracy: p_hat.iter().sum::<f64>() / nq,
                ci: trial_mean_ci(&p_hat, trials),
            }
        })
        .collect();
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pool::{PoolMetadata, Problem, Sample};

    fn pool(answers: &[Option<u32>]) -> AnswerPool {
        let samples = answers
            .iter()
            .map(|a| Sample {
                answer_raw: a.map(|c| c.to_string()),
                cluster: a.map(ClusterId),
                n_tokens: 250,
                logprobs: None,
                continuations: Vec::new(),
                verbal: Vec::new(),
            })
            .collect();
        AnswerPool {
            metadata: PoolMetadata::default(),
            problems: vec![Problem { id: "q".into(), gold_cluster: Some(ClusterId(0)), samples, partial: false }],
        }
    }

    #[test]
    fn deterministic_pool_stops_at_four() {
        let points = ac_esc_curve(&pool(&[Some(0); 3]), &[StoppingRule::Ac(0.95)], 16, 50, 42).unwrap();
        assert_eq!(points[0].budget, 1000.0);
        assert_eq!(points[0].budget_ci, 0.0);
        assert_eq!(points[0].accuracy, 1.0);
    }

    #[test]
    fn esc_never_locks_on_mixed_short_horizon() {
        let p = pool(&[Some(0), Some(1)]);
        let points = ac_esc_curve(&p, &[StoppingRule::Esc(10)], 6, 20, 42).unwrap();
        assert_eq!(points[0].budget, 6.0 * 250.0);
    }

    #[test]
    fn unanimous_wrong_pool_has_zero_accuracy() {
        let mut p = pool(&[Some(2); 4]);
        let rules: Vec<StoppingRule> = StoppingRule::ac_sweep().into_iter().chain(StoppingRule::esc_sweep()).collect();
        let pts = ac_esc_curve(&p, &rules, 32, 10, 42).unwrap();
        assert!(pts.iter().all(|x| x.accuracy == 0.0));
        p.problems[0].gold_cluster = Some(ClusterId(2));
        let pts = ac_esc_curve(&p, &rules, 32, 10, 42).unwrap();
        assert!(pts.iter().all(|x| x.accuracy == 1.0));
        assert_eq!(pts.len(), 19);
    }
}
