//! Budget-matched trials: draw samples with replacement until the
//! cumulative cost reaches the budget, then aggregate.
//!
//! A single with-replacement stream per (problem, trial) is shared by every
//! budget on the grid, so the curve is evaluated by reading off prefixes of
//! that stream. Each budget still sees an independent-across-trials draw
//! with the right marginal distribution.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pool::{build_group, AnswerPool, ClusterId, Problem, VerbalMode};
use crate::rng::{substream, DEFAULT_SEED};
use crate::signals::{impute_missing_scores, prefix_consistency_score, sample_signal, SignalKind, TraceScore};
use crate::voting::{filtered_vote, VoteTally, Weight, WeightFamily};

/// A fixed-budget aggregation method.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Mv,
    Pc(WeightFamily),
    /// Weighted MV with a trace-level signal as the weight.
    Weighted(SignalKind),
    /// Keep the top `percent`% of traces by `kind`, then weighted MV.
    Filtered { kind: SignalKind, percent: u32 },
}

const FILTER_KINDS: [SignalKind; 2] = [SignalKind::Bottom10, SignalKind::Tail];
const FILTER_PERCENTS: [u32; 2] = [10, 90];

impl Method {
    /// Every method name accepted by [`Method::from_str`].
    pub fn all() -> Vec<Method> {
        let mut out = vec![Method::Mv];
        out.extend([WeightFamily::LINEAR, WeightFamily::QUADRATIC, WeightFamily::CUBIC].map(Method::Pc));
        out.extend(SignalKind::ALL.iter().map(|&k| Method::Weighted(k)));
        for kind in FILTER_KINDS {
            for percent in FILTER_PERCENTS {
                out.push(Method::Filtered { kind, percent });
            }
        }
        out
    }

    pub fn name(&self) -> String {
        match self {
            Method::Mv => "mv".into(),
            Method::Pc(w) => format!("pc-{}", w.name()),
            Method::Weighted(kind) => kind.name().into(),
            Method::Filtered { kind, percent } => format!("{}-top{percent}", kind.name()),
        }
    }

    pub fn uses_groups(&self) -> bool {
        matches!(self, Method::Pc(_))
    }

    fn signal(&self) -> Option<SignalKind> {
        match self {
            Method::Weighted(k) | Method::Filtered { kind: k, .. } => Some(*k),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::all().into_iter().find(|m| m.name() == s).ok_or_else(|| {
            Error::InvalidArgument(format!("unknown method `{s}`"))
        })
    }
}

/// Tau and K used to build PC groups.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupSpec {
    pub tau: f64,
    pub k: usize,
}

/// Tokens read when `method` consumes sample `i` of `problem`.
pub fn draw_cost(problem: &Problem, i: usize, method: &Method, groups: GroupSpec) -> u64 {
    let s = &problem.samples[i];
    let rating = |mode| s.verbal_record(mode).map_or(0, |v| v.rating_n_tokens_to_parse);
    match method {
        Method::Pc(_) => s.group_cost(groups.tau, groups.k),
        Method::Weighted(SignalKind::VerbalBinary | SignalKind::PTrue) => s.n_tokens + rating(VerbalMode::Binary),
        Method::Weighted(SignalKind::VerbalPercent) => s.n_tokens + rating(VerbalMode::Percent),
        _ => s.n_tokens,
    }
}

/// A problem with every per-sample quantity the method needs precomputed.
#[derive(Clone, Debug)]
pub struct PreparedProblem {
    method: Method,
    gold: ClusterId,
    costs: Vec<u64>,
    /// Votes cast when the sample is drawn (MV, weighted, PC).
    votes: Vec<Vec<(ClusterId, f64)>>,
    /// Parsed answer and score, for filtered voting.
    scored: Vec<Option<(ClusterId, f64)>>,
}

impl PreparedProblem {
    /// Fails for problems without gold or samples, or with too few
    /// regenerations for a PC method.
    pub fn new(problem: &Problem, method: Method, groups: GroupSpec) -> Result<Self> {
        let gold = problem
            .gold_cluster
            .ok_or_else(|| Error::Undefined(format!("problem `{}` has no gold answer", problem.id)))?;
        if problem.samples.is_empty() {
            return Err(Error::Undefined(format!("problem `{}` has no samples", problem.id)));
        }
        let n = problem.samples.len();
        let costs = (0..n).map(|i| draw_cost(problem, i, &method, groups)).collect();
        let scores: Vec<Option<f64>> = match method.signal() {
            Some(kind) => {
                // missing scores take the problem's median
                let mut traces: Vec<TraceScore> = problem.samples.iter().map(|s| sample_signal(s, kind)).collect();
                impute_missing_scores(&mut traces);
                traces.into_iter().map(|t| t.value).collect()
            }
            None => vec![Some(1.0); n],
        };
        let mut votes = Vec::with_capacity(n);
        let mut scored = Vec::with_capacity(n);
        for (s, score) in problem.samples.iter().zip(&scores) {
            scored.push(s.cluster.zip(*score));
            votes.push(match method {
                Method::Pc(w) => {
                    let g = build_group(s, groups.tau, groups.k)?;
                    g.distinct()
                        .into_iter()
                        .map(|a| (a, w.weight(prefix_consistency_score(&g, a).value::<f64>())))
                        .collect()
                }
                _ => s.cluster.zip(*score).into_iter().collect(),
            });
        }
        Ok(Self { method, gold, costs, votes, scored })
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn cost(&self, i: usize) -> u64 {
        self.costs[i]
    }

    /// Correctness at each budget (ascending) along one shared draw stream.
    pub fn run_trial<R: Rng + ?Sized>(&self, budgets: &[f64], rng: &mut R) -> Vec<bool> {
        let mut tally = VoteTally::<f64>::new();
        let mut kept: (Vec<ClusterId>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut spent = 0u64;
        let mut out = Vec::with_capacity(budgets.len());
        for &budget in budgets {
            // the draw that crosses the budget is included
            while (spent as f64) < budget {
                let i = rng.random_range(0..self.len());
                spent += self.costs[i];
                for &(a, w) in &self.votes[i] {
                    tally.add(a, w);
                }
                if let Some((a, s)) = self.scored[i] {
                    kept.0.push(a);
                    kept.1.push(s);
                }
            }
            let answer = match self.method {
                Method::Filtered { percent, .. } => filtered_vote(&kept.0, &kept.1, percent as f64 / 100.0).ok(),
                _ => tally.argmax(),
            };
            out.push(answer == Some(self.gold));
        }
        out
    }
}

/// One budget-constrained trial.
pub fn budget_trial<R: Rng + ?Sized>(problem: &PreparedProblem, budget: f64, rng: &mut R) -> Result<bool> {
    if !(budget >= 1.0) {
        return Err(Error::InvalidArgument(format!("budget {budget} below 1 token")));
    }
    Ok(problem.run_trial(&[budget], rng)[0])
}

/// Log-uniform budget grid `10^(start + i * step)`, `i = 0..points`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BudgetGrid {
    pub start_exp: f64,
    pub step_exp: f64,
    pub points: usize,
}

impl Default for BudgetGrid {
    fn default() -> Self {
        Self { start_exp: 3.0, step_exp: 0.01, points: 401 }
    }
}

impl BudgetGrid {
    /// `start:stop:step` in log10 units, e.g. `3:7:0.01`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("budget grid `{spec}` is not start:stop:step (log10)"));
        let nums: Vec<f64> = spec
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let [start, stop, step] = nums[..] else { return Err(bad()) };
        if !(step > 0.0) || stop < start || start < 0.0 {
            return Err(bad());
        }
        let points = ((stop - start) / step + 1e-9).floor() as usize + 1;
        Ok(Self { start_exp: start, step_exp: step, points })
    }

    pub fn budgets(&self) -> Vec<f64> {
        (0..self.points).map(|i| 10f64.powf(self.start_exp + i as f64 * self.step_exp)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalConfig {
    pub grid: BudgetGrid,
    /// Trials per budget point.
    pub trials: usize,
    pub seed: u64,
    pub alphas: Vec<f64>,
    pub replicates: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            grid: BudgetGrid::default(),
            trials: 500,
            seed: DEFAULT_SEED,
            alphas: vec![0.75, 0.90, 0.99],
            replicates: 1000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub budget: f64,
    pub accuracy: f64,
    /// Two standard errors of the trial mean.
    pub ci: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostAccuracyCurve {
    pub method: String,
    pub points: Vec<CurvePoint>,
}

/// `2 sigma` with `sigma^2 = sum_q p_q (1 - p_q) / (M |Q|^2)`.
pub fn trial_mean_ci(per_problem: &[f64], trials: usize) -> f64 {
    let q = per_problem.len() as f64;
    let var: f64 = per_problem.iter().map(|p| p * (1.0 - p)).sum::<f64>() / (trials as f64 * q * q);
    2.0 * var.sqrt()
}

/// Problems that can be scored (those with a gold answer and samples).
pub fn scorable(pool: &AnswerPool) -> impl Iterator<Item = (usize, &Problem)> {
    pool.problems.iter().enumerate().filter(|(_, p)| p.gold_cluster.is_some() && !p.samples.is_empty())
}

/// Mean budget-trial accuracy across problems at every grid budget.
pub fn cost_accuracy_curve(
    pool: &AnswerPool,
    method: Method,
    groups: GroupSpec,
    config: &EvalConfig,
) -> Result<CostAccuracyCurve> {
    if config.trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let budgets = config.grid.budgets();
    let prepared: Vec<(usize, PreparedProblem)> = scorable(pool)
        .map(|(q, p)| PreparedProblem::new(p, method, groups).map(|pp| (q, pp)))
        .collect::<Result<_>>()?;
    if prepared.is_empty() {
        return Err(Error::Undefined("pool has no problem with a gold answer".into()));
    }
    // per problem: hit counts per budget
    let hits: Vec<Vec<u32>> = prepared
        .par_iter()
        .map(|(q, pp)| {
            let mut counts = vec![0u32; budgets.len()];
            for m in 0..config.trials {
                let mut rng = substream(config.seed, &[*q as u64, m as u64]);
                for (c, ok) in counts.iter_mut().zip(pp.run_trial(&budgets, &mut rng)) {
                    *c += u32::from(ok);
                }
            }
            counts
        })
        .collect();
    let m = config.trials as f64;
    let points = budgets
        .iter()
        .enumerate()
        .map(|(j, &budget)| {
            let p_hat: Vec<f64> = hits.iter().map(|h| h[j] as f64 / m).collect();
            CurvePoint {
                budget,
                accuracy: p_hat.iter().sum::<f64>() / p_hat.len() as f64,
                ci: trial_mean_ci(&p_hat, config.trials),
            }
        })
        .collect();
    Ok(CostAccuracyCurve { method: method.name(), points })
}

/// Expected accuracy of a single uniformly drawn sample; unparsed samples
/// count as wrong.
pub fn benchmark_pass1(pool: &AnswerPool) -> Result<f64> {
    let per: Vec<f64> = scorable(pool)
        .map(|(_, p)| {
            let right = p.samples.iter().filter(|s| p.is_correct(s.cluster)).count();
            right as f64 / p.samples.len() as f64
        })
        .collect();
    if per.is_empty() {
        return Err(Error::Undefined("pool has no problem with a gold answer".into()));
    }
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}
