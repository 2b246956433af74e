//! Monte Carlo answer processes drawn from a [`TransitionKernel`] (K = 1).
//!
//! Every trial draws from its own substream keyed by `(seed, trial)`, so the
//! results do not depend on how rayon schedules the trials.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pool::{AnswerPool, ClusterId, Continuation, Group, PoolMetadata, Problem, Sample};
use crate::rng::substream;
use crate::signals::prefix_consistency_score;
use crate::theory::TransitionKernel;
use crate::voting::{majority_vote, pc_wmv, Weight, WeightFamily};

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub kernel: TransitionKernel<f64>,
    /// Groups per trial.
    pub n: usize,
    pub trials: usize,
    pub weight: WeightFamily,
    pub seed: u64,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.trials == 0 {
            return Err(Error::InvalidArgument("simulation needs N >= 1 and trials >= 1".into()));
        }
        Ok(())
    }
}

/// Pre-built categorical samplers for `pi` and every row of `T`.
pub struct KernelSampler {
    initial: WeightedIndex<f64>,
    rows: Vec<WeightedIndex<f64>>,
}

impl KernelSampler {
    pub fn new(kernel: &TransitionKernel<f64>) -> Result<Self> {
        let build = |w: &[f64]| {
            WeightedIndex::new(w.iter().copied()).map_err(|e| Error::InvalidKernel(e.to_string()))
        };
        Ok(Self {
            initial: build(kernel.pi())?,
            rows: kernel.rows().iter().map(|r| build(r)).collect::<Result<_>>()?,
        })
    }

    /// `(a_i, regenerated a_i)`.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let a = self.initial.sample(rng);
        let regen = self.rows[a].sample(rng);
        (a, regen)
    }

    pub fn sample_group<R: Rng + ?Sized>(&self, rng: &mut R) -> Group {
        let (a, regen) = self.sample_pair(rng);
        Group::new(vec![cluster(a), cluster(regen)], 1)
    }
}

fn cluster(index: usize) -> ClusterId {
    ClusterId(index as u32)
}

/// Draws one group: `a_i ~ pi`, then its regeneration from `T(a_i, .)`.
pub fn sample_group<R: Rng + ?Sized>(kernel: &TransitionKernel<f64>, rng: &mut R) -> Result<Group> {
    Ok(KernelSampler::new(kernel)?.sample_group(rng))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ObjectiveEstimate {
    pub mean: f64,
    /// Standard error across trials; NaN with a single trial.
    pub std_error: f64,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo estimate of `Phi_w(a)` from `(1/N) sum_i w(c_i(a))`.
pub fn estimate_objective(config: &SimConfig, answer: usize) -> Result<ObjectiveEstimate> {
    config.validate()?;
    if answer >= config.kernel.m() {
        return Err(Error::InvalidArgument(format!("answer {answer} outside the kernel")));
    }
    let sampler = KernelSampler::new(&config.kernel)?;
    let target = cluster(answer);
    let per_trial: Vec<f64> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(config.seed, &[t as u64]);
            let total: f64 = (0..config.n)
                .map(|_| {
                    let g = sampler.sample_group(&mut rng);
                    config.weight.weight(prefix_consistency_score(&g, target).value::<f64>())
                })
                .sum();
            total / config.n as f64
        })
        .collect();
    let (mean, std_error) = mean_and_se(&per_trial);
    Ok(ObjectiveEstimate { mean, std_error })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuccessRate {
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    /// Two binomial standard errors.
    pub ci: f64,
}

impl SuccessRate {
    fn from_outcomes(outcomes: impl Iterator<Item = bool>) -> Self {
        let (mut successes, mut trials) = (0, 0);
        for ok in outcomes {
            trials += 1;
            successes += usize::from(ok);
        }
        let rate = successes as f64 / trials as f64;
        let ci = 2.0 * (rate * (1.0 - rate) / trials as f64).sqrt();
        Self { successes, trials, rate, ci }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceResult {
    pub mv: SuccessRate,
    pub pc: SuccessRate,
}

/// Fraction of trials in which Standard MV (on the initial answers) and
/// PC-WMV (on the groups) return the correct answer.
pub fn convergence_experiment(config: &SimConfig) -> Result<ConvergenceResult> {
    config.validate()?;
    let sampler = KernelSampler::new(&config.kernel)?;
    let correct = cluster(config.kernel.correct());
    let outcomes: Vec<(bool, bool)> = (0..config.trials)
        .into_par_iter()
        .map(|t| -> Result<(bool, bool)> {
            let mut rng = substream(config.seed, &[t as u64]);
            let groups: Vec<Group> = (0..config.n).map(|_| sampler.sample_group(&mut rng)).collect();
            let initials: Vec<ClusterId> = groups.iter().map(|g| g.members[0]).collect();
            let mv = majority_vote(&initials)?;
            let pc = pc_wmv::<f64, _>(&groups, &config.weight)?;
            Ok((mv == correct, pc == correct))
        })
        .collect::<Result<_>>()?;
    Ok(ConvergenceResult {
        mv: SuccessRate::from_outcomes(outcomes.iter().map(|o| o.0)),
        pc: SuccessRate::from_outcomes(outcomes.iter().map(|o| o.1)),
    })
}

/// One CSV row: a method's success rate at one grid value of `pi(a*)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryRow {
    pub method: String,
    pub pi: f64,
    pub success_rate: f64,
    pub ci: f64,
    pub successes: usize,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryScan {
    pub rows: Vec<BoundaryRow>,
    /// Smallest grid value at which PC-WMV succeeds in more than half the trials.
    pub crossover: Option<f64>,
    pub threshold: f64,
}

#[derive(Clone, Debug)]
pub struct BoundaryConfig {
    pub r_c: f64,
    pub r_w: f64,
    pub grid: Vec<f64>,
    pub n: usize,
    pub trials: usize,
    pub weight: WeightFamily,
    pub seed: u64,
}

/// Parses `start:stop:step` (inclusive of `stop` up to rounding).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::InvalidArgument(format!("grid `{spec}` is not start:stop:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || stop < start {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    // round to the step's resolution so 0.30 + 3 * 0.02 prints as 0.36
    Ok((0..count).map(|i| round12(start + i as f64 * step)).collect())
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Runs [`convergence_experiment`] along a binary kernel family with fixed
/// `(r_C, r_W)`. Each grid point reuses the same seed.
pub fn boundary_scan(config: &BoundaryConfig) -> Result<BoundaryScan> {
    let threshold = crate::theory::binary_threshold(config.r_c, config.r_w)?;
    let pc_name = format!("pc-{}", config.weight.name());
    let mut rows = Vec::with_capacity(2 * config.grid.len());
    let mut crossover = None;
    for &pi in &config.grid {
        let kernel = TransitionKernel::binary(pi, config.r_c, config.r_w)?;
        let sim = SimConfig { kernel, n: config.n, trials: config.trials, weight: config.weight, seed: config.seed };
        let result = convergence_experiment(&sim)?;
        if crossover.is_none() && result.pc.rate > 0.5 {
            crossover = Some(pi);
        }
        for (name, rate) in [("mv".to_string(), result.mv), (pc_name.clone(), result.pc)] {
            rows.push(BoundaryRow {
                method: name,
                pi,
                success_rate: rate.rate,
                ci: rate.ci,
                successes: rate.successes,
                trials: rate.trials,
            });
        }
    }
    Ok(BoundaryScan { rows, crossover, threshold })
}

/// Shape of a synthetic pool drawn from a kernel.
#[derive(Clone, Debug)]
pub struct SyntheticPoolSpec {
    pub problems: usize,
    /// Initial samples per problem.
    pub n: usize,
    /// Regenerations per sample.
    pub k: usize,
    pub tau: f64,
    /// Token length of every initial trace; a continuation costs the
    /// untruncated remainder.
    pub initial_tokens: u64,
}

/// A pool whose samples follow `kernel`: initial answers from `pi`, each
/// regeneration independently from `T(a_i, .)`. Answer index `j` becomes
/// cluster `j` with text `"j"`; problem `q` uses substream `(seed, q)`.
pub fn synthetic_pool(kernel: &TransitionKernel<f64>, spec: &SyntheticPoolSpec, seed: u64) -> Result<AnswerPool> {
    if !(spec.tau > 0.0 && spec.tau < 1.0) || spec.n == 0 || spec.initial_tokens == 0 {
        return Err(Error::InvalidArgument("synthetic pool needs n >= 1, tokens >= 1, tau in (0,1)".into()));
    }
    let sampler = KernelSampler::new(kernel)?;
    let prefix = (spec.tau * spec.initial_tokens as f64).ceil() as u64;
    let cont_tokens = (spec.initial_tokens - prefix).max(1);
    let problems = (0..spec.problems)
        .map(|q| {
            let mut rng = substream(seed, &[q as u64]);
            let samples = (0..spec.n)
                .map(|_| {
                    let a = sampler.initial.sample(&mut rng);
                    let continuations = (0..spec.k)
                        .map(|_| {
                            let r = sampler.rows[a].sample(&mut rng);
                            Continuation {
                                tau: spec.tau,
                                answer_raw: Some(r.to_string()),
                                cluster: Some(cluster(r)),
                                n_tokens: cont_tokens,
                            }
                        })
                        .collect();
                    Sample {
                        answer_raw: Some(a.to_string()),
                        cluster: Some(cluster(a)),
                        n_tokens: spec.initial_tokens,
                        logprobs: None,
                        continuations,
                        verbal: Vec::new(),
                    }
                })
                .collect();
            Problem { id: format!("q{q}"), gold_cluster: Some(cluster(kernel.correct())), samples, partial: false }
        })
        .collect();
    Ok(AnswerPool {
        metadata: PoolMetadata {
            model: "synthetic".into(),
            benchmark: "kernel".into(),
            n: spec.n,
            taus: vec![spec.tau],
            k: spec.k,
            truncation: None,
        },
        problems,
    })
}
