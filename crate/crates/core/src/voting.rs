//! Aggregators: Standard MV, weighted MV, PC-WMV, confidence-filtered
//! voting and the AC / ESC adaptive-stopping rules.
//!
//! Every argmax breaks ties toward the lowest cluster id.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::pool::{ClusterId, Group};
use crate::scalar::Scalar;
use crate::signals::prefix_consistency_score;

pub use crate::special::regularized_incomplete_beta;

/// Accumulated non-negative votes per cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct VoteTally<T> {
    votes: BTreeMap<ClusterId, T>,
}

impl<T: Scalar> Default for VoteTally<T> {
    fn default() -> Self {
        Self { votes: BTreeMap::new() }
    }
}

impl<T: Scalar> VoteTally<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `weight` to `cluster`. Zero weights are not recorded as votes.
    pub fn add(&mut self, cluster: ClusterId, weight: T) {
        debug_assert!(weight >= T::zero(), "negative vote");
        if weight > T::zero() {
            let slot = self.votes.entry(cluster).or_insert_with(T::zero);
            *slot = *slot + weight;
        }
    }

    pub fn get(&self, cluster: ClusterId) -> T {
        self.votes.get(&cluster).copied().unwrap_or_else(T::zero)
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClusterId, T)> + '_ {
        self.votes.iter().map(|(k, v)| (*k, *v))
    }

    /// Highest-voted cluster; the lowest id wins ties.
    pub fn argmax(&self) -> Option<ClusterId> {
        let mut best: Option<(ClusterId, T)> = None;
        for (&id, &v) in &self.votes {
            match best {
                Some((_, bv)) if v <= bv => {}
                _ => best = Some((id, v)),
            }
        }
        best.map(|(id, _)| id)
    }

    pub fn winner(&self) -> Result<ClusterId> {
        self.argmax().ok_or(Error::NoVotes)
    }
}

/// Maps a consistency score in `[0, 1]` to a vote weight.
pub trait Weight<T> {
    fn weight(&self, c: T) -> T;
}

/// Power family `w(c) = c^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WeightFamily {
    exponent: u32,
}

impl WeightFamily {
    pub const LINEAR: Self = Self { exponent: 1 };
    pub const QUADRATIC: Self = Self { exponent: 2 };
    pub const CUBIC: Self = Self { exponent: 3 };

    pub fn new(exponent: u32) -> Result<Self> {
        if exponent == 0 {
            return Err(Error::InvalidArgument("weight exponent must be positive".into()));
        }
        Ok(Self { exponent })
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn name(&self) -> String {
        match self.exponent {
            1 => "linear".into(),
            2 => "quadratic".into(),
            3 => "cubic".into(),
            n => format!("power{n}"),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "linear" => Ok(Self::LINEAR),
            "quadratic" => Ok(Self::QUADRATIC),
            "cubic" => Ok(Self::CUBIC),
            other => other
                .strip_prefix("power")
                .and_then(|n| n.parse().ok())
                .map(Self::new)
                .unwrap_or_else(|| Err(Error::InvalidArgument(format!("unknown weight `{other}`")))),
        }
    }
}

impl<T: Scalar> Weight<T> for WeightFamily {
    fn weight(&self, c: T) -> T {
        c.powi(self.exponent)
    }
}

/// Most frequent answer.
pub fn majority_vote(answers: &[ClusterId]) -> Result<ClusterId> {
    let mut tally = VoteTally::<u64>::new();
    for &a in answers {
        tally.add(a, 1);
    }
    tally.winner()
}

/// Argmax of `sum_i weight_i * 1[a_i = a]`.
pub fn generic_wmv<T: Scalar>(answers: &[ClusterId], weights: &[T]) -> Result<ClusterId> {
    if answers.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} answers but {} weights",
            answers.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= T::zero())) {
        return Err(Error::InvalidArgument("weights must be non-negative".into()));
    }
    let mut tally = VoteTally::new();
    for (&a, &w) in answers.iter().zip(weights) {
        tally.add(a, w);
    }
    tally.winner()
}

/// PC-WMV tally: every distinct candidate of every group receives
/// `w(multiplicity / (K + 1))`.
pub fn pc_tally<T: Scalar, W: Weight<T>>(groups: &[Group], w: &W) -> Result<VoteTally<T>> {
    let mut tally = VoteTally::new();
    let Some(first) = groups.first() else {
        return Ok(tally);
    };
    if groups.iter().any(|g| g.slots != first.slots) {
        return Err(Error::InvalidArgument("groups must share K".into()));
    }
    for g in groups {
        for a in g.distinct() {
            let c = prefix_consistency_score(g, a).value::<T>();
            tally.add(a, w.weight(c));
        }
    }
    Ok(tally)
}

pub fn pc_wmv<T: Scalar, W: Weight<T>>(groups: &[Group], w: &W) -> Result<ClusterId> {
    pc_tally(groups, w)?.winner()
}

fn retention_count(eta: f64, n: usize) -> usize {
    // the epsilon keeps 0.9 * 10 from rounding up to 10
    (((eta * n as f64) - 1e-9).ceil() as usize).clamp(1, n)
}

/// Keeps the `ceil(eta * n)` highest-scoring answers (earlier samples win
/// score ties), then votes with the scores as weights.
pub fn filtered_vote(answers: &[ClusterId], scores: &[f64], eta: f64) -> Result<ClusterId> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidArgument(format!("retain fraction {eta} outside (0, 1]")));
    }
    if answers.len() != scores.len() {
        return Err(Error::InvalidArgument("answers and scores differ in length".into()));
    }
    if answers.is_empty() {
        return Err(Error::NoVotes);
    }
    let mut order: Vec<usize> = (0..answers.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
    order.truncate(retention_count(eta, answers.len()));
    let kept: Vec<ClusterId> = order.iter().map(|&i| answers[i]).collect();
    let weights: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    generic_wmv(&kept, &weights)
}

/// Where an adaptive-stopping rule halted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StopOutcome {
    /// `None` when no parsed answer was consumed.
    pub answer: Option<ClusterId>,
    pub consumed: usize,
    /// False when the stream ran out before the rule fired.
    pub stopped_early: bool,
}

/// Posterior probability that the leader beats the runner-up:
/// `1 - I_{1/2}(n1 + 1, n2 + 1)`.
pub fn ac_criterion(top1: usize, top2: usize) -> f64 {
    1.0 - regularized_incomplete_beta(0.5, top1 as f64 + 1.0, top2 as f64 + 1.0)
        .expect("arguments in domain")
}

#[derive(Default)]
struct RunningCounts {
    counts: BTreeMap<ClusterId, usize>,
}

impl RunningCounts {
    fn push(&mut self, a: ClusterId) {
        *self.counts.entry(a).or_default() += 1;
    }

    fn top_two(&self) -> (usize, usize) {
        let mut best = (0, 0);
        for &c in self.counts.values() {
            if c > best.0 {
                best = (c, best.0);
            } else if c > best.1 {
                best.1 = c;
            }
        }
        best
    }

    fn mode(&self) -> Option<ClusterId> {
        let mut tally = VoteTally::<u64>::new();
        for (&a, &c) in &self.counts {
            tally.add(a, c as u64);
        }
        tally.argmax()
    }
}

/// Adaptive Consistency: stop at the first `k` whose Beta posterior
/// criterion reaches `threshold`. Unparsed entries (`None`) are consumed
/// without voting.
pub fn ac_stop<I>(stream: I, threshold: f64) -> Result<StopOutcome>
where
    I: IntoIterator,
    I::Item: Into<Option<ClusterId>>,
{
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside (0, 1)")));
    }
    let mut counts = RunningCounts::default();
    let mut consumed = 0;
    for item in stream {
        consumed += 1;
        if let Some(a) = item.into() {
            counts.push(a);
        }
        let (n1, n2) = counts.top_two();
        if n1 > 0 && ac_criterion(n1, n2) >= threshold {
            return Ok(StopOutcome { answer: counts.mode(), consumed, stopped_early: true });
        }
    }
    if consumed == 0 {
        return Err(Error::NoVotes);
    }
    Ok(StopOutcome { answer: counts.mode(), consumed, stopped_early: false })
}

/// Early-Stopping Self-Consistency: consume windows of `window` samples and
/// lock the first unanimous window's answer.
pub fn esc_stop<I>(stream: I, window: usize) -> Result<StopOutcome>
where
    I: IntoIterator,
    I::Item: Into<Option<ClusterId>>,
{
    if window < 2 {
        return Err(Error::InvalidArgument("ESC window must be at least 2".into()));
    }
    let mut counts = RunningCounts::default();
    let mut current: Vec<Option<ClusterId>> = Vec::with_capacity(window);
    let mut consumed = 0;
    for item in stream {
        let item = item.into();
        consumed += 1;
        if let Some(a) = item {
            counts.push(a);
        }
        current.push(item);
        if current.len() == window {
            let unanimous = current[0].is_some() && current.iter().all(|x| *x == current[0]);
            if unanimous {
                return Ok(StopOutcome { answer: current[0], consumed, stopped_early: true });
            }
            current.clear();
        }
    }
    if consumed == 0 {
        return Err(Error::NoVotes);
    }
    Ok(StopOutcome { answer: counts.mode(), consumed, stopped_early: false })
}
