//! Reliability signals: prefix consistency per candidate, the DeepConf
//! log-probability family, and the CISC confidence sources.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pool::{ClusterId, Group, LogprobRecord, Sample, VerbalMode, TOP_K};
use crate::scalar::Scalar;

/// Sliding-window length for the bottom-10% score.
pub const BOTTOM_WINDOW: usize = 1024;
/// Number of final positions averaged by the tail score.
pub const TAIL_WINDOW: usize = 2024;

/// Reproducibility of one candidate within a group: `count / slots`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConsistencyScore {
    pub candidate: ClusterId,
    pub count: usize,
    pub slots: usize,
}

impl ConsistencyScore {
    pub fn value<T: Scalar>(&self) -> T {
        T::ratio(self.count, self.slots)
    }
}

pub fn prefix_consistency_score(group: &Group, candidate: ClusterId) -> ConsistencyScore {
    ConsistencyScore { candidate, count: group.multiplicity(candidate), slots: group.slots }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SignalKind {
    FirstToken,
    /// Average token confidence; also reported as self-certainty.
    Mean,
    Bottom10,
    BlockMin,
    Tail,
    ResponseProbability,
    VerbalBinary,
    VerbalPercent,
    PTrue,
}

impl SignalKind {
    pub const ALL: [SignalKind; 9] = [
        SignalKind::FirstToken,
        SignalKind::Mean,
        SignalKind::Bottom10,
        SignalKind::BlockMin,
        SignalKind::Tail,
        SignalKind::ResponseProbability,
        SignalKind::VerbalBinary,
        SignalKind::VerbalPercent,
        SignalKind::PTrue,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SignalKind::FirstToken => "deepconf-first-token",
            SignalKind::Mean => "deepconf-mean",
            SignalKind::Bottom10 => "deepconf-bottom10",
            SignalKind::BlockMin => "deepconf-block-min",
            SignalKind::Tail => "deepconf-tail",
            SignalKind::ResponseProbability => "response-prob",
            SignalKind::VerbalBinary => "verbal-binary",
            SignalKind::VerbalPercent => "verbal-100",
            SignalKind::PTrue => "p-true",
        }
    }

    pub fn is_deepconf(self) -> bool {
        matches!(
            self,
            SignalKind::FirstToken
                | SignalKind::Mean
                | SignalKind::Bottom10
                | SignalKind::BlockMin
                | SignalKind::Tail
        )
    }

    /// Secondary rating call this signal reads, if any.
    pub fn verbal_mode(self) -> Option<VerbalMode> {
        match self {
            SignalKind::VerbalBinary | SignalKind::PTrue => Some(VerbalMode::Binary),
            SignalKind::VerbalPercent => Some(VerbalMode::Percent),
            _ => None,
        }
    }
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SignalKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown signal `{s}`")))
    }
}

/// A per-trace score; `value == None` means the signal could not be read.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceScore {
    pub kind: SignalKind,
    pub value: Option<f64>,
}

impl TraceScore {
    pub fn present(kind: SignalKind, value: f64) -> Self {
        Self { kind, value: Some(value) }
    }

    pub fn missing(kind: SignalKind) -> Self {
        Self { kind, value: None }
    }

    pub fn is_missing(&self) -> bool {
        self.value.is_none()
    }
}

/// `C_t`: negative mean of the top-20 log-probabilities at one position.
pub fn deepconf_token_confidence(top20: &[f64]) -> Result<f64> {
    if top20.len() != TOP_K {
        return Err(Error::InvalidArgument(format!(
            "expected {TOP_K} log-probabilities, got {}",
            top20.len()
        )));
    }
    Ok(-top20.iter().sum::<f64>() / TOP_K as f64)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean of the lowest 10% of sliding-window means (at least one window).
fn bottom_decile_of_windows(conf: &[f64], window: usize) -> f64 {
    if conf.len() <= window {
        return mean(conf);
    }
    let mut prefix = Vec::with_capacity(conf.len() + 1);
    prefix.push(0.0);
    for c in conf {
        prefix.push(prefix.last().unwrap() + c);
    }
    let mut windows: Vec<f64> = (0..=conf.len() - window)
        .map(|s| (prefix[s + window] - prefix[s]) / window as f64)
        .collect();
    windows.sort_by(f64::total_cmp);
    let keep = (windows.len() / 10).max(1);
    mean(&windows[..keep])
}

fn block_min(conf: &[f64], boundaries: &[usize]) -> f64 {
    let mut cuts: Vec<usize> =
        boundaries.iter().copied().filter(|&b| b > 0 && b < conf.len()).collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut start = 0;
    let mut lowest = f64::INFINITY;
    for end in cuts.into_iter().chain(std::iter::once(conf.len())) {
        lowest = lowest.min(mean(&conf[start..end]));
        start = end;
    }
    lowest
}

/// KL divergence of the renormalized top-20 distribution from uniform.
fn first_token_kl(top20: &[f64; TOP_K]) -> f64 {
    let max = top20.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = top20.iter().map(|l| (l - max).exp()).sum();
    top20
        .iter()
        .map(|l| {
            let p = (l - max).exp() / z;
            if p > 0.0 {
                p * (p * TOP_K as f64).ln()
            } else {
                0.0
            }
        })
        .sum::<f64>()
        .max(0.0)
}

pub fn deepconf_trace_score(record: &LogprobRecord, kind: SignalKind) -> Result<TraceScore> {
    if record.top20.is_empty() {
        return Err(Error::InvalidArgument("empty log-probability record".into()));
    }
    let conf: Vec<f64> =
        record.top20.iter().map(|row| -row.iter().sum::<f64>() / TOP_K as f64).collect();
    let value = match kind {
        SignalKind::FirstToken => first_token_kl(&record.top20[0]),
        SignalKind::Mean => mean(&conf),
        SignalKind::Bottom10 => bottom_decile_of_windows(&conf, BOTTOM_WINDOW),
        SignalKind::BlockMin => block_min(&conf, &record.block_boundaries),
        SignalKind::Tail => mean(&conf[conf.len().saturating_sub(TAIL_WINDOW)..]),
        other => {
            return Err(Error::InvalidArgument(format!("{other} is not a DeepConf score")));
        }
    };
    Ok(TraceScore::present(kind, value))
}

/// Length-normalized geometric mean of sampled-token probabilities.
pub fn response_probability(token_logprobs: &[f64]) -> Result<TraceScore> {
    if token_logprobs.is_empty() {
        return Err(Error::InvalidArgument("empty token log-probabilities".into()));
    }
    Ok(TraceScore::present(SignalKind::ResponseProbability, mean(token_logprobs).exp()))
}

/// Reads a self-rating: everything before the first `)` is scanned for the
/// first integer. Never fails; an unusable rating is a missing score.
pub fn parse_verbal_confidence(rating_text: &str, mode: VerbalMode) -> TraceScore {
    let kind = match mode {
        VerbalMode::Binary => SignalKind::VerbalBinary,
        VerbalMode::Percent => SignalKind::VerbalPercent,
    };
    let head = rating_text.split(')').next().unwrap_or("");
    let Some(start) = head.find(|c: char| c.is_ascii_digit()) else {
        return TraceScore::missing(kind);
    };
    let digits: String = head[start..].chars().take_while(char::is_ascii_digit).collect();
    let Ok(n) = digits.parse::<u64>() else {
        return TraceScore::missing(kind);
    };
    match mode {
        VerbalMode::Binary if n <= 1 => TraceScore::present(kind, n as f64),
        VerbalMode::Percent if n <= 100 => TraceScore::present(kind, n as f64 / 100.0),
        _ => TraceScore::missing(kind),
    }
}

/// Renormalized probability of the `1` verdict against `0`.
pub fn p_true(verdict_top20: &[(String, f64)]) -> TraceScore {
    let find = |digit: &str| verdict_top20.iter().find(|(t, _)| t.trim() == digit).map(|(_, l)| *l);
    let value = match (find("1"), find("0")) {
        (Some(l1), Some(l0)) => {
            let m = l1.max(l0);
            let (e1, e0) = ((l1 - m).exp(), (l0 - m).exp());
            Some(e1 / (e1 + e0))
        }
        (Some(_), None) => Some(1.0),
        (None, Some(_)) => Some(0.0),
        (None, None) => None,
    };
    TraceScore { kind: SignalKind::PTrue, value }
}

/// Extracts `kind` for one sample; absent records yield a missing score.
pub fn sample_signal(sample: &Sample, kind: SignalKind) -> TraceScore {
    match kind {
        k if k.is_deepconf() => match &sample.logprobs {
            Some(rec) if !rec.top20.is_empty() => {
                deepconf_trace_score(rec, k).unwrap_or(TraceScore::missing(k))
            }
            _ => TraceScore::missing(k),
        },
        SignalKind::ResponseProbability => sample
            .logprobs
            .as_ref()
            .and_then(|r| response_probability(&r.token_logprobs).ok())
            .unwrap_or(TraceScore::missing(kind)),
        SignalKind::VerbalBinary | SignalKind::VerbalPercent => {
            let mode = kind.verbal_mode().expect("verbal signal");
            sample
                .verbal_record(mode)
                .map(|v| parse_verbal_confidence(&v.rating_text, mode))
                .unwrap_or(TraceScore::missing(kind))
        }
        SignalKind::PTrue => sample
            .verbal_record(VerbalMode::Binary)
            .and_then(|v| v.verdict_token_top20.as_deref())
            .map(p_true)
            .unwrap_or(TraceScore::missing(kind)),
        _ => unreachable!("all kinds covered"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Imputation {
    NothingMissing,
    Imputed(usize),
    /// Every score was missing; they stay missing and vote with zero weight.
    AllMissing,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Replaces missing scores of one problem with the median of the rest.
pub fn impute_missing_scores(scores: &mut [TraceScore]) -> Imputation {
    let mut present: Vec<f64> = scores.iter().filter_map(|s| s.value).collect();
    let missing = scores.len() - present.len();
    if missing == 0 {
        return Imputation::NothingMissing;
    }
    if present.is_empty() {
        return Imputation::AllMissing;
    }
    present.sort_by(f64::total_cmp);
    let fill = median(&present);
    for s in scores.iter_mut().filter(|s| s.value.is_none()) {
        s.value = Some(fill);
    }
    Imputation::Imputed(missing)
}
