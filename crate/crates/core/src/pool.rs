//! Answer pools: the on-disk JSON Lines format, validation, answer
//! clustering and per-problem summaries.
//!
//! Line 1 of a pool file holds [`PoolMetadata`]; every following line is one
//! [`Problem`]. Unparsed answers are kept as samples with `cluster: null` so
//! they still cost tokens but never vote.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense per-problem answer cluster identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub u32);

impl std::fmt::Display for ClusterId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const TOP_K: usize = 20;

/// Tolerance used when matching a continuation's tau against declared values.
const TAU_EPS: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PoolMetadata {
    pub model: String,
    pub benchmark: String,
    pub n: usize,
    pub taus: Vec<f64>,
    pub k: usize,
    /// How prefix lengths were counted during generation (`"endpoint"` or the
    /// name of a client-side tokenizer).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnswerPool {
    pub metadata: PoolMetadata,
    pub problems: Vec<Problem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    /// `None` marks a theory-free problem without ground truth.
    pub gold_cluster: Option<ClusterId>,
    pub samples: Vec<Sample>,
    /// Set when fewer than `metadata.n` samples were collected.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub partial: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub answer_raw: Option<String>,
    pub cluster: Option<ClusterId>,
    pub n_tokens: u64,
    #[serde(default)]
    pub logprobs: Option<LogprobRecord>,
    #[serde(default)]
    pub continuations: Vec<Continuation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub verbal: Vec<VerbalRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Continuation {
    pub tau: f64,
    pub answer_raw: Option<String>,
    pub cluster: Option<ClusterId>,
    pub n_tokens: u64,
}

/// Top-20 natural-log probabilities per generated position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogprobRecord {
    pub top20: Vec<[f64; TOP_K]>,
    #[serde(default)]
    pub block_boundaries: Vec<usize>,
    /// Log-probability of the token actually sampled at each position.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub token_logprobs: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerbalMode {
    /// 0/1 self-rating; shared by verbal-binary and P(True).
    Binary,
    /// 0-100 percentage self-rating.
    Percent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerbalRecord {
    pub mode: VerbalMode,
    pub rating_text: String,
    pub rating_n_tokens_to_parse: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating_n_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict_token_top20: Option<Vec<(String, f64)>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceEdge {
    pub problem: String,
    pub a: String,
    pub b: String,
    pub verdict: bool,
}

/// One initial answer plus its regenerations at a single tau. Unparsed
/// entries are dropped from `members`, but `slots` stays `K + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Group {
    pub members: Vec<ClusterId>,
    pub slots: usize,
}

impl Group {
    pub fn new(members: Vec<ClusterId>, k: usize) -> Self {
        debug_assert!(members.len() <= k + 1);
        Self { members, slots: k + 1 }
    }

    pub fn k(&self) -> usize {
        self.slots - 1
    }

    pub fn multiplicity(&self, candidate: ClusterId) -> usize {
        self.members.iter().filter(|&&m| m == candidate).count()
    }

    /// Distinct members in ascending id order.
    pub fn distinct(&self) -> Vec<ClusterId> {
        let mut d = self.members.clone();
        d.sort_unstable();
        d.dedup();
        d
    }
}

impl Sample {
    pub fn continuations_at(&self, tau: f64) -> impl Iterator<Item = &Continuation> {
        self.continuations.iter().filter(move |c| (c.tau - tau).abs() < TAU_EPS)
    }

    pub fn verbal_record(&self, mode: VerbalMode) -> Option<&VerbalRecord> {
        self.verbal.iter().find(|v| v.mode == mode)
    }

    /// Tokens of the initial trace plus the first `k` continuations at `tau`.
    pub fn group_cost(&self, tau: f64, k: usize) -> u64 {
        self.n_tokens + self.continuations_at(tau).take(k).map(|c| c.n_tokens).sum::<u64>()
    }
}

impl Problem {
    pub fn is_correct(&self, cluster: Option<ClusterId>) -> bool {
        matches!((cluster, self.gold_cluster), (Some(c), Some(g)) if c == g)
    }
}

/// Builds the group for `sample` at `tau` using its first `k` continuations.
pub fn build_group(sample: &Sample, tau: f64, k: usize) -> Result<Group> {
    let conts: Vec<&Continuation> = sample.continuations_at(tau).take(k).collect();
    if conts.len() < k {
        return Err(Error::InsufficientRegenerations { needed: k, found: conts.len(), tau });
    }
    let members = sample
        .cluster
        .into_iter()
        .chain(conts.iter().filter_map(|c| c.cluster))
        .collect();
    Ok(Group::new(members, k))
}

/// Fraction of parsed samples whose cluster is the gold cluster.
pub fn pass_at_1(problem: &Problem) -> Result<f64> {
    let gold = problem
        .gold_cluster
        .ok_or_else(|| Error::Undefined(format!("problem `{}` has no gold answer", problem.id)))?;
    let (parsed, correct) = problem
        .samples
        .iter()
        .filter_map(|s| s.cluster)
        .fold((0usize, 0usize), |(p, c), cl| (p + 1, c + usize::from(cl == gold)));
    if parsed == 0 {
        return Err(Error::Undefined(format!("problem `{}` has no parsed samples", problem.id)));
    }
    Ok(correct as f64 / parsed as f64)
}

// ---------------------------------------------------------------------------
// Clustering

/// Maps answer text to its cluster within one problem.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnswerClusters {
    ids: BTreeMap<String, ClusterId>,
}

impl AnswerClusters {
    pub fn get(&self, answer: &str) -> Option<ClusterId> {
        self.ids.get(answer).copied()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn cluster_count(&self) -> usize {
        self.ids.values().collect::<HashSet<_>>().len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ClusterId)> {
        self.ids.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Clusters answers per problem as the connected components of textual
/// identity plus verdict-true equivalence edges. Texts are passed through
/// `normalize` first; pass `None` for exact string matching. Cluster ids are
/// dense and ordered by each component's first occurrence in `answers`.
pub fn cluster_answers(
    answers: &[(String, String)],
    edges: &[EquivalenceEdge],
    normalize: Option<&dyn Fn(&str) -> String>,
) -> Result<BTreeMap<String, AnswerClusters>> {
    let norm = |s: &str| normalize.map_or_else(|| s.to_owned(), |f| f(s));

    // per problem: raw text -> node index, and node order of first occurrence
    let mut problems: BTreeMap<&str, (HashMap<String, usize>, Vec<String>)> = BTreeMap::new();
    for (pid, text) in answers {
        let (index, order) = problems.entry(pid.as_str()).or_default();
        let key = norm(text);
        if !index.contains_key(&key) {
            index.insert(key.clone(), order.len());
            order.push(key);
        }
    }

    let mut unions: BTreeMap<&str, UnionFind<usize>> = problems
        .iter()
        .map(|(pid, (_, order))| (*pid, UnionFind::new(order.len())))
        .collect();

    for edge in edges.iter().filter(|e| e.verdict) {
        let unknown = |answer: &str| Error::UnknownAnswer {
            problem: edge.problem.clone(),
            answer: answer.to_owned(),
        };
        let (index, _) = problems.get(edge.problem.as_str()).ok_or_else(|| unknown(&edge.a))?;
        let a = *index.get(&norm(&edge.a)).ok_or_else(|| unknown(&edge.a))?;
        let b = *index.get(&norm(&edge.b)).ok_or_else(|| unknown(&edge.b))?;
        unions.get_mut(edge.problem.as_str()).expect("problem present").union(a, b);
    }

    let mut out = BTreeMap::new();
    for (pid, (_, order)) in &problems {
        let uf = &unions[pid];
        let mut root_to_id: HashMap<usize, ClusterId> = HashMap::new();
        let mut ids = BTreeMap::new();
        for (node, text) in order.iter().enumerate() {
            let root = uf.find(node);
            let next = ClusterId(root_to_id.len() as u32);
            let id = *root_to_id.entry(root).or_insert(next);
            ids.insert(text.clone(), id);
        }
        // raw spellings resolve through the normalizer
        let mut clusters = AnswerClusters { ids };
        for (_, text) in answers.iter().filter(|(p, _)| p.as_str() == *pid) {
            if let Some(id) = clusters.ids.get(&norm(text)).copied() {
                clusters.ids.insert(text.clone(), id);
            }
        }
        out.insert((*pid).to_owned(), clusters);
    }
    Ok(out)
}

/// Re-derives every problem's clusters from its answer texts plus `edges`.
/// The gold cluster follows any answer text that carried it; a gold answer
/// no sample produced keeps a fresh id after all others.
pub fn recluster(pool: &AnswerPool, edges: &[EquivalenceEdge]) -> Result<AnswerPool> {
    let mut answers = Vec::new();
    let mut gold_text: HashMap<&str, &str> = HashMap::new();
    for p in &pool.problems {
        let texts = p.samples.iter().flat_map(|s| {
            std::iter::once((s.answer_raw.as_deref(), s.cluster))
                .chain(s.continuations.iter().map(|c| (c.answer_raw.as_deref(), c.cluster)))
        });
        for (text, cluster) in texts {
            if let Some(t) = text {
                answers.push((p.id.clone(), t.to_owned()));
                if cluster.is_some() && cluster == p.gold_cluster {
                    gold_text.entry(p.id.as_str()).or_insert(t);
                }
            }
        }
    }
    let clusters = cluster_answers(&answers, edges, None)?;
    let empty = AnswerClusters::default();
    let mut out = pool.clone();
    for p in &mut out.problems {
        let c = clusters.get(&p.id).unwrap_or(&empty);
        let lookup = |t: &Option<String>| t.as_deref().and_then(|t| c.get(t));
        if p.gold_cluster.is_some() {
            p.gold_cluster = Some(match gold_text.get(p.id.as_str()) {
                Some(t) => c.get(t).expect("gold text was clustered"),
                None => ClusterId(c.cluster_count() as u32),
            });
        }
        for s in &mut p.samples {
            s.cluster = lookup(&s.answer_raw);
            for k in &mut s.continuations {
                k.cluster = lookup(&k.answer_raw);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// IO

pub fn load_pool(path: impl AsRef<Path>) -> Result<AnswerPool> {
    let file = File::open(path)?;
    read_pool(BufReader::new(file))
}

/// Reads equivalence edges, one JSON object per line.
pub fn load_edges(path: impl AsRef<Path>) -> Result<Vec<EquivalenceEdge>> {
    let reader = BufReader::new(File::open(path)?);
    let mut edges = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        edges.push(serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(edges)
}

pub fn read_pool(reader: impl Read) -> Result<AnswerPool> {
    let reader = BufReader::new(reader);
    let mut pool = AnswerPool::default();
    let mut seen_metadata = false;
    let mut ids: HashMap<String, usize> = HashMap::new();

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if !seen_metadata {
            pool.metadata = serde_json::from_str(&line)
                .map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
            validate_metadata(&pool.metadata, lineno)?;
            seen_metadata = true;
            continue;
        }
        let problem: Problem = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
        if let Some(first) = ids.get(&problem.id) {
            return Err(Error::Schema {
                line: lineno,
                message: format!("duplicate problem id `{}` (first on line {first})", problem.id),
            });
        }
        validate_problem(&problem, &pool.metadata)
            .map_err(|message| Error::Schema { line: lineno, message })?;
        ids.insert(problem.id.clone(), lineno);
        pool.problems.push(problem);
    }
    Ok(pool)
}

pub fn write_pool(pool: &AnswerPool, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pool_to(pool, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_pool_to(pool: &AnswerPool, mut w: impl Write) -> Result<()> {
    writeln!(w, "{}", to_json(&pool.metadata))?;
    for p in &pool.problems {
        writeln!(w, "{}", to_json(p))?;
    }
    Ok(())
}

/// Serializes one pool line. Infallible for pool types.
pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("pool types always serialize")
}

fn validate_metadata(meta: &PoolMetadata, line: usize) -> Result<()> {
    let bad = |message: String| Error::Schema { line, message };
    if let Some(t) = meta.taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(bad(format!("tau {t} outside (0, 1)")));
    }
    Ok(())
}

fn validate_problem(problem: &Problem, meta: &PoolMetadata) -> Result<(), String> {
    let id = &problem.id;
    if !problem.partial && problem.samples.len() != meta.n {
        return Err(format!(
            "problem `{id}` has {} samples, metadata declares n={} (mark it partial)",
            problem.samples.len(),
            meta.n
        ));
    }
    for (i, s) in problem.samples.iter().enumerate() {
        if s.n_tokens < 1 {
            return Err(format!("problem `{id}` sample {i}: n_tokens must be >= 1"));
        }
        if s.answer_raw.is_none() != s.cluster.is_none() {
            return Err(format!("problem `{id}` sample {i}: cluster must be null iff answer_raw is null"));
        }
        for (j, c) in s.continuations.iter().enumerate() {
            if !meta.taus.iter().any(|t| (t - c.tau).abs() < TAU_EPS) {
                return Err(format!(
                    "problem `{id}` sample {i} continuation {j}: tau {} not declared in metadata",
                    c.tau
                ));
            }
            if c.answer_raw.is_none() != c.cluster.is_none() {
                return Err(format!(
                    "problem `{id}` sample {i} continuation {j}: cluster must be null iff answer_raw is null"
                ));
            }
        }
        if let Some(lp) = &s.logprobs {
            for (t, row) in lp.top20.iter().enumerate() {
                if row.iter().any(|v| *v > 0.0 || v.is_nan()) {
                    return Err(format!("problem `{id}` sample {i} position {t}: log-probability > 0"));
                }
                if row.windows(2).any(|w| w[0] < w[1]) {
                    return Err(format!("problem `{id}` sample {i} position {t}: top-20 not sorted"));
                }
            }
        }
        for v in &s.verbal {
            if let Some(total) = v.rating_n_tokens {
                if v.rating_n_tokens_to_parse > total {
                    return Err(format!(
                        "problem `{id}` sample {i}: rating_n_tokens_to_parse exceeds rating_n_tokens"
                    ));
                }
            }
        }
    }
    Ok(())
}
