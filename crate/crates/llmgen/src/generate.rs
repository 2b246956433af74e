//! Pool generation: initial samples, prefix regenerations and verbal
//! rating calls for one problem at a time.

use std::time::Duration;

use futures::stream::{self, StreamExt};
use pcvote_core::pool::{
    cluster_answers, Continuation, LogprobRecord, Problem, Sample, VerbalMode, VerbalRecord, TOP_K,
};
use serde::{Deserialize, Serialize};

use crate::config::{render_prompt, EndpointConfig};
use crate::endpoint::{Completion, CompletionRequest, Endpoint, GenError, GenResult};
use crate::text::{block_boundaries, extract_boxed, prefix_len, tokens_to_parse, verbal_suffix, Tokenizer};

/// One line of the problems file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemPrompt {
    pub id: String,
    pub prompt: String,
    #[serde(default)]
    pub gold: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationJob {
    pub problems: Vec<ProblemPrompt>,
    /// Initial samples per problem.
    pub n: usize,
    pub taus: Vec<f64>,
    /// Regenerations per sample and tau.
    pub k: usize,
    pub verbal: Vec<VerbalMode>,
}

impl GenerationJob {
    pub fn validate(&self) -> GenResult<()> {
        if self.n == 0 {
            return Err(GenError::Config("N must be at least 1".into()));
        }
        if let Some(t) = self.taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(GenError::Config(format!("tau {t} outside (0, 1)")));
        }
        Ok(())
    }
}

/// A generated trace with the token strings used for truncation.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub text: String,
    pub answer: Option<String>,
    pub n_tokens: u64,
    pub tokens: Vec<String>,
    pub logprobs: Option<LogprobRecord>,
}

/// Where prefix token boundaries come from.
#[derive(Clone, Copy)]
pub enum TokenSource<'a> {
    /// Token strings returned alongside log-probabilities.
    Endpoint,
    Tokenizer(&'a dyn Tokenizer),
}

impl TokenSource<'_> {
    pub fn name(&self) -> String {
        match self {
            TokenSource::Endpoint => "endpoint".into(),
            TokenSource::Tokenizer(t) => t.name().into(),
        }
    }
}

pub struct Generator<'a, E> {
    pub endpoint: &'a E,
    pub config: &'a EndpointConfig,
    pub tokens: TokenSource<'a>,
}

fn logprob_record(tokens: &[crate::endpoint::TokenInfo]) -> Option<LogprobRecord> {
    if tokens.is_empty() {
        return None;
    }
    let mut top20 = Vec::with_capacity(tokens.len());
    for t in tokens {
        if t.top.len() < TOP_K || !t.logprob.is_finite() {
            return None;
        }
        let mut row = [0.0; TOP_K];
        for (slot, (_, lp)) in row.iter_mut().zip(&t.top) {
            *slot = lp.min(0.0);
        }
        top20.push(row);
    }
    let texts: Vec<String> = tokens.iter().map(|t| t.text.clone()).collect();
    Some(LogprobRecord {
        top20,
        block_boundaries: block_boundaries(&texts),
        token_logprobs: tokens.iter().map(|t| t.logprob.min(0.0)).collect(),
    })
}

impl<E: Endpoint> Generator<'_, E> {
    async fn call(&self, request: CompletionRequest) -> GenResult<Completion> {
        let mut attempt = 0;
        loop {
            match self.endpoint.complete(&request).await {
                Err(e) if e.is_retryable() && attempt < self.config.max_retries => {
                    let wait = self.config.backoff_ms.saturating_mul(1 << attempt.min(16));
                    tokio::time::sleep(Duration::from_millis(wait)).await;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    /// Issues `requests` with bounded concurrency; results keep request order.
    async fn call_all(&self, requests: Vec<CompletionRequest>) -> Vec<GenResult<Completion>> {
        stream::iter(requests).map(|r| self.call(r)).buffered(self.config.concurrency).collect().await
    }

    fn request(&self, prompt: String, max_tokens: u32) -> CompletionRequest {
        let top_logprobs = match self.tokens {
            TokenSource::Endpoint => self.config.top_logprobs.max(1),
            TokenSource::Tokenizer(_) => self.config.top_logprobs,
        };
        CompletionRequest { prompt, max_tokens, top_logprobs }
    }

    fn token_texts(&self, completion: &Completion) -> GenResult<Vec<String>> {
        match (self.tokens, &completion.tokens) {
            (TokenSource::Endpoint, Some(t)) => Ok(t.iter().map(|x| x.text.clone()).collect()),
            (TokenSource::Endpoint, None) => {
                Err(GenError::Decode("endpoint returned no token log-probabilities to truncate on".into()))
            }
            (TokenSource::Tokenizer(tok), _) => Ok(tok.tokenize(&completion.text)),
        }
    }

    fn trace(&self, completion: Completion) -> GenResult<Trace> {
        let tokens = self.token_texts(&completion)?;
        let logprobs = completion.tokens.as_deref().and_then(logprob_record);
        Ok(Trace {
            answer: extract_boxed(&completion.text),
            text: completion.text,
            n_tokens: completion.n_tokens.max(1),
            tokens,
            logprobs,
        })
    }

    /// `n` independent completions of `prompt`. Failed slots are returned as
    /// errors in place.
    pub async fn generate_initial_samples(&self, prompt: &str, n: usize) -> Vec<GenResult<Trace>> {
        let reqs = (0..n).map(|_| self.request(prompt.to_string(), self.config.sampling.max_tokens)).collect();
        self.call_all(reqs).await.into_iter().map(|r| r.and_then(|c| self.trace(c))).collect()
    }

    fn continuation_request(&self, prompt: &str, trace: &Trace, tau: f64) -> (String, CompletionRequest) {
        let cut = prefix_len(trace.tokens.len(), tau).min(trace.tokens.len());
        let prefix: String = trace.tokens[..cut].concat();
        let req = self.request(format!("{prompt}{prefix}"), self.config.sampling.max_tokens);
        (prefix, req)
    }

    /// `k` regenerations from the first `ceil(tau |y|)` tokens of `trace`.
    /// The regenerated answer is read from prefix plus continuation; only
    /// continuation tokens are charged.
    pub async fn truncate_and_continue(&self, prompt: &str, trace: &Trace, tau: f64, k: usize) -> Vec<GenResult<Continuation>> {
        let (prefix, req) = self.continuation_request(prompt, trace, tau);
        self.call_all(vec![req; k]).await.into_iter().map(|r| r.map(|c| continuation(tau, &prefix, c))).collect()
    }

    /// Rating call: the full trace followed by the verbal suffix.
    pub async fn verbal_rating_call(&self, prompt: &str, trace: &Trace, mode: VerbalMode) -> GenResult<VerbalRecord> {
        let completion = self.call(self.rating_request(prompt, trace, mode)).await?;
        self.rating(completion, mode)
    }

    fn rating_request(&self, prompt: &str, trace: &Trace, mode: VerbalMode) -> CompletionRequest {
        self.request(format!("{prompt}{}{}", trace.text, verbal_suffix(mode)), self.config.rating_max_tokens)
    }

    fn rating(&self, completion: Completion, mode: VerbalMode) -> GenResult<VerbalRecord> {
        let tokens = self.token_texts(&completion)?;
        Ok(rating_record(&completion, mode, &tokens))
    }

    /// Generates every sample of one problem and assigns answer clusters.
    ///
    /// A sample is kept only if all of its regenerations succeed; dropped
    /// samples mark the problem partial. Failed rating calls leave that
    /// rating out. Capability errors abort the problem.
    pub async fn generate_problem(&self, job: &GenerationJob, problem: &ProblemPrompt) -> GenResult<Problem> {
        let prompt = render_prompt(self.config.domain, &problem.prompt);
        let mut first_error = None;
        let keep = |r: GenResult<Trace>, first_error: &mut Option<GenError>| match r {
            Ok(t) => Ok(Some(t)),
            Err(e @ GenError::Capability(_)) => Err(e),
            Err(e) => {
                first_error.get_or_insert(e);
                Ok(None)
            }
        };
        let mut traces = Vec::new();
        for r in self.generate_initial_samples(&prompt, job.n).await {
            if let Some(t) = keep(r, &mut first_error)? {
                traces.push(t);
            }
        }

        // all regenerations of the problem share one bounded stream
        let mut prefixes = Vec::new();
        let mut requests = Vec::new();
        for trace in &traces {
            for &tau in &job.taus {
                let (prefix, req) = self.continuation_request(&prompt, trace, tau);
                for _ in 0..job.k {
                    requests.push(req.clone());
                }
                prefixes.push((tau, prefix));
            }
        }
        let mut results = self.call_all(requests).await.into_iter();
        let mut regens: Vec<Option<Vec<Continuation>>> = Vec::with_capacity(traces.len());
        let mut prefixes = prefixes.into_iter();
        for _ in &traces {
            let mut conts = Some(Vec::new());
            for _ in &job.taus {
                let (tau, prefix) = prefixes.next().expect("one prefix per trace and tau");
                for r in results.by_ref().take(job.k) {
                    match r {
                        Ok(c) => {
                            if let Some(v) = conts.as_mut() {
                                v.push(continuation(tau, &prefix, c));
                            }
                        }
                        Err(e @ GenError::Capability(_)) => return Err(e),
                        Err(e) => {
                            first_error.get_or_insert(e);
                            conts = None;
                        }
                    }
                }
            }
            regens.push(conts);
        }

        let kept: Vec<(Trace, Vec<Continuation>)> =
            traces.into_iter().zip(regens).filter_map(|(t, c)| c.map(|c| (t, c))).collect();
        if kept.is_empty() {
            return Err(first_error.unwrap_or_else(|| GenError::Config("no samples requested".into())));
        }

        let rating_requests = kept
            .iter()
            .flat_map(|(t, _)| job.verbal.iter().map(|&m| self.rating_request(&prompt, t, m)))
            .collect();
        let mut ratings = self.call_all(rating_requests).await.into_iter();

        let partial = kept.len() < job.n;
        let mut samples = Vec::with_capacity(kept.len());
        for (trace, continuations) in kept {
            let mut verbal = Vec::new();
            for &mode in &job.verbal {
                match ratings.next().expect("one rating per sample and mode").and_then(|c| self.rating(c, mode)) {
                    Ok(v) => verbal.push(v),
                    Err(e @ GenError::Capability(_)) => return Err(e),
                    Err(_) => {}
                }
            }
            samples.push(Sample {
                answer_raw: trace.answer,
                cluster: None,
                n_tokens: trace.n_tokens,
                logprobs: trace.logprobs,
                continuations,
                verbal,
            });
        }
        assign_clusters(&problem.id, problem.gold.as_deref(), samples, partial)
    }
}

fn continuation(tau: f64, prefix: &str, c: Completion) -> Continuation {
    Continuation {
        tau,
        answer_raw: extract_boxed(&format!("{prefix}{}", c.text)),
        cluster: None,
        n_tokens: c.n_tokens.max(1),
    }
}

/// Builds the stored rating record: text, tokens up to the parse point and,
/// for binary ratings, the top-20 of the first token offering "0" or "1".
pub fn rating_record(completion: &Completion, mode: VerbalMode, tokens: &[String]) -> VerbalRecord {
    let verdict = match (mode, &completion.tokens) {
        (VerbalMode::Binary, Some(infos)) => infos
            .iter()
            .find(|t| t.top.iter().any(|(s, _)| matches!(s.trim(), "0" | "1")))
            .map(|t| t.top.iter().take(TOP_K).cloned().collect()),
        _ => None,
    };
    let to_parse = (tokens_to_parse(tokens) as u64).clamp(1, completion.n_tokens.max(1));
    VerbalRecord {
        mode,
        rating_text: completion.text.clone(),
        rating_n_tokens_to_parse: to_parse,
        rating_n_tokens: Some(completion.n_tokens.max(to_parse)),
        verdict_token_top20: verdict,
    }
}

/// Clusters a problem's answers by exact text. Ids follow first occurrence
/// over initial answers, then regenerations, then the gold answer, so the
/// gold text never wins an id-based tie by construction.
pub fn assign_clusters(id: &str, gold: Option<&str>, mut samples: Vec<Sample>, partial: bool) -> GenResult<Problem> {
    let mut answers: Vec<(String, String)> = Vec::new();
    let mut push = |text: &Option<String>| {
        if let Some(t) = text {
            answers.push((id.to_string(), t.clone()));
        }
    };
    samples.iter().for_each(|s| push(&s.answer_raw));
    samples.iter().flat_map(|s| &s.continuations).for_each(|c| push(&c.answer_raw));
    push(&gold.map(str::to_string));
    let clusters = cluster_answers(&answers, &[], None)?.remove(id).unwrap_or_default();
    for s in &mut samples {
        s.cluster = s.answer_raw.as_deref().and_then(|a| clusters.get(a));
        for c in &mut s.continuations {
            c.cluster = c.answer_raw.as_deref().and_then(|a| clusters.get(a));
        }
    }
    Ok(Problem { id: id.to_string(), gold_cluster: gold.and_then(|g| clusters.get(g)), samples, partial })
}

/// Reads a JSONL file of `{"id", "prompt", "gold"}` lines.
pub fn load_prompts(path: impl AsRef<std::path::Path>) -> GenResult<Vec<ProblemPrompt>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| GenError::Decode(format!("prompts line {}: {e}", i + 1))))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GenerationSummary {
    pub written: usize,
    pub skipped: usize,
    pub partial: usize,
    /// Problems that produced no usable sample, with the reason.
    pub failed: Vec<(String, String)>,
}

/// Runs `job` problem by problem, appending each finished problem to
/// `out`. Problems already in `out` are skipped.
pub async fn generate_pool<E: Endpoint>(
    generator: &Generator<'_, E>,
    job: &GenerationJob,
    out: &mut crate::store::PoolAppender,
) -> GenResult<GenerationSummary> {
    job.validate()?;
    let mut summary = GenerationSummary::default();
    for problem in &job.problems {
        if out.contains(&problem.id) {
            summary.skipped += 1;
            continue;
        }
        match generator.generate_problem(job, problem).await {
            Ok(p) => {
                summary.partial += usize::from(p.partial);
                out.append(&p)?;
                summary.written += 1;
            }
            Err(e @ (GenError::Capability(_) | GenError::Io(_) | GenError::Config(_))) => return Err(e),
            Err(e) => summary.failed.push((problem.id.clone(), e.to_string())),
        }
    }
    Ok(summary)
}
