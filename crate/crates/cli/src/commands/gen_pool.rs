use anyhow::{bail, Context, Result};
use pcvote_core::pool::{PoolMetadata, VerbalMode};
use pcvote_llmgen::{
    generate_pool, load_prompts, EndpointConfig, GenerationJob, Generator, HttpEndpoint, PoolAppender, TokenSource,
    WhitespaceTokenizer,
};

use crate::manifest::Run;
use crate::{GenPoolArgs, TokenizerArg, VerbalArg};

pub const POOL_FILE: &str = "pool.jsonl";

pub fn run(args: &GenPoolArgs) -> Result<()> {
    let mut config = EndpointConfig::load(&args.config).with_context(|| format!("config {}", args.config.display()))?;
    if let Some(url) = &args.base_url {
        config.base_url = url.clone();
    }
    if let Some(b) = &args.benchmark {
        config.benchmark = b.clone();
    }
    config.validate()?;
    let problems = load_prompts(&args.prompts).with_context(|| format!("prompts {}", args.prompts.display()))?;
    let job = GenerationJob {
        problems,
        n: args.n,
        taus: args.taus.clone(),
        k: args.k,
        verbal: args
            .verbal
            .iter()
            .map(|v| match v {
                VerbalArg::Binary => VerbalMode::Binary,
                VerbalArg::Percent => VerbalMode::Percent,
            })
            .collect(),
    };
    job.validate()?;

    let tokenizer = WhitespaceTokenizer;
    let tokens = match (args.tokenizer, config.top_logprobs) {
        (Some(TokenizerArg::Whitespace), _) | (None, 0) => TokenSource::Tokenizer(&tokenizer),
        (None, _) => TokenSource::Endpoint,
    };

    let snapshot = serde_json::json!({ "args": args, "endpoint": config });
    let mut run = Run::start("gen-pool", None, &snapshot, &args.out)?;
    run.input(&args.config);
    run.input(&args.prompts);
    let metadata = PoolMetadata {
        model: config.model.clone(),
        benchmark: config.benchmark.clone(),
        n: job.n,
        taus: job.taus.clone(),
        k: job.k,
        truncation: Some(tokens.name()),
    };
    let pool_path = run.output(POOL_FILE);
    let mut out = PoolAppender::open(&pool_path, &metadata)?;
    let endpoint = HttpEndpoint::new(config.clone())?;
    let generator = Generator { endpoint: &endpoint, config: &config, tokens };

    let runtime = tokio::runtime::Runtime::new()?;
    let summary = runtime.block_on(generate_pool(&generator, &job, &mut out))?;
    eprintln!(
        "wrote {} problems ({} partial), skipped {} already present",
        summary.written, summary.partial, summary.skipped
    );
    run.finish()?;
    if !summary.failed.is_empty() {
        for (id, reason) in &summary.failed {
            eprintln!("problem {id}: {reason}");
        }
        bail!("{} problems failed; rerun to resume", summary.failed.len());
    }
    Ok(())
}
