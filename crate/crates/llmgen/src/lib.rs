//! Answer-pool generation against an OpenAI-compatible completions endpoint.

pub mod config;
pub mod endpoint;
pub mod generate;
pub mod store;
pub mod text;

pub use config::{Domain, EndpointConfig, SamplingParams};
pub use endpoint::{Completion, CompletionRequest, Endpoint, GenError, GenResult, HttpEndpoint, TokenInfo};
pub use generate::{generate_pool, load_prompts, GenerationJob, GenerationSummary, Generator, ProblemPrompt, TokenSource, Trace};
pub use store::PoolAppender;
pub use text::{Tokenizer, WhitespaceTokenizer};
