//! Answer extraction, prefix truncation and the client-side tokenizer hook.

use std::sync::OnceLock;

use pcvote_core::pool::VerbalMode;
use regex::Regex;

fn boxed_open() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\\boxed\s*\{").expect("valid regex"))
}

/// Contents of the last `\boxed{...}` in `text`, with nested braces
/// balanced. Unterminated or empty boxes do not count.
pub fn extract_boxed(text: &str) -> Option<String> {
    let mut found = None;
    for m in boxed_open().find_iter(text) {
        let body = &text[m.end()..];
        let mut depth = 1usize;
        for (i, ch) in body.char_indices() {
            match ch {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        let inner = body[..i].trim();
                        if !inner.is_empty() {
                            found = Some(inner.to_string());
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    found
}

/// `ceil(tau * len)`, computed so that exact products such as
/// `0.75 * 100` are not pushed up by floating-point error.
pub fn prefix_len(len: usize, tau: f64) -> usize {
    let x = tau * len as f64;
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        x.ceil() as usize
    }
}

/// Splits generated text into token strings when the endpoint does not
/// report them. Concatenating the pieces must give back the text.
pub trait Tokenizer: Send + Sync {
    fn name(&self) -> &str;
    fn tokenize(&self, text: &str) -> Vec<String>;
}

/// Each token is a run of non-whitespace plus the whitespace after it.
#[derive(Clone, Copy, Debug, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn name(&self) -> &str {
        "whitespace"
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut current = String::new();
        let mut in_space = false;
        for ch in text.chars() {
            if ch.is_whitespace() {
                in_space = true;
            } else if in_space {
                out.push(std::mem::take(&mut current));
                in_space = false;
            }
            current.push(ch);
        }
        if !current.is_empty() {
            out.push(current);
        }
        out
    }
}

/// Block starts: the token after every token containing a blank line.
pub fn block_boundaries(tokens: &[String]) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(i, t)| t.contains("\n\n") && i + 1 < tokens.len())
        .map(|(i, _)| i + 1)
        .collect()
}

pub fn verbal_suffix(mode: VerbalMode) -> &'static str {
    match mode {
        VerbalMode::Binary => {
            "\nNow I will rate my confidence in the proposed answer as either 0 or 1. Proposed confidence: ("
        }
        VerbalMode::Percent => {
            "\nNow I will rate my confidence in the proposed answer on a scale of 0-100. Proposed confidence: ("
        }
    }
}

/// Tokens read before the rating can be parsed: through the first token
/// containing ")", or all of them when none does.
pub fn tokens_to_parse(tokens: &[String]) -> usize {
    tokens.iter().position(|t| t.contains(')')).map_or(tokens.len(), |i| i + 1)
}
