//! Table-only token accounting.
//!
//! Counts cover the linearized table text and nothing else; questions and
//! model outputs are excluded by construction. The optical side is a
//! configured budget constant rather than a measured encoder length, so the
//! savings ratio stays computable without any model in the loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::LinearizedTable;

/// Identifier of the built-in tokenizer.
pub const DEFAULT_TOKENIZER_ID: &str = "default";

/// A deterministic text-to-token mapping. Comparisons must use one tokenizer
/// for every system involved; implementations are identified by `id`.
pub trait Tokenize {
    fn id(&self) -> &str;

    fn tokenize(&self, text: &str) -> Vec<String>;

    fn count(&self, text: &str) -> u64 {
        self.tokenize(text).len() as u64
    }
}

/// Built-in tokenizer: split on whitespace, then split every ASCII
/// punctuation character off as its own token.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultTokenizer;

impl Tokenize for DefaultTokenizer {
    fn id(&self) -> &str {
        DEFAULT_TOKENIZER_ID
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        for chunk in text.split_whitespace() {
            let mut run = String::new();
            for c in chunk.chars() {
                if c.is_ascii_punctuation() {
                    if !run.is_empty() {
                        tokens.push(std::mem::take(&mut run));
                    }
                    tokens.push(c.to_string());
                } else {
                    run.push(c);
                }
            }
            if !run.is_empty() {
                tokens.push(run);
            }
        }
        tokens
    }
}

/// Looks a tokenizer up by its id.
pub fn tokenizer_by_id(id: &str) -> Result<Box<dyn Tokenize>> {
    match id {
        DEFAULT_TOKENIZER_ID => Ok(Box::new(DefaultTokenizer)),
        other => Err(Error::Config(format!("unknown tokenizer id '{other}'"))),
    }
}

/// Refuses to compare token counts produced under different tokenizers.
pub fn ensure_matching_tokenizer(a: &str, b: &str) -> Result<()> {
    if a != b {
        return Err(Error::Config(format!(
            "token counts under tokenizer '{a}' cannot be compared with '{b}'"
        )));
    }
    Ok(())
}

/// Optical-side accounting configuration: the per-image token budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetConfig {
    pub optical_budget: u64,
}

impl BudgetConfig {
    pub fn new(optical_budget: u64) -> Result<Self> {
        if optical_budget == 0 {
            return Err(Error::Config("optical budget must be strictly positive".into()));
        }
        Ok(BudgetConfig { optical_budget })
    }
}

/// Token count of the linearized table under `tokenizer`.
pub fn count_table_text_tokens(lin: &LinearizedTable, tokenizer: &dyn Tokenize) -> u64 {
    tokenizer.count(&lin.text)
}

/// Optical token length of one image: the configured budget constant.
pub fn optical_token_count(cfg: &BudgetConfig) -> u64 {
    cfg.optical_budget
}

/// Per-example token counts for one dataset example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleTokens {
    pub example_id: String,
    pub table_text_tokens: u64,
    pub optical_tokens: u64,
}

/// Aggregate token accounting: the savings ratio is the mean text-side count
/// over the mean optical-side count, recomputed exactly from `per_example`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    pub tokenizer_id: String,
    pub optical_budget: u64,
    pub mean_table_text_tokens: f64,
    pub mean_optical_tokens: f64,
    pub tsr: f64,
    pub per_example: Vec<ExampleTokens>,
}

/// Computes the token savings ratio over `(example_id, table_text_tokens)`
/// pairs. The example set must be nonempty; the ratio of an empty mean is
/// undefined, not zero.
pub fn tsr(
    counts: &[(String, u64)],
    tokenizer_id: &str,
    cfg: &BudgetConfig,
) -> Result<TokenStats> {
    if counts.is_empty() {
        return Err(Error::UndefinedMetric(
            "token savings ratio is undefined on an empty example set".into(),
        ));
    }
    let budget = optical_token_count(cfg);
    let per_example: Vec<ExampleTokens> = counts
        .iter()
        .map(|(id, text)| ExampleTokens {
            example_id: id.clone(),
            table_text_tokens: *text,
            optical_tokens: budget,
        })
        .collect();
    let n = per_example.len() as f64;
    let text_sum: u64 = per_example.iter().map(|e| e.table_text_tokens).sum();
    let opt_sum: u64 = per_example.iter().map(|e| e.optical_tokens).sum();
    let mean_text = text_sum as f64 / n;
    let mean_opt = opt_sum as f64 / n;
    Ok(TokenStats {
        tokenizer_id: tokenizer_id.to_string(),
        optical_budget: cfg.optical_budget,
        mean_table_text_tokens: mean_text,
        mean_optical_tokens: mean_opt,
        tsr: mean_text / mean_opt,
        per_example,
    })
}
