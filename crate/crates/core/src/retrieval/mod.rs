//! TF-IDF retrieval of similar training samples and exemplar prompts.
//!
//! Exemplars are chosen by input similarity only. At training time they are
//! sampled from the ranked hits with a geometric law over ranks; at
//! evaluation time the top `k` hits are used.

mod prompt;
mod sampling;
mod tfidf;

use thiserror::Error;

pub use prompt::{build_prompts, render_prompt, Exemplar, ExemplarPrompt, PromptConfig, PromptMode, PromptRecord};
pub use sampling::{geometric_weights, sample_exemplars, sample_exemplars_with, top_k_exemplars};
pub use tfidf::{query, RetrievalHit, SparseVector, TfidfIndex, INDEX_FORMAT_VERSION};

/// Exemplars per prompt.
pub const DEFAULT_K: usize = 4;
/// Success probability of the geometric rank law.
pub const DEFAULT_P_GEOM: f64 = 0.1;
/// Candidate pool cut-off for geometric sampling.
pub const POOL_LIMIT: usize = 100;
pub const DEFAULT_SEPARATOR: &str = " ; ";

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot index an empty manifest")]
    EmptyManifest,
    #[error("geometric parameter must lie strictly between 0 and 1, got {0}")]
    InvalidProbability(f64),
    #[error("index document `{0}` is missing from the exemplar corpus")]
    UnknownDocument(String),
    #[error("index file: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}
