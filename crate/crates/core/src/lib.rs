//! Data pipeline for low-resource task-oriented semantic parsing.
//!
//! * [`top`]: TOP-format parses (`[in:get_weather [sl:location sydney ] ]`).
//! * [`metrics`]: exact-match accuracy and word error rate.
//! * [`dataset`]: samples, manifests, TSV/JSONL ingestion, upsampling mix.
//! * [`oracle`]: mask-filling and parse-oracle interfaces, offline and remote.
//! * [`augment`]: masked-LM augmentation with slot-value propagation and
//!   exact-inference filtering.
//! * [`retrieval`]: TF-IDF exemplar retrieval and prompt rendering.
//!
//! Numeric code is generic over [`Scalar`]; the `*64`/`*32` aliases below fix
//! the float type.

pub mod augment;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod io;
pub mod metrics;
pub mod oracle;
mod pool;
pub mod retrieval;
pub mod scalar;
pub mod seed;
pub mod top;

pub use scalar::Scalar;
pub use top::{align_leaves, canonicalize, parse_top, serialize, ParseTree, Token, TopError, Utterance};

pub type TfidfIndex64 = retrieval::TfidfIndex<f64>;
pub type TfidfIndex32 = retrieval::TfidfIndex<f32>;
pub type RetrievalHit64 = retrieval::RetrievalHit<f64>;
pub type RetrievalHit32 = retrieval::RetrievalHit<f32>;
pub type ExemplarPrompt64 = retrieval::ExemplarPrompt<f64>;
pub type EmReport64 = metrics::EmReport<f64>;
pub type EmReport32 = metrics::EmReport<f32>;
pub type WerReport64 = metrics::WerReport<f64>;
pub type WerReport32 = metrics::WerReport<f32>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
