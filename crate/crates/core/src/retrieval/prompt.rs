use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use super::{
    query, sample_exemplars, top_k_exemplars, RetrievalError, RetrievalHit, TfidfIndex, DEFAULT_K, DEFAULT_P_GEOM,
    DEFAULT_SEPARATOR, POOL_LIMIT,
};
use crate::dataset::{Manifest, Sample};
use crate::pool::with_jobs;
use crate::scalar::Scalar;
use crate::seed::derive_seed;
use crate::top::{ParseTree, Utterance};

#[derive(Debug, Clone, PartialEq)]
pub struct Exemplar<F> {
    pub utterance: Utterance,
    pub parse: ParseTree,
    pub hit: RetrievalHit<F>,
}

/// `x ; x1 ; y1 ; ... ; xk ; yk` with its exemplar metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarPrompt<F> {
    pub base: Utterance,
    pub exemplars: Vec<Exemplar<F>>,
    pub rendered: String,
}

/// Joins the base utterance and each exemplar's utterance and serialized
/// parse with `separator`. The rendering is only unambiguous when no
/// utterance contains the separator text itself.
pub fn render_prompt<F>(x: &Utterance, exemplars: Vec<Exemplar<F>>, separator: &str) -> ExemplarPrompt<F> {
    let mut parts = Vec::with_capacity(1 + 2 * exemplars.len());
    parts.push(x.to_string());
    for e in &exemplars {
        parts.push(e.utterance.to_string());
        parts.push(e.parse.serialize());
    }
    ExemplarPrompt {
        base: x.clone(),
        exemplars,
        rendered: parts.join(separator),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptMode {
    /// Geometric-rank sampling, used for training data.
    Sample,
    /// Deterministic top-k, used for evaluation.
    TopK,
}

#[derive(Debug, Clone)]
pub struct PromptConfig {
    pub mode: PromptMode,
    pub k: usize,
    pub p_geom: f64,
    pub separator: String,
    pub seed: u64,
    /// Drop the query's own id from its candidates. `None`: only in sample mode.
    pub exclude_self: Option<bool>,
    /// Number of independent draws per query (one record per epoch).
    pub epochs: usize,
    pub jobs: Option<usize>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            mode: PromptMode::TopK,
            k: DEFAULT_K,
            p_geom: DEFAULT_P_GEOM,
            separator: DEFAULT_SEPARATOR.to_string(),
            seed: 0,
            exclude_self: None,
            epochs: 1,
            jobs: None,
        }
    }
}

impl PromptConfig {
    fn excludes_self(&self) -> bool {
        self.exclude_self.unwrap_or(self.mode == PromptMode::Sample)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptRecord {
    pub id: String,
    pub epoch: usize,
    pub rendered: String,
    pub exemplar_ids: Vec<String>,
    pub ranks: Vec<usize>,
    pub scores: Vec<f64>,
}

fn prompt_for<F: Scalar>(
    index: &TfidfIndex<F>,
    docs: &HashMap<&str, &Sample>,
    sample: &Sample,
    epoch: usize,
    cfg: &PromptConfig,
) -> Result<PromptRecord, RetrievalError> {
    let mut exclude = HashSet::new();
    if cfg.excludes_self() {
        exclude.insert(sample.id().to_string());
    }
    let selected = match cfg.mode {
        PromptMode::TopK => top_k_exemplars(&query(index, sample.utterance(), cfg.k, &exclude), cfg.k),
        PromptMode::Sample => {
            let hits = query(index, sample.utterance(), POOL_LIMIT, &exclude);
            let seed = derive_seed(cfg.seed, sample.id(), epoch as u64);
            sample_exemplars(&hits, cfg.k, F::from_f64_lossy(cfg.p_geom), seed)?
        }
    };
    let exemplars = selected
        .into_iter()
        .map(|hit| {
            let doc = docs
                .get(hit.sample_id.as_str())
                .ok_or_else(|| RetrievalError::UnknownDocument(hit.sample_id.clone()))?;
            Ok(Exemplar {
                utterance: doc.utterance().clone(),
                parse: doc.parse().clone(),
                hit,
            })
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    let prompt = render_prompt(sample.utterance(), exemplars, &cfg.separator);
    Ok(PromptRecord {
        id: sample.id().to_string(),
        epoch,
        exemplar_ids: prompt.exemplars.iter().map(|e| e.hit.sample_id.clone()).collect(),
        ranks: prompt.exemplars.iter().map(|e| e.hit.rank).collect(),
        scores: prompt.exemplars.iter().map(|e| e.hit.score.to_f64_lossy()).collect(),
        rendered: prompt.rendered,
    })
}

/// Renders one prompt per query sample and epoch. Exemplars come from
/// `corpus`, which must contain every document of `index`. Records are
/// ordered by epoch, then query order.
pub fn build_prompts<F: Scalar>(
    index: &TfidfIndex<F>,
    corpus: &Manifest,
    queries: &Manifest,
    cfg: &PromptConfig,
) -> Result<Vec<PromptRecord>, RetrievalError> {
    if !(cfg.p_geom > 0.0 && cfg.p_geom < 1.0) {
        return Err(RetrievalError::InvalidProbability(cfg.p_geom));
    }
    let docs: HashMap<&str, &Sample> = corpus.iter().map(|s| (s.id(), s)).collect();
    if let Some(missing) = index.doc_ids().iter().find(|id| !docs.contains_key(id.as_str())) {
        return Err(RetrievalError::UnknownDocument(missing.clone()));
    }
    let work: Vec<(usize, &Sample)> = (0..cfg.epochs.max(1))
        .flat_map(|e| queries.iter().map(move |s| (e, s)))
        .collect();
    with_jobs(cfg.jobs, || {
        work.par_iter()
            .map(|&(epoch, s)| prompt_for(index, &docs, s, epoch, cfg))
            .collect()
    })
}
