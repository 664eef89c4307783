//! Exact-match accuracy over parses and word error rate over transcripts.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::top::{canonicalize, parse_top, Token, Utterance};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("cannot score an empty corpus")]
    EmptyCorpus,
    #[error("reference transcript is empty")]
    EmptyReference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmReport<F> {
    pub n_total: usize,
    pub n_exact: usize,
    pub accuracy: F,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WerReport<F> {
    pub n_ref_words: usize,
    #[serde(rename = "sub")]
    pub substitutions: usize,
    #[serde(rename = "del")]
    pub deletions: usize,
    #[serde(rename = "ins")]
    pub insertions: usize,
    pub wer: F,
}

impl<F: Scalar> WerReport<F> {
    fn from_counts(n_ref_words: usize, substitutions: usize, deletions: usize, insertions: usize) -> Self {
        let edits = substitutions + deletions + insertions;
        let wer = if n_ref_words == 0 {
            F::zero()
        } else {
            F::from_usize_lossy(edits) / F::from_usize_lossy(n_ref_words)
        };
        WerReport {
            n_ref_words,
            substitutions,
            deletions,
            insertions,
            wer,
        }
    }

    pub fn edits(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

fn em_key(text: &str) -> String {
    match parse_top(text) {
        Ok(tree) => tree.serialize(),
        Err(_) => canonicalize(text),
    }
}

/// True iff both strings denote the same canonical parse. Strings that do
/// not parse are compared in canonicalized form.
pub fn exact_match(hyp: &str, reference: &str) -> bool {
    em_key(hyp) == em_key(reference)
}

pub fn corpus_em<F, S>(pairs: &[(S, S)]) -> Result<EmReport<F>, MetricsError>
where
    F: Scalar,
    S: AsRef<str> + Sync,
{
    if pairs.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let n_exact = pairs
        .par_iter()
        .filter(|(h, r)| exact_match(h.as_ref(), r.as_ref()))
        .count();
    Ok(EmReport {
        n_total: pairs.len(),
        n_exact,
        accuracy: F::from_usize_lossy(n_exact) / F::from_usize_lossy(pairs.len()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Edit {
    Diagonal,
    Delete,
    Insert,
}

/// Minimal word-level edit counts `(sub, del, ins)`. Ties during the
/// backtrace prefer the diagonal, then deletion, then insertion.
fn edit_counts(hyp: &[Token], reference: &[Token]) -> (usize, usize, usize) {
    let n = reference.len();
    let m = hyp.len();
    let width = m + 1;
    let mut cost = vec![0usize; (n + 1) * width];
    for (j, c) in cost.iter_mut().take(width).enumerate() {
        *c = j;
    }
    for i in 1..=n {
        cost[i * width] = i;
        for j in 1..=m {
            let sub = cost[(i - 1) * width + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            let del = cost[(i - 1) * width + j] + 1;
            let ins = cost[i * width + j - 1] + 1;
            cost[i * width + j] = sub.min(del).min(ins);
        }
    }

    let (mut i, mut j) = (n, m);
    let (mut s, mut d, mut ins) = (0, 0, 0);
    while i > 0 || j > 0 {
        let here = cost[i * width + j];
        let step =
            if i > 0 && j > 0 && cost[(i - 1) * width + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]) == here {
                Edit::Diagonal
            } else if i > 0 && cost[(i - 1) * width + j] + 1 == here {
                Edit::Delete
            } else {
                Edit::Insert
            };
        match step {
            Edit::Diagonal => {
                if reference[i - 1] != hyp[j - 1] {
                    s += 1;
                }
                i -= 1;
                j -= 1;
            }
            Edit::Delete => {
                d += 1;
                i -= 1;
            }
            Edit::Insert => {
                ins += 1;
                j -= 1;
            }
        }
    }
    (s, d, ins)
}

pub fn wer<F: Scalar>(hyp: &Utterance, reference: &Utterance) -> Result<WerReport<F>, MetricsError> {
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let (s, d, i) = edit_counts(hyp.tokens(), reference.tokens());
    Ok(WerReport::from_counts(reference.len(), s, d, i))
}

/// Corpus WER: edit counts and reference lengths are summed before dividing.
pub fn corpus_wer<F: Scalar>(pairs: &[(Utterance, Utterance)]) -> Result<WerReport<F>, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let per_pair = pairs
        .par_iter()
        .map(|(h, r)| wer::<F>(h, r))
        .collect::<Result<Vec<_>, _>>()?;
    let (n, s, d, i) = per_pair.iter().fold((0, 0, 0, 0), |acc, r| {
        (
            acc.0 + r.n_ref_words,
            acc.1 + r.substitutions,
            acc.2 + r.deletions,
            acc.3 + r.insertions,
        )
    });
    Ok(WerReport::from_counts(n, s, d, i))
}
