use std::collections::{HashMap, HashSet};
use std::io::BufReader;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RetrievalError;
use crate::dataset::Manifest;
use crate::io::write_atomic;
use crate::scalar::Scalar;
use crate::top::{Token, Utterance};

pub const INDEX_FORMAT_VERSION: u32 = 1;
const FORMAT_NAME: &str = "lrnlu-tfidf";
const IDF_VARIANT: &str = "ln((1+n)/(1+df))+1";

/// Sparse vector as `(term_id, weight)` pairs sorted by term id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector<F> {
    entries: Vec<(usize, F)>,
}

impl<F: Scalar> SparseVector<F> {
    pub fn entries(&self) -> &[(usize, F)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> F {
        self.entries.iter().map(|&(_, w)| w * w).sum::<F>().sqrt()
    }

    /// Raw term counts times idf, scaled to unit length. Terms outside the
    /// vocabulary are ignored; no known terms gives the zero vector.
    fn weighted(counts: HashMap<usize, usize>, idf: &[F]) -> Self {
        let mut entries: Vec<(usize, F)> = counts
            .into_iter()
            .map(|(t, c)| (t, F::from_usize_lossy(c) * idf[t]))
            .collect();
        entries.sort_unstable_by_key(|&(t, _)| t);
        let mut v = SparseVector { entries };
        let norm = v.norm();
        if norm > F::zero() {
            for e in &mut v.entries {
                e.1 = e.1 / norm;
            }
        } else {
            v.entries.clear();
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalHit<F> {
    pub sample_id: String,
    /// 1-based.
    pub rank: usize,
    /// Cosine similarity in `[0, 1]`.
    pub score: F,
}

/// TF-IDF index over utterances: raw term counts, smoothed idf
/// `ln((1 + N) / (1 + df)) + 1`, L2-normalized document vectors.
#[derive(Debug, Clone)]
pub struct TfidfIndex<F> {
    vocabulary: HashMap<String, usize>,
    terms: Vec<String>,
    idf: Vec<F>,
    doc_vectors: Vec<SparseVector<F>>,
    doc_ids: Vec<String>,
    /// term id -> (doc, weight)
    postings: Vec<Vec<(usize, F)>>,
}

fn term_counts(tokens: &[Token], vocabulary: &HashMap<String, usize>) -> HashMap<usize, usize> {
    let mut counts = HashMap::new();
    for t in tokens {
        if let Some(&id) = vocabulary.get(t.as_str()) {
            *counts.entry(id).or_insert(0) += 1;
        }
    }
    counts
}

impl<F: Scalar> TfidfIndex<F> {
    /// Indexes the utterance of every sample, one document per sample.
    pub fn build(manifest: &Manifest) -> Result<Self, RetrievalError> {
        if manifest.is_empty() {
            return Err(RetrievalError::EmptyManifest);
        }
        let mut vocabulary = HashMap::new();
        let mut terms = Vec::new();
        for s in manifest {
            for t in s.utterance().tokens() {
                if !vocabulary.contains_key(t.as_str()) {
                    vocabulary.insert(t.to_string(), terms.len());
                    terms.push(t.to_string());
                }
            }
        }

        let counts: Vec<HashMap<usize, usize>> = manifest
            .samples()
            .par_iter()
            .map(|s| term_counts(s.utterance().tokens(), &vocabulary))
            .collect();
        let mut df = vec![0usize; terms.len()];
        for c in &counts {
            for &t in c.keys() {
                df[t] += 1;
            }
        }
        let n = F::from_usize_lossy(manifest.len());
        let one = F::one();
        let idf: Vec<F> = df
            .iter()
            .map(|&d| ((one + n) / (one + F::from_usize_lossy(d))).ln() + one)
            .collect();

        let doc_vectors: Vec<SparseVector<F>> = counts
            .into_par_iter()
            .map(|c| SparseVector::weighted(c, &idf))
            .collect();
        let doc_ids = manifest.iter().map(|s| s.id().to_string()).collect();
        Ok(Self::assemble(vocabulary, terms, idf, doc_vectors, doc_ids))
    }

    fn assemble(
        vocabulary: HashMap<String, usize>,
        terms: Vec<String>,
        idf: Vec<F>,
        doc_vectors: Vec<SparseVector<F>>,
        doc_ids: Vec<String>,
    ) -> Self {
        let mut postings = vec![Vec::new(); terms.len()];
        for (d, v) in doc_vectors.iter().enumerate() {
            for &(t, w) in &v.entries {
                postings[t].push((d, w));
            }
        }
        TfidfIndex {
            vocabulary,
            terms,
            idf,
            doc_vectors,
            doc_ids,
            postings,
        }
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_vector(&self, doc: usize) -> &SparseVector<F> {
        &self.doc_vectors[doc]
    }

    pub fn term_id(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).copied()
    }

    pub fn idf(&self, term: &str) -> Option<F> {
        self.term_id(term).map(|t| self.idf[t])
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    /// Ids of documents with no indexed terms (stored as zero vectors).
    pub fn empty_documents(&self) -> Vec<&str> {
        self.doc_vectors
            .iter()
            .zip(&self.doc_ids)
            .filter(|(v, _)| v.is_zero())
            .map(|(_, id)| id.as_str())
            .collect()
    }

    pub fn vectorize(&self, utterance: &Utterance) -> SparseVector<F> {
        SparseVector::weighted(term_counts(utterance.tokens(), &self.vocabulary), &self.idf)
    }

    /// Cosine similarity of `utterance` against every document, in index order.
    pub fn scores(&self, utterance: &Utterance) -> Vec<F> {
        let q = self.vectorize(utterance);
        let mut scores = vec![F::zero(); self.len()];
        for &(t, qw) in &q.entries {
            for &(d, dw) in &self.postings[t] {
                scores[d] = scores[d] + qw * dw;
            }
        }
        for s in &mut scores {
            *s = s.max(F::zero()).min(F::one());
        }
        scores
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let file = IndexFile {
            format: FORMAT_NAME.into(),
            format_version: INDEX_FORMAT_VERSION,
            idf_variant: IDF_VARIANT.into(),
            tf: "raw".into(),
            norm: "l2".into(),
            vocabulary: self.terms.clone(),
            idf: self.idf.iter().map(|w| w.to_f64_lossy()).collect(),
            doc_ids: self.doc_ids.clone(),
            doc_vectors: self
                .doc_vectors
                .iter()
                .map(|v| v.entries.iter().map(|&(t, w)| (t, w.to_f64_lossy())).collect())
                .collect(),
        };
        write_atomic(path, |w| {
            serde_json::to_writer(&mut *w, &file).map_err(std::io::Error::other)?;
            w.write_all(b"\n")
        })
        .map_err(|source| RetrievalError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let f = std::fs::File::open(path).map_err(|source| RetrievalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: IndexFile = serde_json::from_reader(BufReader::new(f))
            .map_err(|e| RetrievalError::Format(format!("{}: {e}", path.display())))?;
        Self::from_file(file)
    }

    fn from_file(file: IndexFile) -> Result<Self, RetrievalError> {
        let bad = |m: String| Err(RetrievalError::Format(m));
        if file.format != FORMAT_NAME || file.format_version != INDEX_FORMAT_VERSION {
            return bad(format!(
                "unsupported index format {} v{}",
                file.format, file.format_version
            ));
        }
        if file.idf.len() != file.vocabulary.len() || file.doc_vectors.len() != file.doc_ids.len() {
            return bad("table lengths disagree".into());
        }
        let vocabulary: HashMap<String, usize> = file
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        if vocabulary.len() != file.vocabulary.len() {
            return bad("duplicate vocabulary term".into());
        }
        let n_terms = file.vocabulary.len();
        let mut doc_vectors = Vec::with_capacity(file.doc_vectors.len());
        for v in file.doc_vectors {
            if v.iter().any(|&(t, _)| t >= n_terms) || v.windows(2).any(|w| w[0].0 >= w[1].0) {
                return bad("document vector has unsorted or unknown term ids".into());
            }
            doc_vectors.push(SparseVector {
                entries: v.into_iter().map(|(t, w)| (t, F::from_f64_lossy(w))).collect(),
            });
        }
        let idf = file.idf.into_iter().map(F::from_f64_lossy).collect();
        Ok(Self::assemble(
            vocabulary,
            file.vocabulary,
            idf,
            doc_vectors,
            file.doc_ids,
        ))
    }
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    format_version: u32,
    idf_variant: String,
    tf: String,
    norm: String,
    vocabulary: Vec<String>,
    idf: Vec<f64>,
    doc_ids: Vec<String>,
    doc_vectors: Vec<Vec<(usize, f64)>>,
}

/// Scores closer than `1024 * epsilon` rank as ties, so that cosines which
/// are equal in exact arithmetic but differ in the last bits fall back to id.
fn rank_key<F: Scalar>(score: F) -> i64 {
    (score / (F::epsilon() * F::from_usize_lossy(1024)))
        .round()
        .to_i64()
        .unwrap_or(0)
}

/// Score descending, then sample id ascending.
pub(crate) fn score_order<F: Scalar>(sa: F, ida: &str, sb: F, idb: &str) -> std::cmp::Ordering {
    rank_key(sb).cmp(&rank_key(sa)).then_with(|| ida.cmp(idb))
}

/// Top-`m` documents by cosine similarity, skipping ids in `exclude`.
/// Ordered by score descending, then sample id ascending.
pub fn query<F: Scalar>(
    index: &TfidfIndex<F>,
    x: &Utterance,
    m: usize,
    exclude: &HashSet<String>,
) -> Vec<RetrievalHit<F>> {
    let scores = index.scores(x);
    let mut ranked: Vec<(F, &str)> = scores
        .into_iter()
        .zip(&index.doc_ids)
        .filter(|(_, id)| !exclude.contains(id.as_str()))
        .map(|(s, id)| (s, id.as_str()))
        .collect();
    let by_score = |a: &(F, &str), b: &(F, &str)| score_order(a.0, a.1, b.0, b.1);
    if m < ranked.len() {
        ranked.select_nth_unstable_by(m, by_score);
        ranked.truncate(m);
    }
    ranked.sort_by(by_score);
    ranked
        .into_iter()
        .enumerate()
        .map(|(i, (score, id))| RetrievalHit {
            sample_id: id.to_string(),
            rank: i + 1,
            score,
        })
        .collect()
}
