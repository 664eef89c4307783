use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{RetrievalError, RetrievalHit, POOL_LIMIT};
use crate::scalar::Scalar;

/// Unnormalized geometric weights `p (1 - p)^(r - 1)` for ranks `1..=n`.
pub fn geometric_weights<F: Scalar>(p: F, n: usize) -> Vec<F> {
    let q = F::one() - p;
    let mut w = p;
    (0..n)
        .map(|_| {
            let cur = w;
            w = w * q;
            cur
        })
        .collect()
}

fn by_score_then_id<F: Scalar>(a: &RetrievalHit<F>, b: &RetrievalHit<F>) -> std::cmp::Ordering {
    super::tfidf::score_order(a.score, &a.sample_id, b.score, &b.sample_id)
}

/// Seeded wrapper around [`sample_exemplars_with`].
pub fn sample_exemplars<F: Scalar>(
    hits: &[RetrievalHit<F>],
    k: usize,
    p_geom: F,
    seed: u64,
) -> Result<Vec<RetrievalHit<F>>, RetrievalError> {
    sample_exemplars_with(hits, k, p_geom, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Draws `k` distinct hits from the top `min(100, |hits|)` ranked hits.
///
/// Each draw picks rank `r` with probability proportional to
/// `p (1 - p)^(r - 1)`, renormalized over the ranks not yet taken. The
/// selection is returned ordered by score descending. When `|hits| <= k`
/// every hit is returned.
pub fn sample_exemplars_with<F: Scalar, R: Rng + ?Sized>(
    hits: &[RetrievalHit<F>],
    k: usize,
    p_geom: F,
    rng: &mut R,
) -> Result<Vec<RetrievalHit<F>>, RetrievalError> {
    if !(p_geom > F::zero() && p_geom < F::one()) {
        return Err(RetrievalError::InvalidProbability(p_geom.to_f64_lossy()));
    }
    let mut chosen: Vec<RetrievalHit<F>> = if hits.len() <= k {
        hits.to_vec()
    } else {
        let pool = &hits[..hits.len().min(POOL_LIMIT)];
        let mut remaining: Vec<(usize, F)> = geometric_weights(p_geom, pool.len()).into_iter().enumerate().collect();
        let mut out = Vec::with_capacity(k);
        while out.len() < k && !remaining.is_empty() {
            let total: F = remaining.iter().map(|&(_, w)| w).sum();
            let target = F::from_f64_lossy(rng.gen::<f64>()) * total;
            let mut acc = F::zero();
            let mut pick = remaining.len() - 1;
            for (i, &(_, w)) in remaining.iter().enumerate() {
                acc = acc + w;
                if target < acc {
                    pick = i;
                    break;
                }
            }
            let (idx, _) = remaining.remove(pick);
            out.push(pool[idx].clone());
        }
        out
    };
    chosen.sort_by(by_score_then_id);
    Ok(chosen)
}

/// The first `k` hits.
pub fn top_k_exemplars<F: Scalar>(hits: &[RetrievalHit<F>], k: usize) -> Vec<RetrievalHit<F>> {
    hits.iter().take(k).cloned().collect()
}
