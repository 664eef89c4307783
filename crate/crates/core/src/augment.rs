//! Masked-LM data augmentation.
//!
//! For a pair `(x, y)`: mask a random portion `p ~ U(0, 0.2)` of the tokens
//! in `x`, replace each mask with a proposer token to get `x_aug`, and mirror
//! every replacement of a token that is a slot value in `y` into `y_aug`.
//! Candidates are then kept only if a parser oracle reproduces `y_aug` from
//! `x_aug` exactly.
//!
//! Propagation is positional: leaves are aligned onto the utterance with
//! [`align_leaves`], and only the leaf aligned to a masked position changes.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::dataset::{DatasetError, Manifest, Sample, SampleError};
use crate::metrics::exact_match;
use crate::oracle::{MaskQuery, OracleError, ParserOracle, Proposal, TokenProposer};
use crate::pool::with_jobs;
use crate::seed::derive_seed;
use crate::top::{align_leaves, ParseTree, Token, TopError, Utterance};

/// Upper bound of the uniform masking ratio.
pub const MAX_MASK_RATIO: f64 = 0.2;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("invalid mask plan for `{sample_id}`: {reason}")]
    InvalidPlan { sample_id: String, reason: String },
    #[error("expected one proposal per masked position {expected:?}, got {got:?}")]
    ProposalMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("sample `{sample_id}`: {source}")]
    Alignment {
        sample_id: String,
        #[source]
        source: TopError,
    },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("augmentation factor must be at least 1")]
    InvalidFactor,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskPlan {
    pub sample_id: String,
    pub p: f64,
    pub positions: Vec<usize>,
    pub seed: u64,
}

impl MaskPlan {
    /// A plan with explicit positions, bypassing random drawing.
    pub fn with_positions(sample_id: impl Into<String>, mut positions: Vec<usize>) -> Self {
        positions.sort_unstable();
        positions.dedup();
        MaskPlan {
            sample_id: sample_id.into(),
            p: 0.0,
            positions,
            seed: 0,
        }
    }

    /// True when `p * len` rounded to zero masks and the one-mask floor kicked in.
    pub fn floor_applied(&self, len: usize) -> bool {
        (self.p * len as f64).round() < 1.0
    }
}

/// Number of masks for ratio `p` on `len` tokens: `max(1, round(p * len))`,
/// capped at `len`.
pub fn mask_count(p: f64, len: usize) -> usize {
    let n = (p * len as f64).round() as usize;
    n.max(1).min(len)
}

/// Draws `p ~ U[0, 0.2]` and `mask_count(p, |x|)` distinct positions.
pub fn draw_mask_plan(sample: &Sample, seed: u64) -> MaskPlan {
    let len = sample.utterance().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.gen_range(0.0..=MAX_MASK_RATIO);
    let n = mask_count(p, len);
    let mut positions = rand::seq::index::sample(&mut rng, len, n).into_vec();
    positions.sort_unstable();
    MaskPlan {
        sample_id: sample.id().to_string(),
        p,
        positions,
        seed,
    }
}

pub fn apply_mask(sample: &Sample, plan: &MaskPlan) -> Result<MaskQuery, AugmentError> {
    MaskQuery::masking(sample.utterance(), &plan.positions).map_err(|e| AugmentError::InvalidPlan {
        sample_id: sample.id().to_string(),
        reason: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Replacement {
    pub position: usize,
    pub old: Token,
    pub new: Token,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterVerdict {
    Kept,
    DroppedNoParse,
    DroppedMismatch,
    DroppedDuplicate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample {
    pub source_id: String,
    /// Index of the mask plan for this source.
    pub k: usize,
    /// Proposal rank used for every mask (0 = top-1).
    pub variant: usize,
    pub plan: MaskPlan,
    pub x_aug: Utterance,
    pub y_aug: ParseTree,
    pub replacements: Vec<Replacement>,
    /// `None` until the candidate has been filtered.
    pub filter_verdict: Option<FilterVerdict>,
}

impl AugmentedSample {
    pub fn id(&self) -> String {
        if self.variant == 0 {
            format!("{}@aug{}", self.source_id, self.k)
        } else {
            format!("{}@aug{}_{}", self.source_id, self.k, self.variant)
        }
    }

    /// Positions where the parse was rewritten along with the utterance.
    pub fn propagated_positions(&self, source: &Sample) -> Vec<usize> {
        let aligned: HashSet<usize> = align_leaves(source.parse(), source.utterance())
            .map(|a| a.into_iter().map(|(_, pos)| pos).collect())
            .unwrap_or_default();
        self.replacements
            .iter()
            .map(|r| r.position)
            .filter(|p| aligned.contains(p))
            .collect()
    }

    fn key(&self) -> (String, String) {
        (self.x_aug.to_string(), self.y_aug.serialize())
    }

    fn provenance(&self) -> serde_json::Value {
        json!({
            "source_id": self.source_id,
            "positions": self.plan.positions,
            "replacements": self.replacements,
            "p": self.plan.p,
        })
    }

    /// Converts a kept candidate into a dataset sample that inherits the
    /// source's domain and split.
    pub fn to_sample(&self, source: &Sample) -> Result<Sample, AugmentError> {
        Sample::new(
            self.id(),
            source.domain(),
            self.x_aug.clone(),
            self.y_aug.clone(),
            source.split(),
        )
        .map(|s| s.with_provenance(Some(self.provenance())))
        .map_err(|e| match e {
            SampleError::Alignment(source_err) => AugmentError::Alignment {
                sample_id: self.id(),
                source: source_err,
            },
            other => AugmentError::InvalidPlan {
                sample_id: self.id(),
                reason: other.to_string(),
            },
        })
    }
}

/// Substitutes the proposals into `x` and mirrors replacements of aligned
/// leaves into `y`. The result is unfiltered.
pub fn propagate(sample: &Sample, plan: &MaskPlan, proposals: &[Proposal]) -> Result<AugmentedSample, AugmentError> {
    let got: Vec<usize> = proposals.iter().map(|p| p.position).collect();
    if got != plan.positions {
        return Err(AugmentError::ProposalMismatch {
            expected: plan.positions.clone(),
            got,
        });
    }
    let utt = sample.utterance();
    if let Some(&bad) = plan.positions.iter().find(|&&p| p >= utt.len()) {
        return Err(AugmentError::InvalidPlan {
            sample_id: sample.id().to_string(),
            reason: format!("position {bad} out of range"),
        });
    }
    let alignment = align_leaves(sample.parse(), utt).map_err(|source| AugmentError::Alignment {
        sample_id: sample.id().to_string(),
        source,
    })?;

    let mut tokens = utt.tokens().to_vec();
    let mut replacements = Vec::with_capacity(proposals.len());
    for prop in proposals {
        replacements.push(Replacement {
            position: prop.position,
            old: tokens[prop.position].clone(),
            new: prop.token.clone(),
        });
        tokens[prop.position] = prop.token.clone();
    }

    let y_aug = sample.parse().map_leaves(|leaf_index, leaf| {
        let pos = alignment[leaf_index].1;
        proposals
            .iter()
            .find(|p| p.position == pos)
            .map(|p| p.token.clone())
            .unwrap_or_else(|| leaf.clone())
    });

    Ok(AugmentedSample {
        source_id: sample.id().to_string(),
        k: 0,
        variant: 0,
        plan: plan.clone(),
        x_aug: Utterance::new(tokens),
        y_aug,
        replacements,
        filter_verdict: None,
    })
}

/// True when re-aligning the augmented pair puts every leaf back on the
/// position it had in the source pair.
fn alignment_preserved(sample: &Sample, cand: &AugmentedSample) -> bool {
    match (
        align_leaves(sample.parse(), sample.utterance()),
        align_leaves(&cand.y_aug, &cand.x_aug),
    ) {
        (Ok(before), Ok(after)) => before == after,
        _ => false,
    }
}

/// Assigns a verdict to every candidate.
///
/// Candidates identical to a source pair in `sources`, or to an earlier
/// candidate, are dropped as duplicates without consulting the oracle. The
/// rest are kept iff the oracle's answer for `x_aug` exactly matches
/// `y_aug`. Any oracle failure aborts the whole batch.
pub fn filter<O: ParserOracle + ?Sized>(
    mut candidates: Vec<AugmentedSample>,
    sources: &Manifest,
    oracle: &O,
) -> Result<Vec<AugmentedSample>, AugmentError> {
    let mut seen: HashSet<(String, String)> = sources
        .iter()
        .map(|s| (s.utterance().to_string(), s.parse().serialize()))
        .collect();
    let mut pending = Vec::new();
    for (i, cand) in candidates.iter_mut().enumerate() {
        if seen.insert(cand.key()) {
            pending.push(i);
        } else {
            cand.filter_verdict = Some(FilterVerdict::DroppedDuplicate);
        }
    }

    let answers = pending
        .par_iter()
        .map(|&i| {
            let cand = &candidates[i];
            oracle.parse(&cand.x_aug.to_string()).map(|answer| match answer {
                None => FilterVerdict::DroppedNoParse,
                Some(y) if exact_match(&y, &cand.y_aug.serialize()) => FilterVerdict::Kept,
                Some(_) => FilterVerdict::DroppedMismatch,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    for (i, verdict) in pending.into_iter().zip(answers) {
        candidates[i].filter_verdict = Some(verdict);
    }
    Ok(candidates)
}

#[derive(Debug, Clone)]
pub struct AugmentConfig {
    /// Mask plans drawn per source sample.
    pub factor: usize,
    pub seed: u64,
    /// Candidates per plan; variant `j` uses the `j`-th ranked proposal for every mask.
    pub proposals_per_mask: usize,
    pub jobs: Option<usize>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            factor: 1,
            seed: 0,
            proposals_per_mask: 1,
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AugReport {
    pub candidates: usize,
    pub kept: usize,
    pub dropped_no_parse: usize,
    pub dropped_mismatch: usize,
    pub dropped_duplicate: usize,
    /// Plans skipped because the proposer had no token for some mask.
    pub no_proposal: usize,
    /// Candidates skipped because a replacement made leaf alignment ambiguous.
    pub misaligned: usize,
    /// Plans whose `round(p * |x|)` was 0 and were raised to one mask.
    pub mask_floor_applied: usize,
    pub plans: usize,
}

#[derive(Debug)]
pub struct AugmentOutcome {
    /// Kept samples only, ids `<source_id>@aug<k>`.
    pub manifest: Manifest,
    pub report: AugReport,
    /// Every candidate with its verdict, in output order.
    pub candidates: Vec<AugmentedSample>,
}

enum PlanResult {
    Candidates(Vec<AugmentedSample>, usize),
    NoProposal,
}

fn generate_for_plan<P: TokenProposer + ?Sized>(
    sample: &Sample,
    k: usize,
    seed: u64,
    proposer: &P,
    per_mask: usize,
) -> Result<(MaskPlan, PlanResult), AugmentError> {
    let plan = draw_mask_plan(sample, derive_seed(seed, sample.id(), k as u64));
    let query = apply_mask(sample, &plan)?;
    let ranked = match proposer.propose(&query, per_mask) {
        Ok(r) => r,
        Err(OracleError::NoProposal { position }) => {
            log::debug!("{}: no proposal at position {position}", sample.id());
            return Ok((plan, PlanResult::NoProposal));
        }
        Err(e) => return Err(e.into()),
    };
    if ranked.len() != plan.positions.len() {
        return Err(AugmentError::ProposalMismatch {
            expected: plan.positions.clone(),
            got: ranked.iter().filter_map(|c| c.first().map(|p| p.position)).collect(),
        });
    }
    let variants = ranked.iter().map(Vec::len).min().unwrap_or(0).min(per_mask.max(1));
    let mut out = Vec::with_capacity(variants);
    let mut misaligned = 0;
    for variant in 0..variants {
        let chosen: Vec<Proposal> = ranked.iter().map(|c| c[variant].clone()).collect();
        let mut cand = propagate(sample, &plan, &chosen)?;
        cand.k = k;
        cand.variant = variant;
        if alignment_preserved(sample, &cand) {
            out.push(cand);
        } else {
            misaligned += 1;
        }
    }
    Ok((plan, PlanResult::Candidates(out, misaligned)))
}

/// Draws `factor` mask plans per source sample (seeded by
/// `(seed, sample_id, k)`), fills them, propagates, and filters. Output order
/// is by `(source_id, k, variant)` regardless of `jobs`.
pub fn augment_manifest<P, O>(
    manifest: &Manifest,
    proposer: &P,
    oracle: &O,
    config: &AugmentConfig,
) -> Result<AugmentOutcome, AugmentError>
where
    P: TokenProposer + ?Sized,
    O: ParserOracle + ?Sized,
{
    if config.factor == 0 {
        return Err(AugmentError::InvalidFactor);
    }
    let jobs: Vec<(usize, usize)> = (0..manifest.len())
        .flat_map(|i| (0..config.factor).map(move |k| (i, k)))
        .collect();

    let generated = with_jobs(config.jobs, || {
        jobs.par_iter()
            .map(|&(i, k)| {
                let sample = &manifest.samples()[i];
                generate_for_plan(sample, k, config.seed, proposer, config.proposals_per_mask)
                    .map(|(plan, res)| (i, plan, res))
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut report = AugReport {
        plans: generated.len(),
        ..AugReport::default()
    };
    let mut candidates = Vec::new();
    let mut source_of = std::collections::HashMap::new();
    for (i, plan, res) in generated {
        let sample = &manifest.samples()[i];
        if plan.floor_applied(sample.utterance().len()) {
            report.mask_floor_applied += 1;
        }
        match res {
            PlanResult::NoProposal => report.no_proposal += 1,
            PlanResult::Candidates(cands, misaligned) => {
                report.misaligned += misaligned;
                source_of.insert(sample.id().to_string(), i);
                candidates.extend(cands);
            }
        }
    }
    candidates.sort_by(|a, b| (a.source_id.as_str(), a.k, a.variant).cmp(&(b.source_id.as_str(), b.k, b.variant)));
    report.candidates = candidates.len();

    let candidates = with_jobs(config.jobs, || filter(candidates, manifest, oracle))?;

    let mut kept = Vec::new();
    for cand in &candidates {
        match cand.filter_verdict {
            Some(FilterVerdict::Kept) => {
                report.kept += 1;
                let source = &manifest.samples()[source_of[&cand.source_id]];
                kept.push(cand.to_sample(source)?);
            }
            Some(FilterVerdict::DroppedNoParse) => report.dropped_no_parse += 1,
            Some(FilterVerdict::DroppedMismatch) => report.dropped_mismatch += 1,
            Some(FilterVerdict::DroppedDuplicate) => report.dropped_duplicate += 1,
            None => unreachable!("filter assigns a verdict to every candidate"),
        }
    }

    Ok(AugmentOutcome {
        manifest: Manifest::new(kept, format!("augment({}) seed={}", manifest.provenance(), config.seed))?,
        report,
        candidates,
    })
}
