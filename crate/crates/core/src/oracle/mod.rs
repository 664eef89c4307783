//! Inference interfaces used by augmentation: a mask-filling token proposer
//! and an exact-parse oracle, plus offline and remote implementations.

mod lexicon;
mod memorizing;
pub mod protocol;
mod remote;

use std::fmt;

use thiserror::Error;

use crate::top::{Token, Utterance};

pub use lexicon::LexiconProposer;
pub use memorizing::MemorizingOracle;
pub use remote::{RemoteClient, RemoteConfig};

/// Literal sentinel for a masked position.
pub const MASK_TOKEN: &str = "[MASK]";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("token proposer unavailable: {0}")]
    ProposerUnavailable(String),
    #[error("parse oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("no proposal for mask at position {position}")]
    NoProposal { position: usize },
    #[error("invalid mask query: {0}")]
    InvalidQuery(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
}

impl OracleError {
    /// Service-level failures that should abort a run rather than skip an item.
    pub fn is_unavailable(&self) -> bool {
        matches!(
            self,
            OracleError::ProposerUnavailable(_) | OracleError::OracleUnavailable(_) | OracleError::Protocol(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MaskSlot {
    Token(Token),
    Mask,
}

impl MaskSlot {
    pub fn as_str(&self) -> &str {
        match self {
            MaskSlot::Token(t) => t.as_str(),
            MaskSlot::Mask => MASK_TOKEN,
        }
    }
}

/// An utterance with some positions replaced by the mask sentinel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskQuery {
    tokens: Vec<MaskSlot>,
    mask_positions: Vec<usize>,
}

impl MaskQuery {
    pub fn new(tokens: Vec<MaskSlot>) -> Self {
        let mask_positions = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| matches!(t, MaskSlot::Mask))
            .map(|(i, _)| i)
            .collect();
        MaskQuery { tokens, mask_positions }
    }

    /// Masks `positions` of `utterance`. Positions must be in range.
    pub fn masking(utterance: &Utterance, positions: &[usize]) -> Result<Self, OracleError> {
        if let Some(&bad) = positions.iter().find(|&&p| p >= utterance.len()) {
            return Err(OracleError::InvalidQuery(format!(
                "position {bad} out of range for {} tokens",
                utterance.len()
            )));
        }
        let tokens = utterance
            .tokens()
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if positions.contains(&i) {
                    MaskSlot::Mask
                } else {
                    MaskSlot::Token(t.clone())
                }
            })
            .collect();
        Ok(Self::new(tokens))
    }

    /// Builds a query from its wire form, checking that `mask_positions` are
    /// strictly increasing and name exactly the sentinel tokens.
    pub fn from_wire(tokens: &[String], mask_positions: &[usize]) -> Result<Self, OracleError> {
        let slots = tokens
            .iter()
            .map(|t| {
                if t == MASK_TOKEN {
                    Ok(MaskSlot::Mask)
                } else {
                    Token::new(t.as_str())
                        .map(MaskSlot::Token)
                        .map_err(|e| OracleError::InvalidQuery(e.to_string()))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let query = Self::new(slots);
        if query.mask_positions != mask_positions {
            return Err(OracleError::InvalidQuery(format!(
                "mask_positions {mask_positions:?} do not match sentinel positions {:?}",
                query.mask_positions
            )));
        }
        Ok(query)
    }

    pub fn tokens(&self) -> &[MaskSlot] {
        &self.tokens
    }

    pub fn mask_positions(&self) -> &[usize] {
        &self.mask_positions
    }

    pub fn wire_tokens(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.as_str().to_string()).collect()
    }
}

impl fmt::Display for MaskQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(t.as_str())?;
        }
        Ok(())
    }
}

/// A single replacement token for one mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub position: usize,
    pub token: Token,
    /// Higher is more likely.
    pub score: f64,
}

impl Proposal {
    /// Lowercases and validates a raw token coming from a model.
    pub fn new(position: usize, raw: &str, score: f64) -> Result<Self, OracleError> {
        let token = Token::new(raw.to_lowercase()).map_err(|e| OracleError::Protocol(e.to_string()))?;
        Ok(Proposal { position, token, score })
    }
}

pub trait TokenProposer: Send + Sync {
    /// Ranked candidates per mask, aligned with `query.mask_positions()`:
    /// each inner list is non-empty, best first, at most `top_k` long.
    fn propose(&self, query: &MaskQuery, top_k: usize) -> Result<Vec<Vec<Proposal>>, OracleError>;

    /// Top-1 proposal per mask.
    fn fill(&self, query: &MaskQuery) -> Result<Vec<Proposal>, OracleError> {
        let ranked = self.propose(query, 1)?;
        ranked
            .into_iter()
            .zip(query.mask_positions())
            .map(|(mut cands, &position)| {
                if cands.is_empty() {
                    Err(OracleError::NoProposal { position })
                } else {
                    Ok(cands.swap_remove(0))
                }
            })
            .collect()
    }
}

pub trait ParserOracle: Send + Sync {
    /// Best canonical parse for the utterance, or `None` when the model has none.
    fn parse(&self, utterance: &str) -> Result<Option<String>, OracleError>;
}

impl<T: TokenProposer + ?Sized> TokenProposer for &T {
    fn propose(&self, query: &MaskQuery, top_k: usize) -> Result<Vec<Vec<Proposal>>, OracleError> {
        (**self).propose(query, top_k)
    }
}

impl<T: TokenProposer + ?Sized> TokenProposer for Box<T> {
    fn propose(&self, query: &MaskQuery, top_k: usize) -> Result<Vec<Vec<Proposal>>, OracleError> {
        (**self).propose(query, top_k)
    }
}

impl<T: ParserOracle + ?Sized> ParserOracle for &T {
    fn parse(&self, utterance: &str) -> Result<Option<String>, OracleError> {
        (**self).parse(utterance)
    }
}

impl<T: ParserOracle + ?Sized> ParserOracle for Box<T> {
    fn parse(&self, utterance: &str) -> Result<Option<String>, OracleError> {
        (**self).parse(utterance)
    }
}
