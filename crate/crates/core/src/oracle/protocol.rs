//! JSON bodies of the model-bridge HTTP protocol.
//!
//! | endpoint            | request               | response              |
//! |---------------------|-----------------------|-----------------------|
//! | `POST /v1/fill_mask`| [`FillMaskRequest`]   | [`FillMaskResponse`]  |
//! | `POST /v1/parse`    | [`ParseRequest`]      | [`ParseResponse`]     |
//! | `GET /v1/health`    | none                  | [`HealthResponse`]    |
//!
//! Malformed requests are answered with 400, an unloaded model with 503.

use serde::{Deserialize, Serialize};

use super::{MaskQuery, OracleError, Proposal};
use crate::top::parse_top;

pub const FILL_MASK_PATH: &str = "/v1/fill_mask";
pub const PARSE_PATH: &str = "/v1/parse";
pub const HEALTH_PATH: &str = "/v1/health";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FillMaskRequest {
    pub tokens: Vec<String>,
    pub mask_positions: Vec<usize>,
    pub top_k: usize,
}

impl FillMaskRequest {
    pub fn new(query: &MaskQuery, top_k: usize) -> Self {
        FillMaskRequest {
            tokens: query.wire_tokens(),
            mask_positions: query.mask_positions().to_vec(),
            top_k: top_k.max(1),
        }
    }

    /// Checks the request the way a conforming server must before answering.
    pub fn validate(&self) -> Result<MaskQuery, OracleError> {
        if self.top_k == 0 {
            return Err(OracleError::InvalidQuery("top_k must be at least 1".into()));
        }
        MaskQuery::from_wire(&self.tokens, &self.mask_positions)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireProposal {
    pub position: usize,
    /// `null` when the model had no whole-word candidate for this mask.
    pub token: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillMaskResponse {
    pub proposals: Vec<WireProposal>,
}

impl FillMaskResponse {
    /// Groups proposals per mask (in `query.mask_positions()` order), keeps the
    /// server's order within a position, and truncates to `top_k`.
    pub fn into_ranked(self, query: &MaskQuery, top_k: usize) -> Result<Vec<Vec<Proposal>>, OracleError> {
        let positions = query.mask_positions();
        let mut ranked: Vec<Vec<Proposal>> = vec![Vec::new(); positions.len()];
        for wire in self.proposals {
            let slot = positions
                .binary_search(&wire.position)
                .map_err(|_| OracleError::Protocol(format!("proposal for unmasked position {}", wire.position)))?;
            if let Some(tok) = wire.token {
                let score = wire.score.unwrap_or(0.0);
                ranked[slot].push(Proposal::new(wire.position, &tok, score)?);
            }
        }
        for (cands, &position) in ranked.iter_mut().zip(positions) {
            if cands.is_empty() {
                return Err(OracleError::NoProposal { position });
            }
            cands.truncate(top_k.max(1));
        }
        Ok(ranked)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParseRequest {
    pub utterance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseResponse {
    pub parse: Option<String>,
}

impl ParseResponse {
    /// Canonical form of the answer; answers that do not parse count as absent.
    pub fn canonical(self) -> Option<String> {
        let raw = self.parse?;
        match parse_top(&raw) {
            Ok(tree) => Some(tree.serialize()),
            Err(e) => {
                log::debug!("discarding unparseable oracle answer `{raw}`: {e}");
                None
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    #[serde(default)]
    pub proposer: Option<String>,
    #[serde(default)]
    pub parser: Option<String>,
}
