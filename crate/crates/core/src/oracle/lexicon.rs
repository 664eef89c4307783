use std::collections::BTreeMap;
use std::path::Path;

use super::{MaskQuery, OracleError, Proposal, TokenProposer};

/// Key matched when a mask has no token to its left.
pub const START_KEY: &str = "^";
/// Fallback key used when the left-context key has no entry.
pub const ANY_KEY: &str = "*";

/// Offline proposer backed by a substitution table.
///
/// Each mask is looked up by the token immediately to its left (`^` at the
/// start of the utterance), then by `*`. Replacement lists are in priority
/// order; the first entries win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LexiconProposer {
    table: BTreeMap<String, Vec<String>>,
}

impl LexiconProposer {
    pub fn new(table: BTreeMap<String, Vec<String>>) -> Result<Self, OracleError> {
        let mut clean = BTreeMap::new();
        for (key, replacements) in table {
            let list = replacements
                .iter()
                .map(|r| Proposal::new(0, r, 0.0).map(|p| p.token.into_string()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| OracleError::InvalidQuery(format!("lexicon entry `{key}`: {e}")))?;
            clean.insert(key.to_lowercase(), list);
        }
        Ok(LexiconProposer { table: clean })
    }

    /// Reads a JSON object mapping context tokens to replacement lists.
    pub fn from_json_file(path: &Path) -> Result<Self, OracleError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OracleError::ProposerUnavailable(format!("{}: {e}", path.display())))?;
        let table: BTreeMap<String, Vec<String>> =
            serde_json::from_str(&text).map_err(|e| OracleError::InvalidQuery(format!("{}: {e}", path.display())))?;
        Self::new(table)
    }

    fn lookup(&self, query: &MaskQuery, position: usize) -> Option<&[String]> {
        let left = match position.checked_sub(1).map(|i| &query.tokens()[i]) {
            None => START_KEY,
            Some(slot) => slot.as_str(),
        };
        [left, ANY_KEY]
            .into_iter()
            .find_map(|k| self.table.get(k).filter(|v| !v.is_empty()))
            .map(Vec::as_slice)
    }
}

impl TokenProposer for LexiconProposer {
    fn propose(&self, query: &MaskQuery, top_k: usize) -> Result<Vec<Vec<Proposal>>, OracleError> {
        let top_k = top_k.max(1);
        query
            .mask_positions()
            .iter()
            .map(|&position| {
                let entries = self
                    .lookup(query, position)
                    .ok_or(OracleError::NoProposal { position })?;
                entries
                    .iter()
                    .take(top_k)
                    .enumerate()
                    .map(|(rank, tok)| Proposal::new(position, tok, 1.0 / (rank as f64 + 1.0)))
                    .collect()
            })
            .collect()
    }
}
