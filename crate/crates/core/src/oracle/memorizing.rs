use std::collections::HashMap;

use super::{OracleError, ParserOracle};
use crate::dataset::Manifest;
use crate::top::{canonicalize, parse_top};

/// Exact-lookup parser: returns the stored parse for utterances it has seen.
/// When an utterance occurs more than once, the first parse wins.
#[derive(Debug, Clone, Default)]
pub struct MemorizingOracle {
    memory: HashMap<String, String>,
}

impl MemorizingOracle {
    pub fn from_manifest(manifest: &Manifest) -> Self {
        Self::from_pairs(
            manifest
                .iter()
                .map(|s| (s.utterance().to_string(), s.parse().serialize())),
        )
    }

    /// Parses that do not validate are stored canonicalized as-is.
    pub fn from_pairs<I, X, Y>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (X, Y)>,
        X: AsRef<str>,
        Y: AsRef<str>,
    {
        let mut memory = HashMap::new();
        for (x, y) in pairs {
            let y = y.as_ref();
            let parse = parse_top(y).map(|t| t.serialize()).unwrap_or_else(|_| canonicalize(y));
            memory.entry(canonicalize(x.as_ref())).or_insert(parse);
        }
        MemorizingOracle { memory }
    }

    pub fn extend<I, X, Y>(&mut self, pairs: I)
    where
        I: IntoIterator<Item = (X, Y)>,
        X: AsRef<str>,
        Y: AsRef<str>,
    {
        for (k, v) in Self::from_pairs(pairs).memory {
            self.memory.entry(k).or_insert(v);
        }
    }

    pub fn len(&self) -> usize {
        self.memory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memory.is_empty()
    }
}

impl ParserOracle for MemorizingOracle {
    fn parse(&self, utterance: &str) -> Result<Option<String>, OracleError> {
        Ok(self.memory.get(&canonicalize(utterance)).cloned())
    }
}
