//! Derived per-item seeds, so parallel and serial runs draw identical randomness.

use sha2::{Digest, Sha256};

/// Stable 64-bit seed derived from `(seed, id, k)`.
pub fn derive_seed(seed: u64, id: &str, k: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((id.len() as u64).to_le_bytes());
    hasher.update(id.as_bytes());
    hasher.update(k.to_le_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
