use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// What a random stream is used for. Each purpose and agent gets its own
/// ChaCha stream under the same key, so enabling one disturbance never shifts
/// the draws of another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Policy = 1,
    PositionNoise = 2,
    YawNoise = 3,
}

pub fn stream(seed: u64, purpose: StreamPurpose, agent: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | agent as u64);
    rng
}

/// Derives a 64-bit seed from labelled parts (SHA-256, first 8 bytes, little endian).
pub fn derive_seed(parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
