//! Deterministic random streams. Each particle draws from its own ChaCha
//! stream keyed by (master seed, particle label), so adding or reordering
//! particles never changes another particle's noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// 64-bit FNV-1a; stable across platforms and releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn particle_stream(master_seed: u64, label: &str) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(fnv1a(label.as_bytes()));
    rng
}

/// Stream for non-particle draws (e.g. randomized spawn parameters).
pub fn auxiliary_stream(master_seed: u64, purpose: &str) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(fnv1a(purpose.as_bytes()));
    rng
}
