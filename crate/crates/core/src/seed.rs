use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 64-bit FNV-1a; stable across platforms and releases.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Independent RNG stream for `(seed, key, round)`.
pub(crate) fn stream(seed: u64, key: &str, round: u64) -> ChaCha8Rng {
    let mixed =
        seed ^ fnv1a(key.as_bytes()).rotate_left(17) ^ round.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    ChaCha8Rng::seed_from_u64(mixed)
}
