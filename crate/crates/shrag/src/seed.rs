//! Stable seed derivation for named random streams.
//!
//! Every source of randomness in a run is seeded from the configured base
//! seed through `derive_seed(base, stream_name)`, so results are independent
//! of scheduling and worker counts. The derivation is hand-rolled (FNV-1a
//! followed by a splitmix64 finalizer) so that it never changes underneath
//! us with a dependency upgrade.

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// FNV-1a over raw bytes. Stable across platforms and releases.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// splitmix64 finalizer; decorrelates nearby inputs.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive the seed for a named stream (e.g. "embed", "sweep/rep3/q07").
pub fn derive_seed(base: u64, stream: &str) -> u64 {
    splitmix64(base ^ fnv1a64(stream.as_bytes()))
}
