//! Deterministic seed derivation.
//!
//! All randomness in the crate flows from explicit `u64` seeds. Parallel
//! workers and per-item noise draws derive disjoint child seeds from a base
//! seed with a splitmix64 chain, so results are reproducible independent of
//! scheduling.

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Child seed for (`stream`, `index`) under `base`. Distinct inputs give
/// statistically independent ChaCha streams.
pub fn derive(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ stream.wrapping_mul(0xa076_1d64_78bd_642f)) ^ index)
}
