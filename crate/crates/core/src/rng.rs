//! Counter-based uniform sampling.
//!
//! Monte Carlo θ values are addressed by `(seed, index)` rather than drawn
//! from a stateful stream, so campaigns produce identical samples no matter
//! how work is split across threads. The generator is the SplitMix64
//! finalizer applied to the counter's position in the seed's stream.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `index`-th 64-bit word of the stream identified by `seed`.
#[inline]
pub fn uniform_u64(seed: u64, index: u64) -> u64 {
    splitmix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Uniform in `[0, 1)` with 53 random bits.
#[inline]
pub fn uniform_unit(seed: u64, index: u64) -> f64 {
    (uniform_u64(seed, index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `[0, bound)` (Lemire multiply-shift; `bound` = 0 maps
/// to 0). Bias is at most `bound / 2^64`, irrelevant at our bounds.
#[inline]
pub fn uniform_below(seed: u64, index: u64, bound: u64) -> u64 {
    ((uniform_u64(seed, index) as u128 * bound as u128) >> 64) as u64
}
