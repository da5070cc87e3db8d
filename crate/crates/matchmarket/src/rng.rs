//! Seed derivation and pair-keyed compatibility coins.
//!
//! One root seed fans out into independent purpose-tagged substreams
//! (arrivals per side, lifetimes per side, tie-break choices) so that adding
//! consumers of one stream never perturbs another. Compatibility coins are
//! not a stream at all: each unordered agent pair owns one Bernoulli(p) coin,
//! keyed by the pair's ids, so every policy run over the same realization
//! (and the omniscient benchmark) sees identical coins no matter when or
//! whether it evaluates them.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 finalizer; a cheap, well-mixed 64-bit permutation.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Purpose tags for substream derivation.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    ArrivalsU,
    ArrivalsV,
    LifetimesU,
    LifetimesV,
    Coins,
    /// Uniform neighbor choice; one stream per policy so identical
    /// (seed, policy) pairs replay exactly.
    Choices {
        policy_tag: u64,
    },
    Replication {
        index: u64,
    },
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::ArrivalsU => 0x41,
            Stream::ArrivalsV => 0x42,
            Stream::LifetimesU => 0x4c41,
            Stream::LifetimesV => 0x4c42,
            Stream::Coins => 0x434f,
            Stream::Choices { policy_tag } => 0x4348 ^ mix64(policy_tag),
            Stream::Replication { index } => 0x5250 ^ mix64(index.wrapping_add(1)),
        }
    }
}

/// Derives a substream seed from the root seed and a purpose tag.
pub fn derive_seed(root: u64, stream: Stream) -> u64 {
    mix64(root ^ mix64(stream.tag()))
}

/// A freshly seeded generator for the given substream.
pub fn stream_rng(root: u64, stream: Stream) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(root, stream))
}

/// The Bernoulli(p) compatibility coin of the pair `(u_id, v_id)`.
///
/// `u_id` must be the side-U agent. Pure function of its arguments, so the
/// same pair gets the same coin in every policy run sharing `coin_seed`.
#[inline]
pub fn pair_coin(coin_seed: u64, u_id: u32, v_id: u32, p: f64) -> bool {
    let key = ((u_id as u64) << 32) | v_id as u64;
    let h = mix64(coin_seed ^ mix64(key));
    // Top 53 bits to a uniform in [0, 1).
    let unit = (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    unit < p
}
