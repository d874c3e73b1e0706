//! Seed splitting.
//!
//! A run is driven by one 64-bit seed. Each sub-computation draws from its own
//! ChaCha stream selected by a fixed tag, so it can be replayed in isolation
//! without consuming randomness from any other stage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Values are part of the reproducibility contract; do not renumber.
pub mod stream {
    pub const EM_INIT: u64 = 1;
    pub const SAMPLE: u64 = 2;
    pub const BARYCENTER_INIT: u64 = 3;
    pub const DADIL_INIT: u64 = 4;
    pub const TOY: u64 = 5;
    /// Per-class EM fits use `FIT_CLASS_BASE + class`.
    pub const FIT_CLASS_BASE: u64 = 1 << 20;
    /// Per-domain inner barycenters in dictionary learning use `DADIL_DOMAIN_BASE + domain`.
    pub const DADIL_DOMAIN_BASE: u64 = 1 << 21;
}

/// Deterministic generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
