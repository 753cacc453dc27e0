//! Seeded randomness.
//!
//! Every random decision in the crate draws from ChaCha8 (`rand_chacha::ChaCha8Rng`),
//! seeded with `seed_from_u64(seed)` and then moved onto a fixed stream id per
//! pipeline stage. ChaCha output is specified independently of platform and word
//! size, so a (seed, stage) pair replays identically everywhere. Separate streams
//! mean that changing how much one stage samples never shifts another stage's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Pipeline stages that own an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Generator = 1,
    AnchorRetention = 2,
    NegativeCap = 3,
    TargetSubsample = 4,
    Folds = 5,
    Training = 6,
}

/// RNG for `stage` under `seed`. `sub` distinguishes repeated uses within a stage
/// (e.g. one training run per fold).
pub fn stream(seed: u64, stage: Stage, sub: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stage as u64) << 32) | (sub & 0xffff_ffff));
    rng
}

/// Number of items kept when sampling `fraction` of `m`: `ceil(fraction * m)`,
/// guarded against float noise (0.3 * 10 keeps 3, not 4).
pub fn fraction_count(fraction: f64, m: usize) -> usize {
    let raw = fraction * m as f64;
    let guarded = raw - 1e-9 * raw.max(1.0);
    (guarded.ceil().max(0.0) as usize).min(m)
}
