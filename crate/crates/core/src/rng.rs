//! Counter-addressed random streams.
//!
//! All randomness comes from ChaCha8 keyed by a 64-bit seed. A stream is
//! selected by the ChaCha stream id and a draw is addressed by its counter,
//! so the value drawn for `(seed, stream, counter)` never depends on how
//! many other draws happened before it. Uniform floats use the 53-bit
//! `[0, 1)` conversion from `rand`'s `Standard` distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 32-bit words reserved per counter slot; each `f64` draw uses two.
const WORDS_PER_SLOT: u128 = 16;

/// Maximum number of `f64` draws available at one counter.
pub const DRAWS_PER_SLOT: usize = 8;

/// Stream-id domains so unrelated consumers of one seed never overlap.
pub mod domain {
    pub const ENVELOPE: u64 = 0;
    pub const EVAL_INFLIGHT: u64 = 1;
    pub const EVAL_START: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const INIT: u64 = 4;
    pub const EXTRACTOR: u64 = 5;
    pub const WORLD: u64 = 6;
    pub const TEST_PATHS: u64 = 7;
}

/// Packs a domain tag and two indices into a ChaCha stream id.
pub fn stream_id(domain: u64, major: u32, minor: u32) -> u64 {
    debug_assert!(domain < 256);
    (domain << 56) ^ ((major as u64) << 24) ^ (minor as u64)
}

/// A keyed stream supporting random access by counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Substream {
    pub seed: u64,
    pub stream: u64,
}

impl Substream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// A generator positioned at the start of slot `counter`.
    pub fn at(&self, counter: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(counter as u128 * WORDS_PER_SLOT);
        rng
    }

    /// The first `N` uniform `[0, 1)` draws of slot `counter`.
    pub fn uniforms<const N: usize>(&self, counter: u64) -> [f64; N] {
        assert!(N <= DRAWS_PER_SLOT);
        let mut rng = self.at(counter);
        core::array::from_fn(|_| rng.gen::<f64>())
    }

    /// A sequential generator for bulk draws (initialisation, shuffling).
    pub fn sequential(&self) -> ChaCha8Rng {
        self.at(0)
    }
}

/// Maps a `[0, 1)` draw to `[-half_width, half_width)`; exactly zero when
/// `half_width` is zero.
pub fn symmetric(u: f64, half_width: f64) -> f64 {
    if half_width == 0.0 {
        0.0
    } else {
        half_width * (2.0 * u - 1.0)
    }
}

/// Maps a `[0, 1)` draw to `[lo, hi)`.
pub fn in_range(u: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * u
}
