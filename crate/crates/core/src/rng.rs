//! Named, independent random streams derived from one global seed.
//!
//! Every stochastic component draws from its own stream so that turning one
//! strategy off does not shift the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags. The numeric values are part of the reproducibility contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    EdgeMask = 2,
    AttributeMask = 3,
    Walks = 4,
    SkipGram = 5,
    Splits = 6,
    KMeans = 7,
    NonEdges = 8,
    Synthetic = 9,
    Probe = 10,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the generator for `(seed, stream, index)`; `index` separates
/// epochs, metapaths or start nodes within one stream.
pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> Rng {
    let mixed = splitmix64(seed ^ splitmix64((stream as u64) << 32 ^ splitmix64(index)));
    ChaCha8Rng::seed_from_u64(mixed)
}
