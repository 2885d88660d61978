//! Deterministic random streams.
//!
//! Every row update draws from its own ChaCha stream keyed by
//! `(seed, sweep, tag, index)`, so results do not depend on how rows are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Identifies which part of the sampler a stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    Init = 1,
    SweepZ = 2,
    SweepU = 3,
    IbpRow = 4,
    Synth = 5,
    Noise = 6,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Returns the stream for one unit of work.
pub fn stream_rng(seed: u64, sweep: u64, tag: StreamTag, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream = splitmix64(splitmix64(splitmix64(sweep) ^ tag as u64) ^ index);
    rng.set_stream(stream);
    rng
}

/// A family of per-row streams for one sweep.
#[derive(Debug, Clone, Copy)]
pub struct RowStreams {
    pub seed: u64,
    pub sweep: u64,
    pub tag: StreamTag,
}

impl RowStreams {
    pub fn new(seed: u64, sweep: u64, tag: StreamTag) -> Self {
        RowStreams { seed, sweep, tag }
    }

    pub fn row(&self, index: usize) -> StreamRng {
        stream_rng(self.seed, self.sweep, self.tag, index as u64)
    }
}
