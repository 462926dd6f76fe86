//! Seeded, split random streams.
//!
//! Every concern draws from its own ChaCha8 stream keyed by the same seed, so
//! turning one knob (say, the burst type) never reshuffles the weights.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Nature = 1,
    Weight = 2,
    Jitter = 3,
    Burst = 4,
    Noise = 5,
    MonteCarlo = 6,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
