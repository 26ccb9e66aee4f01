//! Counter-based random streams.
//!
//! Every random draw in the toolkit comes from a ChaCha stream addressed by
//! `(seed, stream)`. Streams are independent of each other and of the order in
//! which they are consumed, so parallel and sequential runs agree bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Well-known stream identifiers, so unrelated consumers of the same seed do
/// not collide.
pub mod streams {
    pub const INIT: u64 = 1 << 40;
    pub const DATA: u64 = 2 << 40;
    pub const SPLIT: u64 = 3 << 40;
    pub const SHUFFLE: u64 = 4 << 40;
    pub const SEARCH: u64 = 5 << 40;
    pub const SELECTION: u64 = 6 << 40;
    pub const BOOTSTRAP: u64 = 7 << 40;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
