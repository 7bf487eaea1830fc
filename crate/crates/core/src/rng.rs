//! Counter-style random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by
//! `(master seed, stream index)` with the replication index selecting the
//! ChaCha stream. A replication therefore sees the same numbers no matter
//! which worker runs it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named stream indices so that independent uses of one master seed never
/// share numbers.
pub mod streams {
    pub const PATH: u64 = 0;
    pub const ORACLE: u64 = 1;
    pub const POPULATION: u64 = 2;
    pub const MGF: u64 = 3;
    pub const FUZZ: u64 = 4;
    /// Offset added to a grid index when every grid cell needs its own stream.
    pub const GRID_BASE: u64 = 1 << 32;
}

pub fn stream_rng(master: u64, replication: u64, stream: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master.to_le_bytes());
    seed[8..16].copy_from_slice(&stream.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(replication);
    rng
}
