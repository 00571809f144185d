//! Counter-based random substreams.
//!
//! Every stochastic unit of work (an electron, a wafer site, a chip) draws
//! from its own ChaCha stream keyed by `(seed, domain, index)`, so results do
//! not depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Disjoint stream families so that, e.g., site 3 and chip 3 never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Electron = 1,
    Site = 2,
    Chip = 3,
    Sampling = 4,
}

pub fn substream(seed: u64, domain: Domain, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (domain as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}
