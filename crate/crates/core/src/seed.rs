//! Reproducible random streams.
//!
//! Every consumer of randomness derives its generator from the single master
//! seed: `ChaCha8Rng::seed_from_u64(master)` with the ChaCha stream id set to
//! `(purpose << 48) | index`. Trial `t` of a simulation always reads stream
//! `(Trial, t)`, so trials can be evaluated in any order or in parallel and
//! still produce identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Code = 1,
    Trial = 2,
    Optimizer = 3,
    Cover = 4,
    Hash = 5,
    Leakage = 6,
}

pub fn stream(master: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    debug_assert!(index < 1 << 48);
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((purpose as u64) << 48) | index);
    rng
}
