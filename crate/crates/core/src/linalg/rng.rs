//! Seeded random streams.
//!
//! Every random draw in the crate goes through [`seeded_rng`], a ChaCha20
//! stream keyed by a 64-bit seed. ChaCha20 output is specified independently
//! of the host platform, so a seed reproduces the same bits everywhere.
//! Gaussian draws use the ziggurat `StandardNormal` transform from `rand_distr`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type SeededRng = ChaCha20Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Derives an independent seed for a named sub-stream, so that e.g. the
/// training data and evaluation data of one config never share draws.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `n` independent standard-normal draws from the stream keyed by `seed`.
pub fn seeded_gaussian_vector(n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("seeded_gaussian_vector needs n >= 1"));
    }
    let mut rng = seeded_rng(seed);
    Ok((0..n).map(|_| standard_normal(&mut rng)).collect())
}
