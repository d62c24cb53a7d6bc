//! Seeded random streams for the simulations.
//!
//! The generator is ChaCha8 (`rand_chacha::ChaCha8Rng`). Every Monte Carlo
//! run gets its own substream whose seed is the master seed mixed with the
//! run index through SplitMix64, so runs are reproducible in isolation and
//! independent of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Independent stream for run `index` under `master_seed`.
pub fn substream(master_seed: u64, index: u64) -> SimRng {
    seeded(splitmix64(
        splitmix64(master_seed) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93),
    ))
}

/// Standard normal draw by the basic Box–Muller transform.
///
/// Always consumes exactly two uniforms and keeps the cosine branch only.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // 1 - U maps [0, 1) onto (0, 1], keeping the logarithm finite
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
