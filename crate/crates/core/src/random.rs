//! Seeded random sampling shared by the estimators and the suites.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::spaces::{lq_norm, Exponent, Space};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 mix of `seed` and a stream index; used to hand independent
/// seeds to trials so results do not depend on scheduling.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Gaussian direction rescaled onto the unit sphere of `ℓ_q`.
pub fn unit_direction(rng: &mut Rng, dim: usize, q: Exponent) -> Vec<f64> {
    loop {
        let g = gaussian(rng, dim);
        let n = lq_norm(&g, q);
        if n > 1e-12 {
            return g.into_iter().map(|v| v / n).collect();
        }
    }
}

pub fn unit_vector(rng: &mut Rng, space: Space) -> Vec<f64> {
    unit_direction(rng, space.dim(), space.exponent())
}

pub fn uniform_index(rng: &mut Rng, n: usize) -> usize {
    rng.random_range(0..n)
}

pub fn coin(rng: &mut Rng) -> bool {
    rng.random::<bool>()
}

/// A random exponent from the menu used by the randomized suites.
pub fn pick_exponent(rng: &mut Rng, menu: &[Exponent]) -> Exponent {
    menu[uniform_index(rng, menu.len())]
}
