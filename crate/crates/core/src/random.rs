//! Seed derivation and complex Gaussian sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{CMat, C64};

/// Deterministic generator used for every random draw in the crate.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed from a parent seed and a tag.
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    splitmix(splitmix(parent) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Circularly-symmetric complex Gaussian with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

pub fn complex_gaussian_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_gaussian(rng, variance))
}

pub fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(0.0..std::f64::consts::TAU)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_tag() {
        let a = derive_seed(7, 1);
        let b = derive_seed(7, 2);
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(7, 1));
    }

    #[test]
    fn gaussian_variance() {
        let mut rng = rng_from_seed(3);
        let n = 200_000;
        let p: f64 = (0..n).map(|_| complex_gaussian(&mut rng, 0.5).norm_sqr()).sum::<f64>() / n as f64;
        assert!((p - 0.5).abs() < 0.01, "{p}");
    }
}
