//! Sampling helpers on top of any `RngCore`; keeps the core free of a
//! full `rand` dependency.

use alloc::vec::Vec;
use rand_core::RngCore;

/// Uniform on `[0, 1)` with 53 random bits.
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn uniform_in<R: RngCore + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

/// Standard normal by Box-Muller.
pub fn normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// Uniformly distributed unit vector in `R^d`.
pub fn unit_vector<R: RngCore + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Point uniformly distributed in the ball of radius `radius`.
pub fn ball_point<R: RngCore + ?Sized>(rng: &mut R, d: usize, radius: f64) -> Vec<f64> {
    let dir = unit_vector(rng, d);
    let r = radius * libm::pow(uniform(rng), 1.0 / d as f64);
    dir.into_iter().map(|x| r * x).collect()
}
