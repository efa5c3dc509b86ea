//! Numerical core for the harmonic extension inequality on the unit ball
//! and its dual: quadrature on `S^{d-1}` and `B^d`, Moebius actions, the
//! Poisson extension `Q` and its adjoint `S`, deficit and distance
//! functionals, and the searches over the conformal group.
//!
//! The crate is `no_std` and needs only `alloc`; floating point special
//! functions come from `libm`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod conformal;
pub mod deficit;
pub mod experiments;
pub mod extension;
pub mod harmonics;
pub mod linalg;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod search;

mod error;
mod math;

pub use error::{Error, Result};

/// Ambient dimension `d` of the ball `B^d` (the sphere is `S^{d-1}`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dim(usize);

impl Dim {
    pub fn new(d: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::Domain("dimension must be at least 3"));
        }
        Ok(Dim(d))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    #[inline]
    pub fn f(self) -> f64 {
        self.0 as f64
    }

    /// `p = 2(d-1)/(d-2)`, the boundary exponent.
    pub fn p(self) -> f64 {
        2.0 * (self.f() - 1.0) / (self.f() - 2.0)
    }

    /// `q = 2d/(d-2)`, the interior exponent.
    pub fn q(self) -> f64 {
        2.0 * self.f() / (self.f() - 2.0)
    }

    /// `p' = 2(d-1)/d`.
    pub fn p_dual(self) -> f64 {
        2.0 * (self.f() - 1.0) / self.f()
    }

    /// `q' = 2d/(d+2)`.
    pub fn q_dual(self) -> f64 {
        2.0 * self.f() / (self.f() + 2.0)
    }

    /// Surface area `|S^{d-1}|`.
    pub fn sphere_area(self) -> f64 {
        let h = self.f() / 2.0;
        2.0 * libm::pow(core::f64::consts::PI, h) / libm::tgamma(h)
    }

    /// `C_d = (d^{d-1} |S^{d-1}|)^{1/d}`.
    pub fn sharp_constant(self) -> f64 {
        let d = self.f();
        libm::pow(libm::pow(d, d - 1.0) * self.sphere_area(), 1.0 / d)
    }

    /// `C'_d = C_d^{d(d-2)/((d+2)(d-1))}`.
    pub fn sharp_constant_dual(self) -> f64 {
        let d = self.f();
        libm::pow(self.sharp_constant(), d * (d - 2.0) / ((d + 2.0) * (d - 1.0)))
    }

    /// Amplitude `a* = 2^{(d-2)/2} |S^{d-1}|^{-1/p}` for which the
    /// half-space optimizer `f_{a*,1,0}` pushes forward to the constant 1.
    pub fn pushforward_amplitude(self) -> f64 {
        libm::pow(2.0, (self.f() - 2.0) / 2.0) * libm::pow(self.sphere_area(), -1.0 / self.p())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponents_for_three() {
        let d = Dim::new(3).unwrap();
        assert_eq!(d.p(), 4.0);
        assert_eq!(d.q(), 6.0);
        assert!((d.p_dual() - 4.0 / 3.0).abs() < 1e-15);
        assert!((d.q_dual() - 1.2).abs() < 1e-15);
    }

    #[test]
    fn constants_for_three() {
        let d = Dim::new(3).unwrap();
        let c3 = libm::cbrt(36.0 * core::f64::consts::PI);
        assert!((d.sharp_constant() - c3).abs() < 1e-12);
        assert!((d.sharp_constant() - 4.835976).abs() < 1e-5);
        assert!((d.pushforward_amplitude() - 0.751126).abs() < 1e-5);
        assert!((d.sphere_area() - 4.0 * core::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_low_dimension() {
        assert!(Dim::new(2).is_err());
    }
}
