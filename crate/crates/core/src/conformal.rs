//! Moebius transformations of the ball and the sphere, their Jacobians,
//! stereographic maps, and the induced actions on functions.
//!
//! A transformation is stored as `(A, η)` and acts by `A ∘ Φ_η` on the
//! ball and `A ∘ Ψ_η` on the sphere, where
//! `Φ_η(y) = ((1-|η|²)(y-η) - |y-η|² η) / (1 - 2η·y + |η|²|y|²)`.
//! The denominator is evaluated as `|y-η|² + (1-|y|²)(1-|η|²)`, which is
//! the same quantity without the cancellation near `y = η/|η|`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{dist2, norm2, powf};
use crate::quadrature::{Domain, Field, GridFunction};
use crate::{Dim, Error, Result};

/// Unit-length tolerance for sphere inputs.
pub const SPHERE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct MobiusTransform {
    eta: Vec<f64>,
    /// Row-major `d x d` orthogonal matrix; `None` is the identity.
    rotation: Option<Vec<f64>>,
    domain: Domain,
}

impl MobiusTransform {
    pub fn new(eta: Vec<f64>, domain: Domain) -> Result<Self> {
        if eta.len() < 3 {
            return Err(Error::Domain("dimension must be at least 3"));
        }
        if !(norm2(&eta) < 1.0) {
            return Err(Error::Domain("|eta| must be below 1"));
        }
        Ok(MobiusTransform {
            eta,
            rotation: None,
            domain,
        })
    }

    pub fn identity(dim: Dim, domain: Domain) -> Self {
        MobiusTransform {
            eta: vec![0.0; dim.get()],
            rotation: None,
            domain,
        }
    }

    pub fn ball(eta: Vec<f64>) -> Result<Self> {
        Self::new(eta, Domain::Ball)
    }

    pub fn sphere(eta: Vec<f64>) -> Result<Self> {
        Self::new(eta, Domain::Sphere)
    }

    /// Attach a rotation; rejects matrices with `|A Aᵀ - I| > 1e-12`.
    pub fn with_rotation(mut self, a: Vec<f64>) -> Result<Self> {
        let d = self.eta.len();
        if a.len() != d * d {
            return Err(Error::Mismatch("rotation has the wrong size"));
        }
        for i in 0..d {
            for j in 0..d {
                let s: f64 = (0..d).map(|k| a[i * d + k] * a[j * d + k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (s - want).abs() > 1e-12 {
                    return Err(Error::Domain("rotation is not orthogonal"));
                }
            }
        }
        self.rotation = Some(a);
        Ok(self)
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn rotation(&self) -> Option<&[f64]> {
        self.rotation.as_deref()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.eta.len()
    }

    fn rotate(&self, x: &mut [f64]) {
        if let Some(a) = &self.rotation {
            let d = x.len();
            let mut small = [0.0f64; 8];
            let mut big = Vec::new();
            let tmp: &mut [f64] = if d <= 8 {
                &mut small[..d]
            } else {
                big.resize(d, 0.0);
                &mut big
            };
            tmp.copy_from_slice(x);
            for i in 0..d {
                x[i] = (0..d).map(|j| a[i * d + j] * tmp[j]).sum();
            }
        }
    }

    /// `A Φ_η(y)` for `|y| <= 1` without domain checks.
    pub fn apply_unchecked(&self, y: &[f64], out: &mut [f64]) {
        phi_eta(&self.eta, y, out);
        self.rotate(out);
    }

    /// `J_{Φ_η}(y)^{1/d}`; rotations contribute a factor 1.
    #[inline]
    pub fn conformal_factor(&self, y: &[f64]) -> f64 {
        conformal_factor(&self.eta, y)
    }

    /// The inverse `(A Φ_η)^{-1} = Aᵀ Φ_{-Aη}`.
    pub fn inverse(&self) -> Self {
        let d = self.eta.len();
        match &self.rotation {
            None => MobiusTransform {
                eta: self.eta.iter().map(|v| -v).collect(),
                rotation: None,
                domain: self.domain,
            },
            Some(a) => {
                let eta = (0..d)
                    .map(|i| -(0..d).map(|j| a[i * d + j] * self.eta[j]).sum::<f64>())
                    .collect();
                let mut at = vec![0.0; d * d];
                for i in 0..d {
                    for j in 0..d {
                        at[i * d + j] = a[j * d + i];
                    }
                }
                MobiusTransform {
                    eta,
                    rotation: Some(at),
                    domain: self.domain,
                }
            }
        }
    }

    /// `self ∘ other`, brought back to the `(A, η)` form.
    pub fn compose(&self, other: &MobiusTransform) -> Self {
        let d = self.eta.len();
        // η is the preimage of the origin.
        let zero = vec![0.0; d];
        let mut t = vec![0.0; d];
        let mut eta = vec![0.0; d];
        self.inverse().apply_unchecked(&zero, &mut t);
        other.inverse().apply_unchecked(&t, &mut eta);
        // A = (self ∘ other) ∘ Φ_{-η} is linear.
        let back = MobiusTransform {
            eta: eta.iter().map(|v| -v).collect(),
            rotation: None,
            domain: self.domain,
        };
        let mut a = vec![0.0; d * d];
        let mut e = vec![0.0; d];
        let (mut u, mut w) = (vec![0.0; d], vec![0.0; d]);
        for j in 0..d {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 0.5;
            back.apply_unchecked(&e, &mut u);
            other.apply_unchecked(&u, &mut w);
            self.apply_unchecked(&w, &mut u);
            for i in 0..d {
                a[i * d + j] = 2.0 * u[i];
            }
        }
        MobiusTransform {
            eta,
            rotation: Some(a),
            domain: self.domain,
        }
    }
}

/// Calls `f` with `t(x)`, using a stack buffer for small dimensions.
#[inline]
pub fn with_image<R>(t: &MobiusTransform, x: &[f64], f: impl FnOnce(&[f64]) -> R) -> R {
    let d = x.len();
    if d <= 8 {
        let mut buf = [0.0f64; 8];
        t.apply_unchecked(x, &mut buf[..d]);
        f(&buf[..d])
    } else {
        let mut v = vec![0.0; d];
        t.apply_unchecked(x, &mut v);
        f(&v)
    }
}

/// `Φ_η(y)`; on the unit sphere this coincides with `Ψ_η(y)`.
pub fn phi_eta(eta: &[f64], y: &[f64], out: &mut [f64]) {
    let e2 = norm2(eta);
    let dy = dist2(y, eta);
    let den = dy + (1.0 - norm2(y)) * (1.0 - e2);
    let a = (1.0 - e2) / den;
    let b = dy / den;
    for i in 0..y.len() {
        out[i] = a * (y[i] - eta[i]) - b * eta[i];
    }
}

/// `(1 - |η|²) / (|y-η|² + (1-|y|²)(1-|η|²))`, i.e. `J_{Φ_η}(y)^{1/d}`
/// in the ball and `J_{Ψ_η}(ω)^{1/(d-1)}` on the sphere.
#[inline]
pub fn conformal_factor(eta: &[f64], y: &[f64]) -> f64 {
    let e2 = norm2(eta);
    let den = dist2(y, eta) + (1.0 - norm2(y)) * (1.0 - e2);
    (1.0 - e2) / den
}

fn check_ball(y: &[f64]) -> Result<()> {
    if !(norm2(y) < 1.0) {
        return Err(Error::Domain("point is not inside the open ball"));
    }
    Ok(())
}

fn check_sphere(w: &[f64]) -> Result<()> {
    if (libm::sqrt(norm2(w)) - 1.0).abs() > SPHERE_TOL {
        return Err(Error::Domain("point is not on the unit sphere"));
    }
    Ok(())
}

pub fn mobius_ball_apply(t: &MobiusTransform, y: &[f64]) -> Result<Vec<f64>> {
    if t.domain != Domain::Ball {
        return Err(Error::Mismatch("transform is not a ball transform"));
    }
    if y.len() != t.dim() {
        return Err(Error::Mismatch("point has the wrong dimension"));
    }
    check_ball(y)?;
    let mut out = vec![0.0; y.len()];
    t.apply_unchecked(y, &mut out);
    Ok(out)
}

pub fn mobius_sphere_apply(t: &MobiusTransform, w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != t.dim() {
        return Err(Error::Mismatch("point has the wrong dimension"));
    }
    check_sphere(w)?;
    let mut out = vec![0.0; w.len()];
    t.apply_unchecked(w, &mut out);
    let n = libm::sqrt(norm2(&out));
    if (n - 1.0).abs() > SPHERE_TOL {
        return Err(Error::Overflow("image left the sphere"));
    }
    out.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}

pub fn jacobian_ball(t: &MobiusTransform, y: &[f64]) -> Result<f64> {
    check_ball(y)?;
    Ok(powf(t.conformal_factor(y), t.dim() as f64))
}

pub fn jacobian_sphere(t: &MobiusTransform, w: &[f64]) -> Result<f64> {
    check_sphere(w)?;
    Ok(powf(t.conformal_factor(w), t.dim() as f64 - 1.0))
}

/// The Poincare extension of `A Ψ_η` is `A Φ_η`.
pub fn poincare_extend(t: &MobiusTransform) -> MobiusTransform {
    MobiusTransform {
        domain: Domain::Ball,
        ..t.clone()
    }
}

/// `(u)_Ψ = J_Ψ^{(d-2)/(2(d-1))} u∘Ψ`. When `u` carries a closed-form
/// harmonic extension, the result carries `J_Φ^{(d-2)/(2d)} (Qu)∘Φ`.
pub fn act_on_sphere_function(t: &MobiusTransform, u: &GridFunction) -> Result<GridFunction> {
    if u.grid().domain() != Domain::Sphere {
        return Err(Error::Mismatch("expected a sphere function"));
    }
    if u.grid().dim().get() != t.dim() {
        return Err(Error::Mismatch("dimension mismatch"));
    }
    let f = u.evaluator()?;
    let d = t.dim() as f64;
    let e = (d - 2.0) / 2.0;
    let tt = t.clone();
    let closure: Field = Arc::new(move |w: &[f64]| with_image(&tt, w, |v| powf(tt.conformal_factor(w), e) * f(v)));
    let mut out = GridFunction::from_closure(u.grid(), closure);
    if let Some(qu) = u.extension() {
        let qu = qu.clone();
        let tt = t.clone();
        let ext: Field = Arc::new(move |y: &[f64]| with_image(&tt, y, |v| powf(tt.conformal_factor(y), e) * qu(v)));
        out = out.with_extension(ext);
    }
    Ok(out)
}

/// `[v]_Φ = J_Φ^{(d+2)/(2d)} v∘Φ`. When `v` carries a closed-form `Sv`,
/// the result carries `S[v]_Φ = J_Ψ^{1/p'} (Sv)∘Ψ`.
pub fn act_on_ball_function(t: &MobiusTransform, v: &GridFunction) -> Result<GridFunction> {
    if v.grid().domain() != Domain::Ball {
        return Err(Error::Mismatch("expected a ball function"));
    }
    if v.grid().dim().get() != t.dim() {
        return Err(Error::Mismatch("dimension mismatch"));
    }
    let f = v.evaluator()?;
    let d = t.dim() as f64;
    let e = (d + 2.0) / 2.0;
    let tt = t.clone();
    let closure: Field = Arc::new(move |y: &[f64]| with_image(&tt, y, |w| powf(tt.conformal_factor(y), e) * f(w)));
    let mut out = GridFunction::from_closure(v.grid(), closure);
    if let Some(sv) = v.extension() {
        let sv = sv.clone();
        let tt = t.clone();
        // J_Ψ^{1/p'} = (J^{1/(d-1)})^{d/2}.
        let es = d / 2.0;
        let ext: Field = Arc::new(move |w: &[f64]| with_image(&tt, w, |x| powf(tt.conformal_factor(w), es) * sv(x)));
        out = out.with_extension(ext);
    }
    Ok(out)
}

/// Stereographic projection `S: R^{d-1} -> S^{d-1}`, `S(0) = e_d`.
pub fn stereographic(xi: &[f64]) -> Vec<f64> {
    let r2 = norm2(xi);
    if !r2.is_finite() {
        let mut p = vec![0.0; xi.len() + 1];
        p[xi.len()] = -1.0;
        return p;
    }
    let den = 1.0 + r2;
    let mut p: Vec<f64> = xi.iter().map(|v| 2.0 * v / den).collect();
    p.push((1.0 - r2) / den);
    p
}

/// `S^{-1}(ω) = ω'/(1+ω_d)`; `None` at the south pole.
pub fn stereographic_inverse(w: &[f64]) -> Option<Vec<f64>> {
    let d = w.len();
    let den = 1.0 + w[d - 1];
    if den <= 0.0 {
        return None;
    }
    Some(w[..d - 1].iter().map(|v| v / den).collect())
}

/// `J_S(ξ) = (2/(1+|ξ|²))^{d-1}`.
pub fn stereographic_jacobian(xi: &[f64]) -> f64 {
    powf(2.0 / (1.0 + norm2(xi)), xi.len() as f64)
}

/// `Σ(x) = 2(x + e_d)/|x + e_d|² - e_d`, mapping the upper half-space
/// onto the ball.
pub fn sigma(x: &[f64]) -> Result<Vec<f64>> {
    let d = x.len();
    if !(x[d - 1] > 0.0) {
        return Err(Error::Domain("sigma needs x_d > 0"));
    }
    Ok(sigma_raw(x))
}

fn sigma_raw(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut z = x.to_vec();
    z[d - 1] += 1.0;
    let n2 = norm2(&z);
    let mut y: Vec<f64> = z.iter().map(|v| 2.0 * v / n2).collect();
    y[d - 1] -= 1.0;
    y
}

/// Same formula as [`sigma`]: the map is its own inverse up to the
/// interchange of half-space and ball.
pub fn sigma_inverse(y: &[f64]) -> Result<Vec<f64>> {
    check_ball(y)?;
    Ok(sigma_raw(y))
}

/// `J_Σ(x)^{1/d} = 2/|x + e_d|²`.
pub fn sigma_factor(x: &[f64]) -> f64 {
    let d = x.len();
    let mut s = 0.0;
    for (i, v) in x.iter().enumerate() {
        let z = if i == d - 1 { v + 1.0 } else { *v };
        s += z * z;
    }
    2.0 / s
}

/// `f_{a,b,ξ₀}(ξ) = a b^{(d-2)/2} (1 + b²|ξ-ξ₀|²)^{-(d-2)/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpaceOptimizer {
    pub a: f64,
    pub b: f64,
    pub xi0: Vec<f64>,
}

impl HalfSpaceOptimizer {
    pub fn new(a: f64, b: f64, xi0: Vec<f64>) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::Domain("scale b must be positive"));
        }
        if xi0.len() < 2 {
            return Err(Error::Domain("translation needs d-1 >= 2 coordinates"));
        }
        Ok(HalfSpaceOptimizer { a, b, xi0 })
    }

    fn half(&self) -> f64 {
        (self.xi0.len() as f64 - 1.0) / 2.0
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        let h = self.half();
        let r2 = dist2(xi, &self.xi0);
        self.a * libm::pow(self.b, h) * libm::pow(1.0 + self.b * self.b * r2, -h)
    }

    /// Poisson extension `P f_{a,b,ξ₀}(x) = a b^{(d-2)/2} |b(x - (ξ₀,0)) + e_d|^{-(d-2)}`.
    pub fn poisson_extension(&self, x: &[f64]) -> f64 {
        let h = self.half();
        let d = x.len();
        let mut s = 0.0;
        for i in 0..d - 1 {
            let z = self.b * (x[i] - self.xi0[i]);
            s += z * z;
        }
        let z = self.b * x[d - 1] + 1.0;
        s += z * z;
        self.a * libm::pow(self.b, h) * libm::pow(s, -h)
    }
}

/// Pushforward `u = |S^{d-1}|^{1/p} J_{S^{-1}}^{1/p} f∘S^{-1}` onto a
/// sphere grid, with `‖u‖_{L^p(dμ)} = ‖f‖_{L^p(dξ)}`. If `pf` (the
/// half-space Poisson extension of `f`) is given, the result carries the
/// ball extension obtained by transporting `pf` through `Σ`.
pub fn halfspace_pushforward(
    grid: &Arc<crate::quadrature::QuadratureGrid>,
    f: Field,
    pf: Option<Field>,
) -> Result<GridFunction> {
    if grid.domain() != Domain::Sphere {
        return Err(Error::Mismatch("pushforward targets a sphere grid"));
    }
    let dim = grid.dim();
    let dd = dim.f();
    let c = libm::pow(dim.sphere_area(), 1.0 / dim.p());
    let h = (dd - 2.0) / 2.0;
    let ff = f.clone();
    let closure: Field = Arc::new(move |w: &[f64]| {
        let d = w.len();
        let den = 1.0 + w[d - 1];
        if den <= 0.0 {
            return 0.0;
        }
        let xi: Vec<f64> = w[..d - 1].iter().map(|v| v / den).collect();
        c * libm::pow(den, -h) * ff(&xi)
    });
    let u = GridFunction::from_closure(grid, closure);
    if u.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow("pushforward produced non-finite samples"));
    }
    Ok(match pf {
        None => u,
        Some(pf) => {
            let ext: Field = Arc::new(move |y: &[f64]| {
                let x = sigma_raw(y);
                c * libm::pow(sigma_factor(&x), -h) * pf(&x)
            });
            u.with_extension(ext)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureGrid;

    fn e3(t: f64) -> Vec<f64> {
        vec![0.0, 0.0, t]
    }

    #[test]
    fn identity_and_center() {
        let id = MobiusTransform::ball(e3(0.0)).unwrap();
        let y = [0.1, -0.2, 0.3];
        assert_eq!(mobius_ball_apply(&id, &y).unwrap(), y.to_vec());
        let t = MobiusTransform::ball(vec![0.2, 0.1, -0.4]).unwrap();
        let z = mobius_ball_apply(&t, &[0.2, 0.1, -0.4]).unwrap();
        assert!(norm2(&z) < 1e-30);
    }

    #[test]
    fn hand_values() {
        let t = MobiusTransform::ball(e3(0.5)).unwrap();
        let z = mobius_ball_apply(&t, &[0.0, 0.0, 0.0]).unwrap();
        assert!((z[2] + 0.5).abs() < 1e-15 && z[0] == 0.0);
        assert!((jacobian_ball(&t, &[0.0; 3]).unwrap() - 0.421875).abs() < 1e-15);
        let s = MobiusTransform::sphere(e3(0.5)).unwrap();
        let n = mobius_sphere_apply(&s, &[0.0, 0.0, 1.0]).unwrap();
        assert!((n[2] - 1.0).abs() < 1e-15);
        let sp = mobius_sphere_apply(&s, &[0.0, 0.0, -1.0]).unwrap();
        assert!((sp[2] + 1.0).abs() < 1e-15);
        assert!((jacobian_sphere(&s, &[0.0, 0.0, 1.0]).unwrap() - 9.0).abs() < 1e-13);
    }

    #[test]
    fn domain_errors() {
        let t = MobiusTransform::ball(e3(0.5)).unwrap();
        assert!(mobius_ball_apply(&t, &[1.0, 0.0, 0.0]).is_err());
        assert!(mobius_ball_apply(&t, &[0.9, 0.9, 0.0]).is_err());
        assert!(mobius_sphere_apply(&t, &[0.5, 0.0, 0.0]).is_err());
        assert!(MobiusTransform::ball(e3(1.0)).is_err());
        assert!(sigma(&[0.0, 0.0, -0.1]).is_err());
        assert!(HalfSpaceOptimizer::new(1.0, 0.0, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn ball_action_of_one_at_origin() {
        let g =
            Arc::new(QuadratureGrid::ball(4, &QuadratureGrid::sphere(Dim::new(3).unwrap(), 4, 8).unwrap()).unwrap());
        let t = MobiusTransform::ball(e3(0.5)).unwrap();
        let one = GridFunction::constant(&g, 1.0);
        let v = act_on_ball_function(&t, &one).unwrap();
        let at0 = v.eval(&[0.0, 0.0, 0.0]).unwrap();
        assert!((at0 - libm::pow(0.421875, 5.0 / 6.0)).abs() < 1e-14);
        assert!((at0 - 0.48714).abs() < 1e-5);
    }

    #[test]
    fn stereographic_values() {
        assert_eq!(stereographic(&[0.0, 0.0]), vec![0.0, 0.0, 1.0]);
        let far = stereographic(&[1e200, 0.0]);
        assert_eq!(far, vec![0.0, 0.0, -1.0]);
        let big = stereographic(&[1e8, 0.0]);
        assert!((big[2] + 1.0).abs() < 1e-12);
        let s = sigma(&[0.0, 0.0, 1.0]).unwrap();
        assert!(norm2(&s) < 1e-30);
        // Σ on x_d = 0 agrees with S.
        let xi = [0.3, -1.7];
        let a = stereographic(&xi);
        let b = sigma_raw(&[0.3, -1.7, 0.0]);
        assert!(dist2(&a, &b) < 1e-28);
        let back = stereographic_inverse(&a).unwrap();
        assert!(dist2(&back, &xi) < 1e-28);
    }

    #[test]
    fn sigma_is_conformal_with_stated_factor() {
        // |Σ(x) - Σ(x')|² = J^{1/d}(x) |x - x'|² J^{1/d}(x').
        let x = [0.3, -0.2, 0.7];
        let x2 = [-0.1, 0.4, 1.9];
        let lhs = dist2(&sigma_raw(&x), &sigma_raw(&x2));
        let rhs = sigma_factor(&x) * dist2(&x, &x2) * sigma_factor(&x2);
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn amplitude_and_pushforward_to_one() {
        let dim = Dim::new(3).unwrap();
        let a = dim.pushforward_amplitude();
        assert!((a - libm::sqrt(2.0) * libm::pow(4.0 * core::f64::consts::PI, -0.25)).abs() < 1e-15);
        let g = Arc::new(QuadratureGrid::sphere(dim, 8, 16).unwrap());
        let opt = HalfSpaceOptimizer::new(a, 1.0, vec![0.0, 0.0]).unwrap();
        let o = opt.clone();
        let u = halfspace_pushforward(&g, Arc::new(move |x: &[f64]| o.eval(x)), None).unwrap();
        assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-13));
        let o2 = HalfSpaceOptimizer::new(2.0 * a, 1.0, vec![0.0, 0.0]).unwrap();
        let u2 = halfspace_pushforward(&g, Arc::new(move |x: &[f64]| o2.eval(x)), None).unwrap();
        assert!(u2.values().iter().all(|v| (v - 2.0).abs() < 1e-13));
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let t = MobiusTransform::ball(vec![0.3, -0.4, 0.2]).unwrap();
        let c = t.compose(&t.inverse());
        let y = [0.1, 0.5, -0.3];
        let mut o = vec![0.0; 3];
        c.apply_unchecked(&y, &mut o);
        assert!(dist2(&o, &y) < 1e-26);
    }
}
