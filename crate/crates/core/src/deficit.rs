//! Deficits, distances to the optimizer manifold, the Figalli–Zhang type
//! elementary inequalities, the unified distance `Π_r`, and the nonlinear
//! spectral gap margins.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::conformal::{act_on_sphere_function, halfspace_pushforward, HalfSpaceOptimizer, MobiusTransform};
use crate::extension::Extension;
use crate::math::{pairwise_sum, powf};
use crate::quadrature::{norm, Domain, Field, GridFunction};
use crate::{Dim, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Primal,
    Dual,
}

impl Side {
    pub fn tag(self) -> &'static str {
        match self {
            Side::Primal => "primal",
            Side::Dual => "dual",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeficitReport {
    /// `‖u‖_p` or `‖v‖_{q'}`.
    pub strong_norm: f64,
    /// `‖Qu‖_q` or `‖Sv‖_{p'}`.
    pub ext_norm: f64,
    /// `1 - (ext/strong)^e`, `e = p` resp. `q'`.
    pub deficit: f64,
    pub side: Side,
}

fn nonzero(f: &GridFunction) -> Result<()> {
    if f.values().iter().all(|v| v.abs() < 1e-300) {
        return Err(Error::Domain("function vanishes on the grid"));
    }
    Ok(())
}

/// `1 - ‖Qu‖_q^p / ‖u‖_p^p`.
pub fn deficit_primal(u: &GridFunction, ext: &Extension) -> Result<DeficitReport> {
    if u.grid().domain() != Domain::Sphere {
        return Err(Error::Mismatch("primal deficit takes a sphere function"));
    }
    nonzero(u)?;
    let dim = u.grid().dim();
    let qu = ext.q(u)?;
    let strong = norm(u, dim.p())?;
    let e = norm(&qu, dim.q())?;
    Ok(DeficitReport {
        strong_norm: strong,
        ext_norm: e,
        deficit: 1.0 - powf(e / strong, dim.p()),
        side: Side::Primal,
    })
}

/// `1 - ‖Sv‖_{p'}^{q'} / ‖v‖_{q'}^{q'}`.
pub fn deficit_dual(v: &GridFunction, ext: &Extension) -> Result<DeficitReport> {
    if v.grid().domain() != Domain::Ball {
        return Err(Error::Mismatch("dual deficit takes a ball function"));
    }
    nonzero(v)?;
    let dim = v.grid().dim();
    let sv = ext.s(v)?;
    let strong = norm(v, dim.q_dual())?;
    let e = norm(&sv, dim.p_dual())?;
    Ok(DeficitReport {
        strong_norm: strong,
        ext_norm: e,
        deficit: 1.0 - libm::pow(e / strong, dim.q_dual()),
        side: Side::Dual,
    })
}

/// `(‖1 - λ(u)_T‖_p^p, ‖1 - λ(u)_T‖₂²)`, sampling `(u)_T` directly.
pub fn two_term_distance(u: &GridFunction, lambda: f64, t: &MobiusTransform) -> Result<(f64, f64)> {
    if u.grid().domain() != Domain::Sphere {
        return Err(Error::Mismatch("two-term distance takes a sphere function"));
    }
    let ut = if t.eta().iter().all(|&x| x == 0.0) && t.rotation().is_none() {
        u.clone()
    } else {
        act_on_sphere_function(t, u)?
    };
    let g = u.grid();
    let p = g.dim().p();
    let diff: Vec<f64> = ut.values().iter().map(|v| 1.0 - lambda * v).collect();
    Ok((g.power_sum(&diff, p), g.power_sum(&diff, 2.0)))
}

/// Half-space distance terms
/// `(∫ |f - g|^p dξ, ∫ (f - g)² |g|^{2/(d-2)} dξ)` with `g = f_{a,b,ξ0}`,
/// evaluated on the sphere after pushforward:
/// `(∫ |u_f - u_g|^p dμ, ∫ (u_f - u_g)² |u_g|^{2/(d-2)} dμ)`.
pub fn weighted_halfspace_distance(
    grid: &Arc<crate::quadrature::QuadratureGrid>,
    f: Field,
    opt: &HalfSpaceOptimizer,
) -> Result<(f64, f64)> {
    let uf = halfspace_pushforward(grid, f, None)?;
    let o = opt.clone();
    let ug = halfspace_pushforward(grid, Arc::new(move |xi: &[f64]| o.eval(xi)), None)?;
    let dim = grid.dim();
    let (p, e) = (dim.p(), 2.0 / (dim.f() - 2.0));
    let (a, b) = (uf.values(), ug.values());
    let w = grid.weights();
    let ap = pairwise_sum(a.len(), &|k| w[k] * powf((a[k] - b[k]).abs(), p));
    let aw = pairwise_sum(a.len(), &|k| {
        let d = a[k] - b[k];
        w[k] * d * d * powf(b[k].abs(), e)
    });
    Ok((ap, aw))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementaryKind {
    /// `|1+a|^p >= 1 + pa + p(1-κ)/2 (a² + (p-2)ζ(a)(1-|1+a|)²) + c|a|^p`.
    LowerP,
    /// `|1+a|^q <= 1 + qa + (q(q-1)/2 + κ) a² + C|a|^q`.
    UpperQ,
    /// `|1+a|^{q'} >= 1 + q'a + q'(1-κ)/2 (a² + (q'-2)ζ(a)(1-|1+a|)²) + c min(|a|^{q'}, a²)`.
    LowerQPrime,
    /// `|1+a|^{p'} <= 1 + p'a + (p'(p'-1)/2 + κ) (1+C|a|)^{p'} a²/(1+a²)`.
    UpperPPrime,
    /// The same bound with `(1+C|a|)^{p'-2}` in place of `(1+C|a|)^{p'}`.
    /// Since `p' < 2` the quadratic term then vanishes as `|a| -> ∞` and
    /// convexity of `|1+a|^{p'}` breaks the bound for large `a`, whatever `C`.
    UpperPPrimeLiteral,
}

impl ElementaryKind {
    pub const ALL: [ElementaryKind; 5] = [
        ElementaryKind::LowerP,
        ElementaryKind::UpperQ,
        ElementaryKind::LowerQPrime,
        ElementaryKind::UpperPPrime,
        ElementaryKind::UpperPPrimeLiteral,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ElementaryKind::LowerP => "lower_p",
            ElementaryKind::UpperQ => "upper_q",
            ElementaryKind::LowerQPrime => "lower_qprime",
            ElementaryKind::UpperPPrime => "upper_pprime",
            ElementaryKind::UpperPPrimeLiteral => "upper_pprime_literal",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.tag() == s)
    }

    pub fn is_lower(self) -> bool {
        matches!(self, ElementaryKind::LowerP | ElementaryKind::LowerQPrime)
    }

    fn exponent(self, dim: Dim) -> f64 {
        match self {
            ElementaryKind::LowerP => dim.p(),
            ElementaryKind::UpperQ => dim.q(),
            ElementaryKind::LowerQPrime => dim.q_dual(),
            ElementaryKind::UpperPPrime | ElementaryKind::UpperPPrimeLiteral => dim.p_dual(),
        }
    }
}

/// Primal weight: `|1+a|^{p-1}` on `[-2, 0]`, `1` elsewhere.
pub fn zeta_primal(a: f64, p: f64) -> f64 {
    if (-2.0..=0.0).contains(&a) {
        libm::pow((1.0 + a).abs(), p - 1.0)
    } else {
        1.0
    }
}

/// Dual weight: `1` on `[-2, 0]`, `|1+a|/((2-q')|1+a| + (q'-1))` elsewhere.
pub fn zeta_dual(a: f64, qp: f64) -> f64 {
    if (-2.0..=0.0).contains(&a) {
        1.0
    } else {
        let b = (1.0 + a).abs();
        b / ((2.0 - qp) * b + (qp - 1.0))
    }
}

/// `ζ` selected by the kind's side (upper kinds use the weight of the
/// lower bound on the same side).
pub fn zeta(kind: ElementaryKind, a: f64, dim: Dim) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::Domain("ζ needs a finite argument"));
    }
    Ok(match kind {
        ElementaryKind::LowerP | ElementaryKind::UpperQ => zeta_primal(a, dim.p()),
        _ => zeta_dual(a, dim.q_dual()),
    })
}

/// LHS - RHS oriented so that `>= 0` means the inequality holds at `a`.
pub fn elementary_residual(kind: ElementaryKind, a: f64, kappa: f64, c: f64, dim: Dim) -> Result<f64> {
    if !(kappa > 0.0) || (kind.is_lower() && !(kappa < 1.0)) {
        return Err(Error::Domain(
            "κ must lie in (0, 1) for lower bounds and be positive otherwise",
        ));
    }
    if !(c >= 0.0) || !a.is_finite() {
        return Err(Error::Domain("constant must be nonnegative and a finite"));
    }
    let r = kind.exponent(dim);
    let b = (1.0 + a).abs();
    let lhs = libm::pow(b, r);
    let aa = a.abs();
    Ok(match kind {
        ElementaryKind::LowerP | ElementaryKind::LowerQPrime => {
            let z = zeta(kind, a, dim)?;
            let tail = if kind == ElementaryKind::LowerP {
                libm::pow(aa, r)
            } else {
                libm::pow(aa, r).min(a * a)
            };
            let rhs =
                1.0 + r * a + r * (1.0 - kappa) / 2.0 * (a * a + (r - 2.0) * z * (1.0 - b) * (1.0 - b)) + c * tail;
            lhs - rhs
        }
        ElementaryKind::UpperQ => 1.0 + r * a + (r * (r - 1.0) / 2.0 + kappa) * a * a + c * libm::pow(aa, r) - lhs,
        ElementaryKind::UpperPPrime | ElementaryKind::UpperPPrimeLiteral => {
            let e = if kind == ElementaryKind::UpperPPrime {
                r
            } else {
                r - 2.0
            };
            let k = r * (r - 1.0) / 2.0 + kappa;
            1.0 + r * a + k * libm::pow(1.0 + c * aa, e) * a * a / (1.0 + a * a) - lhs
        }
    })
}

/// Symmetric log-spaced grid: `±10^t` for `t` uniform in
/// `[log10 lo, log10 hi]`, `n` points per sign, plus `-1` and `-2`.
pub fn elementary_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (libm::log10(lo), libm::log10(hi));
    let mut g = Vec::with_capacity(2 * n + 2);
    for i in 0..n {
        let t = a + (b - a) * i as f64 / (n - 1) as f64;
        let x = libm::pow(10.0, t);
        g.push(x);
        g.push(-x);
    }
    g.push(-1.0);
    g.push(-2.0);
    g.sort_by(|x, y| x.partial_cmp(y).unwrap());
    g
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub kind: ElementaryKind,
    pub kappa: f64,
    /// Largest admissible `c` (lower kinds) or smallest admissible `C`
    /// (upper kinds); `None` when no constant works on the grid.
    pub constant: Option<f64>,
    /// Grid point where the constraint is tight.
    pub argmin: f64,
    /// Smallest residual over the grid at the returned constant.
    pub min_residual: f64,
}

/// Best constant for `kind` on the grid `a_grid`.
pub fn calibrate_constant(kind: ElementaryKind, kappa: f64, a_grid: &[f64], dim: Dim) -> Result<Calibration> {
    let pts: Vec<f64> = a_grid.iter().copied().filter(|a| *a != 0.0).collect();
    if pts.is_empty() {
        return Err(Error::Domain("calibration grid has no nonzero points"));
    }
    let r = kind.exponent(dim);
    let min_res = |c: f64| -> Result<(f64, f64)> {
        let mut best = (f64::INFINITY, 0.0);
        for &a in &pts {
            let v = elementary_residual(kind, a, kappa, c, dim)?;
            if v < best.0 {
                best = (v, a);
            }
        }
        Ok(best)
    };
    let constant = match kind {
        ElementaryKind::LowerP | ElementaryKind::LowerQPrime => {
            // residual(c) = R0 - c g with g > 0 away from 0.
            let mut best = (f64::INFINITY, 0.0);
            for &a in &pts {
                let r0 = elementary_residual(kind, a, kappa, 0.0, dim)?;
                let g = if kind == ElementaryKind::LowerP {
                    libm::pow(a.abs(), r)
                } else {
                    libm::pow(a.abs(), r).min(a * a)
                };
                let c = r0 / g;
                if c < best.0 {
                    best = (c, a);
                }
            }
            if best.0 > 0.0 {
                Some(best.0)
            } else {
                None
            }
        }
        ElementaryKind::UpperQ => {
            let mut c: f64 = 0.0;
            for &a in &pts {
                let u0 = elementary_residual(kind, a, kappa, 0.0, dim)?;
                if u0 < 0.0 {
                    c = c.max(-u0 / libm::pow(a.abs(), r));
                }
            }
            Some(c)
        }
        ElementaryKind::UpperPPrime | ElementaryKind::UpperPPrimeLiteral => {
            // Residual is monotone in C: increasing for the corrected form,
            // decreasing for the literal one (whose best choice is C = 0).
            if kind == ElementaryKind::UpperPPrimeLiteral {
                if min_res(0.0)?.0 >= 0.0 {
                    Some(0.0)
                } else {
                    None
                }
            } else if min_res(0.0)?.0 >= 0.0 {
                Some(0.0)
            } else {
                let mut hi = 1.0;
                while min_res(hi)?.0 < 0.0 {
                    hi *= 2.0;
                    if hi > 1e12 {
                        break;
                    }
                }
                if min_res(hi)?.0 < 0.0 {
                    None
                } else {
                    let mut lo = 0.0;
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if min_res(mid)?.0 >= 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                        if hi - lo <= 1e-14 * hi {
                            break;
                        }
                    }
                    Some(hi)
                }
            }
        }
    };
    let (min_residual, argmin) = match constant {
        Some(c) => min_res(c)?,
        None => min_res(0.0)?,
    };
    Ok(Calibration {
        kind,
        kappa,
        constant,
        argmin,
        min_residual,
    })
}

/// `Π_r(f, f*) = (‖f-f*‖_r^r on {|f-f*| > |f*|} + ∫ (f-f*)² |f*|^{r-2} on the rest) / ‖f*‖_r^r`.
pub fn pi_distance(f: &GridFunction, fs: &GridFunction, r: f64) -> Result<f64> {
    let (far, near, denom) = pi_parts(f, fs, r)?;
    Ok((far + near) / denom)
}

fn pi_parts(f: &GridFunction, fs: &GridFunction, r: f64) -> Result<(f64, f64, f64)> {
    if !f.grid().same_as(fs.grid()) {
        return Err(Error::Mismatch("Π_r across grids"));
    }
    if !(r >= 2.0) {
        return Err(Error::Domain("Π_r needs r >= 2"));
    }
    let g = f.grid();
    let w = g.weights();
    let (a, b) = (f.values(), fs.values());
    let denom = g.power_sum(b, r);
    if !(denom > 0.0) {
        return Err(Error::Domain("reference function vanishes on the grid"));
    }
    let far = pairwise_sum(a.len(), &|k| {
        let d = (a[k] - b[k]).abs();
        if d > b[k].abs() {
            w[k] * powf(d, r)
        } else {
            0.0
        }
    });
    let near = pairwise_sum(a.len(), &|k| {
        let d = (a[k] - b[k]).abs();
        if d <= b[k].abs() {
            w[k] * d * d * powf(b[k].abs(), r - 2.0)
        } else {
            0.0
        }
    });
    Ok((far, near, denom))
}

/// `Π_r·‖f*‖_r^r / (‖f-f*‖_r^r + ∫ (f-f*)²|f*|^{r-2})`, which lies in
/// `[1/2, 1]` for every pair.
pub fn pi_equivalence_ratio(f: &GridFunction, fs: &GridFunction, r: f64) -> Result<f64> {
    let (far, near, _) = pi_parts(f, fs, r)?;
    let g = f.grid();
    let diff: Vec<f64> = f.values().iter().zip(fs.values()).map(|(a, b)| a - b).collect();
    let w = g.weights();
    let b = fs.values();
    let full =
        g.power_sum(&diff, r) + pairwise_sum(diff.len(), &|k| w[k] * diff[k] * diff[k] * powf(b[k].abs(), r - 2.0));
    if full == 0.0 {
        return Ok(1.0);
    }
    Ok((far + near) / full)
}

/// `‖φ‖₂² + (p-2)∫ ζ(φ)(1-|1+φ|)² dμ - (p-1)(d+2+λ)/d ‖Qφ‖₂²`.
pub fn nonlinear_gap_margin_primal(phi: &GridFunction, lambda_gap: f64, ext: &Extension) -> Result<f64> {
    let g = phi.grid();
    if g.domain() != Domain::Sphere {
        return Err(Error::Mismatch("primal margin takes a sphere function"));
    }
    let dim = g.dim();
    let (p, d) = (dim.p(), dim.f());
    let v = phi.values();
    let w = g.weights();
    let lhs = pairwise_sum(v.len(), &|k| {
        let b = 1.0 - (1.0 + v[k]).abs();
        w[k] * (v[k] * v[k] + (p - 2.0) * zeta_primal(v[k], p) * b * b)
    });
    let q = ext.q(phi)?;
    let qn = q.grid().power_sum(q.values(), 2.0);
    Ok(lhs - (p - 1.0) * (d + 2.0 + lambda_gap) / d * qn)
}

/// `∫_B (φ² + (q'-2)ζ(φ)(1-|1+φ|)²) dν + γ₀ ∫_B min(|φ|^{q'}, φ²) dν
///  - (q'-1)(d+2+λ)/d ∫_S (1+C|Sφ|)^{p'}/(1+(Sφ)²) (Sφ)² dμ`.
pub fn nonlinear_gap_margin_dual(
    phi: &GridFunction,
    lambda_gap: f64,
    c: f64,
    gamma0: f64,
    ext: &Extension,
) -> Result<f64> {
    let g = phi.grid();
    if g.domain() != Domain::Ball {
        return Err(Error::Mismatch("dual margin takes a ball function"));
    }
    let dim = g.dim();
    let (qp, pp, d) = (dim.q_dual(), dim.p_dual(), dim.f());
    let v = phi.values();
    let w = g.weights();
    let lhs = pairwise_sum(v.len(), &|k| {
        let b = 1.0 - (1.0 + v[k]).abs();
        let a = v[k].abs();
        w[k] * (v[k] * v[k] + (qp - 2.0) * zeta_dual(v[k], qp) * b * b + gamma0 * libm::pow(a, qp).min(a * a))
    });
    let s = ext.s(phi)?;
    let sv = s.values();
    let sw = s.grid().weights();
    let rhs = pairwise_sum(sv.len(), &|k| {
        let x = sv[k];
        sw[k] * libm::pow(1.0 + c * x.abs(), pp) / (1.0 + x * x) * x * x
    });
    Ok(lhs - (qp - 1.0) * (d + 2.0 + lambda_gap) / d * rhs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrthogonalityResiduals {
    /// `∫ r dμ`.
    pub c0: f64,
    /// `∫ ω_i r dμ`.
    pub moments: Vec<f64>,
    /// `‖r‖₂² + ‖r‖_p^p`.
    pub bound: f64,
}

impl OrthogonalityResiduals {
    /// `(|c0| + Σ|c_i|) / (‖r‖₂² + ‖r‖_p^p)`.
    pub fn ratio(&self) -> f64 {
        let s = self.c0.abs() + self.moments.iter().map(|m| m.abs()).sum::<f64>();
        if self.bound == 0.0 {
            if s == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            s / self.bound
        }
    }
}

pub fn orthogonality_residuals(r: &GridFunction) -> Result<OrthogonalityResiduals> {
    let g = r.grid();
    if g.domain() != Domain::Sphere {
        return Err(Error::Mismatch("orthogonality residuals take a sphere function"));
    }
    let v = r.values();
    let w = g.weights();
    let d = g.dim().get();
    let c0 = g.sum(v);
    let moments = (0..d)
        .map(|i| pairwise_sum(v.len(), &|k| w[k] * g.node(k)[i] * v[k]))
        .collect();
    let bound = g.power_sum(v, 2.0) + g.power_sum(v, g.dim().p());
    Ok(OrthogonalityResiduals { c0, moments, bound })
}
