//! Optimality families, log-log slope fits, and random test ensembles.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use rand_core::RngCore;

use crate::conformal::{act_on_ball_function, act_on_sphere_function, MobiusTransform};
use crate::deficit::{deficit_dual, deficit_primal};
use crate::extension::Extension;
use crate::harmonics::{project_low, zonal, ZonalHarmonic};
use crate::math::powf;
use crate::quadrature::{norm, Domain, Field, GradedOptions, GridFunction, QuadratureGrid};
use crate::rng::{normal, unit_vector};
use crate::search::{min_distance_dual, min_distance_primal, DistanceMode};
use crate::{Dim, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub range: (f64, f64),
    pub n_points: usize,
}

/// Least-squares line through `(log x, log y)`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::Mismatch("xs and ys differ in length"));
    }
    if xs.len() < 5 {
        return Err(Error::Domain("slope fit needs at least 5 points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("slope fit needs positive finite data"));
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| libm::log(*x)).collect();
    let ly: Vec<f64> = ys.iter().map(|y| libm::log(*y)).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("slope fit needs distinct abscissae"));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SlopeFit {
        exponent: b,
        intercept: a,
        r_squared: r2,
        range: (lo, hi),
        n_points: xs.len(),
    })
}

/// `n` geometrically spaced points from `lo` to `hi` (both included).
pub fn geometric_schedule(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::Domain("schedule needs 0 < lo < hi and at least 2 points"));
    }
    let r = libm::pow(hi / lo, 1.0 / (n - 1) as f64);
    Ok((0..n).map(|i| lo * libm::pow(r, i as f64)).collect())
}

/// `‖f‖_r = 1` rescaling, keeping closures and extensions.
pub fn normalize(f: &GridFunction, r: f64) -> Result<GridFunction> {
    let n = norm(f, r)?;
    if !(n > 0.0) {
        return Err(Error::Domain("cannot normalize a vanishing function"));
    }
    Ok(f.scaled(1.0 / n))
}

/// `u_ε = λ_ε (1 + εφ)` with `‖u_ε‖_p = 1`; `φ` must be orthogonal to
/// affine functions to `1e-10`.
pub fn family_quadratic(eps: f64, phi: &GridFunction) -> Result<GridFunction> {
    let g = phi.grid();
    if g.domain() != Domain::Sphere {
        return Err(Error::Mismatch("the quadratic family lives on the sphere"));
    }
    let (low, _) = project_low(phi)?;
    let worst = low.moments.iter().fold(low.mean.abs(), |m, x| m.max(x.abs()));
    if worst > 1e-10 {
        return Err(Error::Hypothesis("φ is not orthogonal to affine functions", worst));
    }
    let u = GridFunction::constant(g, 1.0).plus(&phi.scaled(eps))?;
    normalize(&u, g.dim().p())
}

/// `p(p-1)/2 (‖φ‖₂² - (q-1)/(p-1) ‖Qφ‖₂²)`, the `ε²` coefficient of the
/// deficit along the quadratic family (with `‖u_ε‖_p = 1`).
pub fn quadratic_coefficient(dim: Dim, phi_norm2: f64, qphi_norm2: f64) -> f64 {
    let (p, q) = (dim.p(), dim.q());
    p * (p - 1.0) / 2.0 * (phi_norm2 - (q - 1.0) / (p - 1.0) * qphi_norm2)
}

/// A bubble family member with the grids it was built on.
#[derive(Clone, Debug)]
pub struct FamilyMember {
    pub function: GridFunction,
    pub eta: Vec<f64>,
    pub extension: Extension,
}

/// Coupling and `δ` window for the primal bubble sweep. With coupling 6
/// the bubble is narrow enough that the mixed term is `o(δ^p)` already
/// at `δ ≈ 0.02`.
pub const PRIMAL_BUBBLE_COUPLING: f64 = 6.0;
pub const PRIMAL_BUBBLE_WINDOW: (f64, f64) = (0.02, 0.2);
pub const DUAL_BUBBLE_COUPLING: f64 = 3.0;
pub const DUAL_BUBBLE_WINDOW: (f64, f64) = (1e-4, 1e-2);

/// `1 - |η|` for the coupling `δ^coupling`, refusing values below `1e-12`.
pub fn coupled_gap(delta: f64, coupling: f64) -> Result<f64> {
    if !(coupling > 1.0) {
        return Err(Error::Domain("coupling exponent must exceed 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain("δ must lie in (0, 1)"));
    }
    let gap = libm::pow(delta, coupling);
    if gap < 1e-12 {
        return Err(Error::Resolution("bubble narrower than the grading can resolve"));
    }
    Ok(gap)
}

/// Smallest panel width used for a bubble of width `gap`: eight panels
/// of 16 nodes span the half-width region.
pub fn bubble_panel(gap: f64) -> f64 {
    (gap / 8.0).min(0.05)
}

fn zonal_grids(dim: Dim, gap: f64) -> Result<(Arc<QuadratureGrid>, Arc<QuadratureGrid>)> {
    let opts = GradedOptions::default();
    let h0 = bubble_panel(gap);
    let s = Arc::new(QuadratureGrid::sphere_zonal_graded(dim, h0, opts)?);
    let b = Arc::new(QuadratureGrid::ball_zonal_graded(dim, h0, opts)?);
    Ok((s, b))
}

/// `u = λ(1 + δ(1)_{Ψ_η})`, `η = (1 - δ^coupling) e_d`, `‖u‖_p = 1`, on
/// zonal grids graded toward the bubble.
pub fn family_primal_p(dim: Dim, delta: f64, coupling: f64) -> Result<FamilyMember> {
    let d = dim.get();
    let (s, b) = if delta == 0.0 {
        zonal_grids(dim, 1.0)?
    } else {
        zonal_grids(dim, coupled_gap(delta, coupling)?)?
    };
    let mut eta = vec![0.0; d];
    let one = GridFunction::constant(&s, 1.0);
    let u = if delta == 0.0 {
        one
    } else {
        eta[d - 1] = 1.0 - coupled_gap(delta, coupling)?;
        let t = MobiusTransform::sphere(eta.clone())?;
        one.plus(&act_on_sphere_function(&t, &one)?.scaled(delta))?
    };
    Ok(FamilyMember {
        function: normalize(&u, dim.p())?,
        eta,
        extension: Extension::closed_form(s, b),
    })
}

/// `v = λ(1 + δ[1]_{Φ_η})`, `η = (1 - δ^coupling) e_d`, `‖v‖_{q'} = 1`.
pub fn family_dual(dim: Dim, delta: f64, coupling: f64) -> Result<FamilyMember> {
    let d = dim.get();
    let (s, b) = if delta == 0.0 {
        zonal_grids(dim, 1.0)?
    } else {
        zonal_grids(dim, coupled_gap(delta, coupling)?)?
    };
    let mut eta = vec![0.0; d];
    let one = GridFunction::constant(&b, 1.0);
    let v = if delta == 0.0 {
        one
    } else {
        eta[d - 1] = 1.0 - coupled_gap(delta, coupling)?;
        let t = MobiusTransform::ball(eta.clone())?;
        one.plus(&act_on_ball_function(&t, &one)?.scaled(delta))?
    };
    Ok(FamilyMember {
        function: normalize(&v, dim.q_dual())?,
        eta,
        extension: Extension::closed_form(s, b),
    })
}

/// One sweep row; the column meaning per family is documented with the
/// CSV schema.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub parameter: f64,
    pub deficit: f64,
    pub distance_p: f64,
    pub distance_2: f64,
    pub quotient: f64,
}

/// Quadratic family on a fixed extension: `distance_p`, `distance_2` are
/// the two terms of the minimized two-term distance and `quotient` is
/// `deficit/(distance_p + distance_2)`.
pub fn sweep_quadratic(ext: &Extension, phi: &GridFunction, schedule: &[f64]) -> Result<Vec<SweepRow>> {
    schedule
        .iter()
        .map(|&eps| {
            let u = family_quadratic(eps, phi)?;
            let def = deficit_primal(&u, ext)?.deficit;
            let r = min_distance_primal(&u, DistanceMode::TwoTerm)?;
            let (a, b) = (r.value_p.unwrap_or(0.0), r.value_2.unwrap_or(0.0));
            Ok(SweepRow {
                parameter: eps,
                deficit: def,
                distance_p: a,
                distance_2: b,
                quotient: def / (a + b),
            })
        })
        .collect()
}

/// Primal bubble family: `quotient = deficit/distance_p` (matching power).
pub fn sweep_primal_p(dim: Dim, schedule: &[f64], coupling: f64) -> Result<Vec<SweepRow>> {
    schedule
        .iter()
        .map(|&delta| {
            let m = family_primal_p(dim, delta, coupling)?;
            let def = deficit_primal(&m.function, &m.extension)?.deficit;
            let r = min_distance_primal(&m.function, DistanceMode::TwoTerm)?;
            let (a, b) = (r.value_p.unwrap_or(0.0), r.value_2.unwrap_or(0.0));
            Ok(SweepRow {
                parameter: delta,
                deficit: def,
                distance_p: a,
                distance_2: b,
                quotient: def / a,
            })
        })
        .collect()
}

/// Dual bubble family: `distance_p = ‖1 - λ[v]_Φ‖_{q'}^{q'}`,
/// `distance_2 = ‖1 - λ[v]_Φ‖_{q'}²`, `quotient = deficit/distance_p`.
pub fn sweep_dual(dim: Dim, schedule: &[f64], coupling: f64) -> Result<Vec<SweepRow>> {
    schedule
        .iter()
        .map(|&delta| {
            let m = family_dual(dim, delta, coupling)?;
            let def = deficit_dual(&m.function, &m.extension)?.deficit;
            let r = min_distance_dual(&m.function)?;
            let a = r.value_qprime.unwrap_or(0.0);
            Ok(SweepRow {
                parameter: delta,
                deficit: def,
                distance_p: a,
                distance_2: r.distance(),
                quotient: def / a,
            })
        })
        .collect()
}

/// `c r^{ℓ+2m} Y_ℓ(ŷ)` on the ball; on the sphere `c Y_ℓ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTerm {
    pub coef: f64,
    pub radial: usize,
    pub harmonic: ZonalHarmonic,
}

/// Finite sum of zonal terms with closed-form `Q` (sphere view) and `S`
/// (ball view): `Q(c Y_ℓ) = c r^ℓ Y_ℓ`, `S(c r^{ℓ+2m} Y_ℓ) = c d/(2ℓ+2m+d) Y_ℓ`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicSeries {
    pub dim: Dim,
    pub terms: Vec<SeriesTerm>,
}

impl HarmonicSeries {
    pub fn new(dim: Dim) -> Self {
        HarmonicSeries { dim, terms: Vec::new() }
    }

    pub fn push(&mut self, coef: f64, l: usize, m: usize, axis: &[f64]) -> Result<()> {
        self.terms.push(SeriesTerm {
            coef,
            radial: m,
            harmonic: zonal(l, axis, self.dim)?,
        });
        Ok(())
    }

    pub fn eval_sphere(&self, w: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.coef * t.harmonic.eval(w)).sum()
    }

    pub fn eval_harmonic_extension(&self, y: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.coef * t.harmonic.eval_solid(y)).sum()
    }

    pub fn eval_ball(&self, y: &[f64]) -> f64 {
        let r2: f64 = y.iter().map(|x| x * x).sum();
        self.terms
            .iter()
            .map(|t| t.coef * powf(r2, t.radial as f64) * t.harmonic.eval_solid(y))
            .sum()
    }

    pub fn eval_dual_extension(&self, w: &[f64]) -> f64 {
        let d = self.dim.f();
        self.terms
            .iter()
            .map(|t| t.coef * d / (2.0 * (t.harmonic.degree + t.radial) as f64 + d) * t.harmonic.eval(w))
            .sum()
    }

    /// Sphere samples carrying `Q`.
    pub fn on_sphere(&self, grid: &Arc<QuadratureGrid>) -> GridFunction {
        let (a, b) = (self.clone(), self.clone());
        let f: Field = Arc::new(move |w: &[f64]| a.eval_sphere(w));
        let e: Field = Arc::new(move |y: &[f64]| b.eval_harmonic_extension(y));
        GridFunction::from_closure(grid, f).with_extension(e)
    }

    /// Ball samples carrying `S`.
    pub fn on_ball(&self, grid: &Arc<QuadratureGrid>) -> GridFunction {
        let (a, b) = (self.clone(), self.clone());
        let f: Field = Arc::new(move |y: &[f64]| a.eval_ball(y));
        let e: Field = Arc::new(move |w: &[f64]| b.eval_dual_extension(w));
        GridFunction::from_closure(grid, f).with_extension(e)
    }

    /// Remove the `L²(ν)` projection onto `span{1, y_i}` exactly: each
    /// `r^{2m}` term loses its mean `d/(2m+d)`, each `r^{1+2m} Y_1` term
    /// loses `(d+2)/(d+2+2m) r Y_1`.
    pub fn orthogonalize_affine_ball(&mut self) -> Result<()> {
        let d = self.dim.f();
        let mut extra = Vec::new();
        let mut kept = Vec::new();
        for t in self.terms.drain(..) {
            match (t.harmonic.degree, t.radial) {
                (0, 0) | (1, 0) => {}
                (0, m) => {
                    let c = t.coef * t.harmonic.norm_const * d / (2.0 * m as f64 + d);
                    extra.push((-c, 0usize, t.harmonic.axis.clone()));
                    kept.push(t);
                }
                (1, m) => {
                    let c = t.coef * (d + 2.0) / (d + 2.0 + 2.0 * m as f64);
                    extra.push((-c, 1usize, t.harmonic.axis.clone()));
                    kept.push(t);
                }
                _ => kept.push(t),
            }
        }
        self.terms = kept;
        for (c, l, axis) in extra {
            let h = zonal(l, &axis, self.dim)?;
            // Degree 0 coefficients are stored against the normalized constant.
            let coef = if l == 0 { c / h.norm_const } else { c };
            self.terms.push(SeriesTerm {
                coef,
                radial: 0,
                harmonic: h,
            });
        }
        Ok(())
    }
}

/// Random sphere series: degrees `lo..=hi`, `axes` random axes per degree,
/// normal coefficients scaled by `amplitude`.
pub fn random_sphere_series<R: RngCore + ?Sized>(
    rng: &mut R,
    dim: Dim,
    degrees: (usize, usize),
    axes: usize,
    amplitude: f64,
) -> Result<HarmonicSeries> {
    let mut s = HarmonicSeries::new(dim);
    for l in degrees.0..=degrees.1 {
        for _ in 0..axes {
            let a = unit_vector(rng, dim.get());
            s.push(amplitude * normal(rng), l, 0, &a)?;
        }
    }
    Ok(s)
}

/// Random ball series with radial powers `m <= max_radial`.
pub fn random_ball_series<R: RngCore + ?Sized>(
    rng: &mut R,
    dim: Dim,
    max_degree: usize,
    max_radial: usize,
    amplitude: f64,
) -> Result<HarmonicSeries> {
    let mut s = HarmonicSeries::new(dim);
    for l in 0..=max_degree {
        for m in 0..=max_radial {
            let a = unit_vector(rng, dim.get());
            s.push(amplitude * normal(rng), l, m, &a)?;
        }
    }
    Ok(s)
}

/// `1 + series` helper.
pub fn with_constant(mut s: HarmonicSeries, c: f64) -> Result<HarmonicSeries> {
    let d = s.dim.get();
    let mut axis = vec![0.0; d];
    axis[d - 1] = 1.0;
    let h = zonal(0, &axis, s.dim)?;
    s.terms.push(SeriesTerm {
        coef: c / h.norm_const,
        radial: 0,
        harmonic: h,
    });
    Ok(s)
}
