//! Zonal spherical harmonics via Gegenbauer polynomials and the projection
//! onto harmonics of degree at most one.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::math::{dot, powf};
use crate::quadrature::{Domain, Field, GaussRule, GridFunction};
use crate::{Dim, Error, Result};

/// Highest degree accepted by [`zonal`].
pub const MAX_DEGREE: usize = 32;

/// `C_ℓ^λ(t)` by the three-term recurrence.
pub fn gegenbauer(l: usize, lam: f64, t: f64) -> f64 {
    let (mut c0, mut c1) = (1.0, 2.0 * lam * t);
    if l == 0 {
        return c0;
    }
    for n in 2..=l {
        let nf = n as f64;
        let c2 = (2.0 * t * (nf + lam - 1.0) * c1 - (nf + 2.0 * lam - 2.0) * c0) / nf;
        c0 = c1;
        c1 = c2;
    }
    c1
}

/// Fills `out[ℓ] = Z_ℓ(t) = (2ℓ+d-2)/(d-2) C_ℓ^{(d-2)/2}(t)` for
/// `ℓ = 0..out.len()`: the reproducing kernel of degree-`ℓ` harmonics with
/// respect to `dμ`, so `Z_ℓ(1)` is the dimension of that space.
pub fn zonal_kernels(d: usize, t: f64, out: &mut [f64]) {
    let lam = (d as f64 - 2.0) / 2.0;
    let (mut c0, mut c1) = (1.0, 2.0 * lam * t);
    for (l, o) in out.iter_mut().enumerate() {
        let c = match l {
            0 => c0,
            1 => c1,
            _ => {
                let nf = l as f64;
                let c2 = (2.0 * t * (nf + lam - 1.0) * c1 - (nf + 2.0 * lam - 2.0) * c0) / nf;
                c0 = c1;
                c1 = c2;
                c2
            }
        };
        *o = (2.0 * l as f64 + 2.0 * lam) / (2.0 * lam) * c;
    }
}

/// `Y_ℓ(ω) = c C_ℓ^{(d-2)/2}(axis·ω)` with `c` chosen so that `∫ Y_ℓ² dμ = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZonalHarmonic {
    pub degree: usize,
    pub axis: Vec<f64>,
    pub norm_const: f64,
}

/// Normalized zonal harmonic of degree `l` about `axis`.
pub fn zonal(l: usize, axis: &[f64], dim: Dim) -> Result<ZonalHarmonic> {
    if l > MAX_DEGREE {
        return Err(Error::Domain("zonal degree above the supported cap"));
    }
    if axis.len() != dim.get() {
        return Err(Error::Mismatch("axis has the wrong dimension"));
    }
    let n = libm::sqrt(dot(axis, axis));
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::Domain("axis must be a unit vector"));
    }
    let lam = (dim.f() - 2.0) / 2.0;
    // The marginal of ω·axis under dμ has density ∝ (1-t²)^{(d-3)/2}.
    let rule = GaussRule::gegenbauer(l + 2, lam)?;
    let m2: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| {
            let c = gegenbauer(l, lam, t);
            w * c * c
        })
        .sum();
    Ok(ZonalHarmonic {
        degree: l,
        axis: axis.iter().map(|v| v / n).collect(),
        norm_const: 1.0 / libm::sqrt(m2),
    })
}

impl ZonalHarmonic {
    fn lam(&self) -> f64 {
        (self.axis.len() as f64 - 2.0) / 2.0
    }

    pub fn eval(&self, w: &[f64]) -> f64 {
        self.norm_const * gegenbauer(self.degree, self.lam(), dot(&self.axis, w))
    }

    /// `|y|^ℓ Y_ℓ(y/|y|)`, the harmonic extension.
    pub fn eval_solid(&self, y: &[f64]) -> f64 {
        let r = libm::sqrt(dot(y, y));
        if r == 0.0 {
            return if self.degree == 0 { self.norm_const } else { 0.0 };
        }
        let t = dot(&self.axis, y) / r;
        powf(r, self.degree as f64) * self.norm_const * gegenbauer(self.degree, self.lam(), t)
    }

    pub fn field(&self) -> Field {
        let z = self.clone();
        Arc::new(move |w: &[f64]| z.eval(w))
    }

    pub fn solid_field(&self) -> Field {
        let z = self.clone();
        Arc::new(move |y: &[f64]| z.eval_solid(y))
    }

    /// Samples on a sphere grid, carrying the closed-form extension.
    pub fn on_sphere(&self, grid: &Arc<crate::quadrature::QuadratureGrid>) -> Result<GridFunction> {
        if grid.domain() != Domain::Sphere {
            return Err(Error::Mismatch("expected a sphere grid"));
        }
        Ok(GridFunction::from_closure(grid, self.field()).with_extension(self.solid_field()))
    }

    /// `|y|^ℓ Y_ℓ` sampled on a ball grid, carrying `S(|y|^ℓ Y_ℓ) = d/(2ℓ+d) Y_ℓ`.
    pub fn solid_on_ball(&self, grid: &Arc<crate::quadrature::QuadratureGrid>) -> Result<GridFunction> {
        if grid.domain() != Domain::Ball {
            return Err(Error::Mismatch("expected a ball grid"));
        }
        let d = self.axis.len() as f64;
        let c = d / (2.0 * self.degree as f64 + d);
        let z = self.clone();
        let ext: Field = Arc::new(move |w: &[f64]| c * z.eval(w));
        Ok(GridFunction::from_closure(grid, self.solid_field()).with_extension(ext))
    }
}

/// `∫ f dμ` and the moments `∫ ω_i f dμ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowDegreeComponent {
    pub mean: f64,
    pub moments: Vec<f64>,
}

impl LowDegreeComponent {
    /// `(Π^l f)(ω) = mean + d Σ moments_i ω_i`.
    pub fn reconstruct(&self, w: &[f64]) -> f64 {
        let d = self.moments.len() as f64;
        self.mean + d * dot(&self.moments, w)
    }

    /// `|∫ f| + d (Σ moments²)^{1/2}`, an upper bound for `sup |Π^l f|`.
    pub fn sup_bound(&self) -> f64 {
        let d = self.moments.len() as f64;
        self.mean.abs() + d * libm::sqrt(dot(&self.moments, &self.moments))
    }

    /// `‖Q Π^l f‖₂² = mean² + d²/(d+2) Σ moments²`.
    pub fn extension_norm2(&self) -> f64 {
        let d = self.moments.len() as f64;
        self.mean * self.mean + d * d / (d + 2.0) * dot(&self.moments, &self.moments)
    }
}

/// Split `f = Π^l f + r^h` on the nodes of a sphere grid.
pub fn project_low(f: &GridFunction) -> Result<(LowDegreeComponent, GridFunction)> {
    let grid = f.grid();
    if grid.domain() != Domain::Sphere {
        return Err(Error::Mismatch("projection acts on sphere functions"));
    }
    let d = grid.dim().get();
    let v = f.values();
    let mean = grid.sum(v);
    let moments: Vec<f64> = (0..d)
        .map(|i| {
            let m: Vec<f64> = (0..grid.len()).map(|k| grid.node(k)[i] * v[k]).collect();
            grid.sum(&m)
        })
        .collect();
    let low = LowDegreeComponent { mean, moments };
    let rest: Vec<f64> = (0..grid.len()).map(|k| v[k] - low.reconstruct(grid.node(k))).collect();
    let mut rh = GridFunction::from_values(grid, rest)?;
    if let Some(c) = f.closure() {
        let c = c.clone();
        let l2 = low.clone();
        rh = GridFunction::from_closure(grid, Arc::new(move |w: &[f64]| c(w) - l2.reconstruct(w)));
    }
    Ok((low, rh))
}

/// Orthogonalize a ball function against `span{1, y_1, ..., y_d}` in `L²(dν)`.
pub fn project_out_affine(v: &GridFunction) -> Result<GridFunction> {
    let grid = v.grid();
    if grid.domain() != Domain::Ball {
        return Err(Error::Mismatch("expected a ball function"));
    }
    let d = grid.dim().get();
    let vals = v.values();
    let mean = grid.sum(vals);
    // ∫ y_i y_j dν = δ_ij d/(d+2) is used through the discrete Gram entries.
    let mut coef = Vec::with_capacity(d);
    for i in 0..d {
        let num: Vec<f64> = (0..grid.len()).map(|k| grid.node(k)[i] * vals[k]).collect();
        let den: Vec<f64> = (0..grid.len()).map(|k| grid.node(k)[i] * grid.node(k)[i]).collect();
        coef.push(grid.sum(&num) / grid.sum(&den));
    }
    let out: Vec<f64> = (0..grid.len())
        .map(|k| vals[k] - mean - dot(&coef, grid.node(k)))
        .collect();
    let mut res = GridFunction::from_values(grid, out)?;
    if let Some(c) = v.closure() {
        let c = c.clone();
        res = GridFunction::from_closure(grid, Arc::new(move |y: &[f64]| c(y) - mean - dot(&coef, y)));
    }
    Ok(res)
}
