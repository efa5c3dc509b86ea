//! The Poisson extension `Q` from `S^{d-1}` to `B^d`, its adjoint `S`, and
//! the half-space extension `P` routed through the ball.
//!
//! `Q` is discretized with the band-limited kernel
//! `K_L(rη, ω) = Σ_{ℓ<=L} r^ℓ Z_ℓ(η·ω)`, which agrees with the Poisson
//! kernel `(1-|y|²)/|y-ω|^d` on every harmonic of degree at most `L`. On a
//! product grid `Z_ℓ(η_a·ω_b)` depends on the azimuths only through their
//! difference, so each kernel row is a circulant in azimuth. The operator
//! stores, for every `(ℓ, m)` with `m <= ℓ <= L`, the polar block
//! `Ĝ_{ℓ,m}(a, b) = Σ_n Z_ℓ(A_ab + B_ab cos φ_n) cos(m φ_n)` and applies
//! `Q` as a Fourier analysis in azimuth, a block product, and a synthesis.
//! The result equals the dense sum `Σ_j μ_j K_L(y_k, ω_j) u_j` exactly.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::conformal::{halfspace_pushforward, sigma, sigma_factor};
use crate::harmonics::zonal_kernels;
use crate::math::{dist2, dot, norm2, pairwise_sum, powf};
use crate::quadrature::{inner, Domain, Field, GridFunction, Layout, ProductLayout, QuadratureGrid};
use crate::{Error, Result};

/// Discrete Poisson extension between a product sphere grid and the ball
/// grid built on it.
#[derive(Clone, Debug)]
pub struct PoissonOperator {
    sphere: Arc<QuadratureGrid>,
    ball: Arc<QuadratureGrid>,
    degree: usize,
    polar: usize,
    azimuth: usize,
    radial: Vec<f64>,
    blocks: Vec<f64>,
    cos_tab: Vec<f64>,
    sin_tab: Vec<f64>,
}

// Blocks are ordered m-major: (m=0, ℓ=0..L), (m=1, ℓ=1..L), ...
fn pair_offsets(lmax: usize) -> Vec<usize> {
    let mut off = Vec::with_capacity(lmax + 2);
    let mut acc = 0;
    for m in 0..=lmax {
        off.push(acc);
        acc += lmax + 1 - m;
    }
    off.push(acc);
    off
}

/// Number of `(ℓ, m)` blocks for degree `L`.
pub fn block_count(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 2) / 2
}

fn polar_products(layout: &ProductLayout) -> (Vec<f64>, Vec<f64>) {
    // (cos, sin) per polar tuple and level.
    let np = layout.polar_count();
    let k = layout.polar.len();
    let mut c = vec![0.0; np * k];
    let mut s = vec![0.0; np * k];
    let mut buf = Vec::new();
    for a in 0..np {
        layout.polar_cosines(a, &mut buf);
        for lvl in 0..k {
            c[a * k + lvl] = buf[lvl];
            s[a * k + lvl] = libm::sqrt((1.0 - buf[lvl] * buf[lvl]).max(0.0));
        }
    }
    (c, s)
}

impl PoissonOperator {
    /// Operator of the default degree `L = min(n_polar, n_azimuth/2) - 1`.
    pub fn new(sphere: Arc<QuadratureGrid>, ball: Arc<QuadratureGrid>) -> Result<Self> {
        let (sl, _) = Self::layouts(&sphere, &ball)?;
        let n = sl.polar[0].nodes.len();
        let lmax = n.min(sl.azimuth / 2) - 1;
        Self::with_degree(sphere, ball, lmax)
    }

    fn layouts<'a>(
        sphere: &'a QuadratureGrid,
        ball: &'a QuadratureGrid,
    ) -> Result<(&'a ProductLayout, &'a ProductLayout)> {
        let (Layout::Product(sl), Layout::Product(bl)) = (sphere.layout(), ball.layout()) else {
            return Err(Error::Mismatch("extension operator needs product grids"));
        };
        if sphere.domain() != Domain::Sphere || ball.domain() != Domain::Ball {
            return Err(Error::Mismatch("expected a sphere grid and a ball grid"));
        }
        if sphere.dim() != ball.dim()
            || sl.azimuth != bl.azimuth
            || sl.polar.len() != bl.polar.len()
            || sl.polar.iter().zip(&bl.polar).any(|(a, b)| a.nodes != b.nodes)
        {
            return Err(Error::Mismatch("ball grid is not built on this sphere grid"));
        }
        Ok((sl, bl))
    }

    pub fn with_degree(sphere: Arc<QuadratureGrid>, ball: Arc<QuadratureGrid>, lmax: usize) -> Result<Self> {
        let blocks = Self::compute_blocks(&sphere, &ball, lmax)?;
        Self::from_blocks(sphere, ball, lmax, blocks)
    }

    /// Rebuild from previously computed blocks (e.g. read from a cache).
    pub fn from_blocks(
        sphere: Arc<QuadratureGrid>,
        ball: Arc<QuadratureGrid>,
        lmax: usize,
        blocks: Vec<f64>,
    ) -> Result<Self> {
        let (sl, bl) = Self::layouts(&sphere, &ball)?;
        let m = sl.azimuth;
        if 2 * lmax >= m {
            return Err(Error::Resolution(
                "kernel degree must stay below half the azimuth count",
            ));
        }
        let p = sl.polar_count();
        if blocks.len() != block_count(lmax) * p * p {
            return Err(Error::Mismatch("block table has the wrong size"));
        }
        let mut cos_tab = vec![0.0; (lmax + 1) * m];
        let mut sin_tab = vec![0.0; (lmax + 1) * m];
        for k in 0..=lmax {
            for s in 0..m {
                let a = 2.0 * PI * ((k * s) % m) as f64 / m as f64;
                cos_tab[k * m + s] = libm::cos(a);
                sin_tab[k * m + s] = libm::sin(a);
            }
        }
        Ok(PoissonOperator {
            radial: bl.radial.clone(),
            sphere,
            ball,
            degree: lmax,
            polar: p,
            azimuth: m,
            blocks,
            cos_tab,
            sin_tab,
        })
    }

    /// The `Ĝ_{ℓ,m}` table, `block_count(L)` row-major `P x P` blocks.
    pub fn compute_blocks(sphere: &QuadratureGrid, ball: &QuadratureGrid, lmax: usize) -> Result<Vec<f64>> {
        let (sl, _) = Self::layouts(sphere, ball)?;
        let d = sphere.dim().get();
        let m = sl.azimuth;
        if 2 * lmax >= m {
            return Err(Error::Resolution(
                "kernel degree must stay below half the azimuth count",
            ));
        }
        let p = sl.polar_count();
        let k = sl.polar.len();
        let (pc, ps) = polar_products(sl);
        let offs = pair_offsets(lmax);
        let nb = block_count(lmax);
        let mut blocks = vec![0.0; nb * p * p];
        let half = m / 2;
        let nh = half + 1;
        let phi_cos: Vec<f64> = (0..nh).map(|n| libm::cos(2.0 * PI * n as f64 / m as f64)).collect();
        let (cos_n, wn): (Vec<Vec<f64>>, Vec<f64>) = (0..nh)
            .map(|n| {
                let row = (0..=lmax)
                    .map(|mm| libm::cos(2.0 * PI * ((mm * n) % m) as f64 / m as f64))
                    .collect();
                let w = if n == 0 || (m % 2 == 0 && n == half) { 1.0 } else { 2.0 };
                (row, w)
            })
            .unzip();
        let mut z = vec![0.0; nh * (lmax + 1)];
        for a in 0..p {
            for b in a..p {
                let (mut aa, mut bb) = (0.0, 1.0);
                for lvl in (0..k).rev() {
                    let (ca, sa) = (pc[a * k + lvl], ps[a * k + lvl]);
                    let (cb, sb) = (pc[b * k + lvl], ps[b * k + lvl]);
                    if lvl == k - 1 {
                        aa = ca * cb;
                        bb = sa * sb;
                    } else {
                        aa = ca * cb + sa * sb * aa;
                        bb *= sa * sb;
                    }
                }
                for n in 0..nh {
                    let t = (aa + bb * phi_cos[n]).clamp(-1.0, 1.0);
                    zonal_kernels(d, t, &mut z[n * (lmax + 1)..(n + 1) * (lmax + 1)]);
                }
                for mm in 0..=lmax {
                    for l in mm..=lmax {
                        let mut acc = 0.0;
                        for n in 0..nh {
                            acc += wn[n] * z[n * (lmax + 1) + l] * cos_n[n][mm];
                        }
                        let base = (offs[mm] + l - mm) * p * p;
                        blocks[base + a * p + b] = acc;
                        blocks[base + b * p + a] = acc;
                    }
                }
            }
        }
        Ok(blocks)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn blocks(&self) -> &[f64] {
        &self.blocks
    }

    pub fn polar_count(&self) -> usize {
        self.polar
    }

    pub fn sphere_grid(&self) -> &Arc<QuadratureGrid> {
        &self.sphere
    }

    pub fn ball_grid(&self) -> &Arc<QuadratureGrid> {
        &self.ball
    }

    /// `(Qu)_k = Σ_j μ_j K_L(y_k, ω_j) u_j`.
    pub fn apply_q(&self, u: &GridFunction) -> Result<GridFunction> {
        if !u.grid().same_as(&self.sphere) {
            return Err(Error::Mismatch("function is not on the operator's sphere grid"));
        }
        let vals = self.apply_q_values(u.values());
        GridFunction::from_values(&self.ball, vals)
    }

    fn analysis(&self, w: &[f64], rows: usize) -> (Vec<f64>, Vec<f64>) {
        // C[row][m], S[row][m] for m <= L.
        let m = self.azimuth;
        let lm = self.degree + 1;
        let mut c = vec![0.0; rows * lm];
        let mut s = vec![0.0; rows * lm];
        for r in 0..rows {
            let ring = &w[r * m..(r + 1) * m];
            for k in 0..lm {
                let ct = &self.cos_tab[k * m..(k + 1) * m];
                let st = &self.sin_tab[k * m..(k + 1) * m];
                let (mut a, mut b) = (0.0, 0.0);
                for t in 0..m {
                    a += ring[t] * ct[t];
                    b += ring[t] * st[t];
                }
                c[r * lm + k] = a;
                s[r * lm + k] = b;
            }
        }
        (c, s)
    }

    fn synthesis(&self, c: &[f64], s: &[f64], rows: usize, out: &mut [f64]) {
        let m = self.azimuth;
        let lm = self.degree + 1;
        let inv = 1.0 / m as f64;
        for r in 0..rows {
            let ring = &mut out[r * m..(r + 1) * m];
            let c0 = c[r * lm];
            ring.iter_mut().for_each(|v| *v = c0 * inv);
            for k in 1..lm {
                let (ck, sk) = (2.0 * inv * c[r * lm + k], 2.0 * inv * s[r * lm + k]);
                let ct = &self.cos_tab[k * m..(k + 1) * m];
                let st = &self.sin_tab[k * m..(k + 1) * m];
                for t in 0..m {
                    ring[t] += ck * ct[t] + sk * st[t];
                }
            }
        }
    }

    /// `Q` on raw sample vectors.
    pub fn apply_q_values(&self, u: &[f64]) -> Vec<f64> {
        let p = self.polar;
        let lm = self.degree + 1;
        let mu = self.sphere.weights();
        let w: Vec<f64> = u.iter().zip(mu).map(|(a, b)| a * b).collect();
        let (c, s) = self.analysis(&w, p);
        let offs = pair_offsets(self.degree);
        // H[pair][a] = Σ_b Ĝ(a,b) C_m(b).
        let nb = block_count(self.degree);
        let mut hc = vec![0.0; nb * p];
        let mut hs = vec![0.0; nb * p];
        let mut cm = vec![0.0; p];
        let mut sm = vec![0.0; p];
        for mm in 0..lm {
            for b in 0..p {
                cm[b] = c[b * lm + mm];
                sm[b] = s[b * lm + mm];
            }
            for l in mm..lm {
                let pair = offs[mm] + l - mm;
                let blk = &self.blocks[pair * p * p..(pair + 1) * p * p];
                for a in 0..p {
                    let row = &blk[a * p..(a + 1) * p];
                    hc[pair * p + a] = dot(row, &cm);
                    hs[pair * p + a] = dot(row, &sm);
                }
            }
        }
        let nr = self.radial.len();
        let mut out = vec![0.0; nr * p * self.azimuth];
        let mut wc = vec![0.0; p * lm];
        let mut ws = vec![0.0; p * lm];
        let mut rp = vec![0.0; lm];
        for (i, &r) in self.radial.iter().enumerate() {
            let mut x = 1.0;
            for v in rp.iter_mut() {
                *v = x;
                x *= r;
            }
            wc.iter_mut().for_each(|v| *v = 0.0);
            ws.iter_mut().for_each(|v| *v = 0.0);
            for mm in 0..lm {
                for l in mm..lm {
                    let pair = offs[mm] + l - mm;
                    let f = rp[l];
                    for a in 0..p {
                        wc[a * lm + mm] += f * hc[pair * p + a];
                        ws[a * lm + mm] += f * hs[pair * p + a];
                    }
                }
            }
            let m = self.azimuth;
            self.synthesis(&wc, &ws, p, &mut out[i * p * m..(i + 1) * p * m]);
        }
        out
    }

    /// The transpose of the discrete `Q` against `μ` and `ν`:
    /// `(S̃v)_j = Σ_k ν_k K_L(y_k, ω_j) v_k`.
    pub fn apply_s_transpose(&self, v: &GridFunction) -> Result<GridFunction> {
        if !v.grid().same_as(&self.ball) {
            return Err(Error::Mismatch("function is not on the operator's ball grid"));
        }
        GridFunction::from_values(&self.sphere, self.apply_s_values(v.values()))
    }

    pub fn apply_s_values(&self, v: &[f64]) -> Vec<f64> {
        let p = self.polar;
        let lm = self.degree + 1;
        let m = self.azimuth;
        let nr = self.radial.len();
        let nu = self.ball.weights();
        let w: Vec<f64> = v.iter().zip(nu).map(|(a, b)| a * b).collect();
        let (c, s) = self.analysis(&w, nr * p);
        let offs = pair_offsets(self.degree);
        let nb = block_count(self.degree);
        // X[pair][a] = Σ_i r_i^ℓ C_m(i, a).
        let mut xc = vec![0.0; nb * p];
        let mut xs = vec![0.0; nb * p];
        let mut rp = vec![0.0; lm];
        for (i, &r) in self.radial.iter().enumerate() {
            let mut x = 1.0;
            for val in rp.iter_mut() {
                *val = x;
                x *= r;
            }
            for mm in 0..lm {
                for l in mm..lm {
                    let pair = offs[mm] + l - mm;
                    let f = rp[l];
                    for a in 0..p {
                        let idx = (i * p + a) * lm + mm;
                        xc[pair * p + a] += f * c[idx];
                        xs[pair * p + a] += f * s[idx];
                    }
                }
            }
        }
        let mut yc = vec![0.0; p * lm];
        let mut ys = vec![0.0; p * lm];
        for mm in 0..lm {
            for l in mm..lm {
                let pair = offs[mm] + l - mm;
                let blk = &self.blocks[pair * p * p..(pair + 1) * p * p];
                let xcp = &xc[pair * p..(pair + 1) * p];
                let xsp = &xs[pair * p..(pair + 1) * p];
                for a in 0..p {
                    let row = &blk[a * p..(a + 1) * p];
                    let (fc, fs) = (xcp[a], xsp[a]);
                    if fc == 0.0 && fs == 0.0 {
                        continue;
                    }
                    for b in 0..p {
                        yc[b * lm + mm] += row[b] * fc;
                        ys[b * lm + mm] += row[b] * fs;
                    }
                }
            }
        }
        let mut out = vec![0.0; p * m];
        self.synthesis(&yc, &ys, p, &mut out);
        out
    }

    /// `(Qu)(y) = Σ_j μ_j K_L(y, ω_j) u_j` at one arbitrary point.
    pub fn eval_q_at(&self, u: &GridFunction, y: &[f64]) -> Result<f64> {
        if !u.grid().same_as(&self.sphere) {
            return Err(Error::Mismatch("function is not on the operator's sphere grid"));
        }
        let d = self.sphere.dim().get();
        if y.len() != d {
            return Err(Error::Mismatch("point has the wrong dimension"));
        }
        let r = libm::sqrt(norm2(y));
        if !(r < 1.0) {
            return Err(Error::Domain("point is not inside the open ball"));
        }
        let mut rp = vec![0.0; self.degree + 1];
        let mut x = 1.0;
        for v in rp.iter_mut() {
            *v = x;
            x *= r;
        }
        let g = &self.sphere;
        let uv = u.values();
        let mut z = vec![0.0; self.degree + 1];
        let mut terms = Vec::with_capacity(g.len());
        for j in 0..g.len() {
            let t = if r > 0.0 {
                (dot(g.node(j), y) / r).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            zonal_kernels(d, t, &mut z);
            terms.push(g.weights()[j] * dot(&z, &rp) * uv[j]);
        }
        Ok(pairwise_sum(terms.len(), &|j| terms[j]))
    }

    /// `|⟨u, S̃v⟩_μ - ⟨Qu, v⟩_ν|`.
    pub fn adjointness_residual(&self, u: &GridFunction, v: &GridFunction) -> Result<f64> {
        let qu = self.apply_q(u)?;
        let sv = self.apply_s_transpose(v)?;
        Ok((inner(u, &sv)? - inner(&qu, v)?).abs())
    }
}

/// The Poisson kernel `Q(y, ω) = (1-|y|²)/|y-ω|^d`.
pub fn poisson_kernel(y: &[f64], w: &[f64]) -> f64 {
    let d = y.len() as f64;
    (1.0 - norm2(y)) / powf(libm::sqrt(dist2(y, w)), d)
}

/// Half-space kernel `P(x, ξ) = 2/|S^{d-1}| · x_d/(|x'-ξ|² + x_d²)^{d/2}`.
pub fn poisson_kernel_halfspace(x: &[f64], xi: &[f64]) -> f64 {
    let d = x.len();
    let dim = crate::Dim::new(d).expect("dimension at least 3");
    let xd = x[d - 1];
    let r2: f64 = x[..d - 1].iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + xd * xd;
    2.0 / dim.sphere_area() * xd / powf(libm::sqrt(r2), d as f64)
}

/// `(Sv)(ω) = ∫ Q(y, ω) v(y) dν(y)` by direct quadrature of the kernel on
/// the ball grid. Each radial shell is handled with singularity
/// subtraction: `Σ_j μ_j Q(r ω_j, ω)(v(r ω_j) - v(r ω)) + v(r ω)`, using
/// `∫ Q(r ω', ω) dμ(ω') = 1`. With `subtract = false` the plain sum
/// `Σ_k ν_k Q(y_k, ω) v_k` is returned instead.
pub fn apply_s_direct(v: &GridFunction, eval: &Arc<QuadratureGrid>, subtract: bool) -> Result<GridFunction> {
    let ball = v.grid();
    let Layout::Product(bl) = ball.layout() else {
        return Err(Error::Mismatch("direct S needs a product ball grid"));
    };
    if ball.domain() != Domain::Ball || eval.domain() != Domain::Sphere {
        return Err(Error::Mismatch("direct S maps ball functions to sphere grids"));
    }
    if ball.dim() != eval.dim() {
        return Err(Error::Mismatch("dimension mismatch"));
    }
    let f = if subtract { Some(v.evaluator()?) } else { None };
    let nr = bl.radial.len();
    let ns = ball.len() / nr;
    let d = ball.dim().get();
    let vals = v.values();
    let mut out = Vec::with_capacity(eval.len());
    let mut y0 = vec![0.0; d];
    for e in 0..eval.len() {
        let w = eval.node(e);
        let mut total = 0.0;
        for i in 0..nr {
            let r = bl.radial[i];
            let wr = bl.radial_weights[i];
            let base = i * ns;
            let centre = match &f {
                Some(f) => {
                    for (dst, src) in y0.iter_mut().zip(w) {
                        *dst = r * src;
                    }
                    f(&y0)
                }
                None => 0.0,
            };
            let shell = pairwise_sum(ns, &|j| {
                let k = base + j;
                let y = ball.node(k);
                // Sphere weight of the node: ν_k / radial weight.
                ball.weights()[k] / wr * poisson_kernel(y, w) * (vals[k] - centre)
            });
            total += wr * (shell + centre);
        }
        out.push(total);
    }
    GridFunction::from_values(eval, out)
}

/// Fixed irrational rotation used for direct-`S` evaluation grids.
pub fn default_eval_rotation(d: usize) -> Vec<f64> {
    // Product of plane rotations with angles sqrt(2)-1, sqrt(3)-1, ...
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        a[i * d + i] = 1.0;
    }
    for k in 0..d - 1 {
        let th = libm::sqrt((k + 2) as f64) - 1.0;
        let (c, s) = (libm::cos(th), libm::sin(th));
        for row in 0..d {
            let x = a[row * d + k];
            let y = a[row * d + k + 1];
            a[row * d + k] = c * x - s * y;
            a[row * d + k + 1] = s * x + c * y;
        }
    }
    a
}

/// Extension machinery for one pair of grids: the discrete operator on
/// product grids, or the closed-form extensions carried by the functions
/// on zonal grids.
#[derive(Clone, Debug)]
pub struct Extension {
    pub sphere: Arc<QuadratureGrid>,
    pub ball: Arc<QuadratureGrid>,
    pub op: Option<Arc<PoissonOperator>>,
}

impl Extension {
    pub fn discrete(op: Arc<PoissonOperator>) -> Self {
        Extension {
            sphere: op.sphere.clone(),
            ball: op.ball.clone(),
            op: Some(op),
        }
    }

    pub fn closed_form(sphere: Arc<QuadratureGrid>, ball: Arc<QuadratureGrid>) -> Self {
        Extension { sphere, ball, op: None }
    }

    /// `Qu` on the ball grid.
    pub fn q(&self, u: &GridFunction) -> Result<GridFunction> {
        match &self.op {
            Some(op) => op.apply_q(u),
            None => {
                let ext = u
                    .extension()
                    .ok_or(Error::Mismatch("no closed-form extension available"))?;
                Ok(GridFunction::from_closure(&self.ball, ext.clone()))
            }
        }
    }

    /// `Sv` on the sphere grid (transpose of the discrete `Q` when present).
    pub fn s(&self, v: &GridFunction) -> Result<GridFunction> {
        match &self.op {
            Some(op) => op.apply_s_transpose(v),
            None => {
                let ext = v
                    .extension()
                    .ok_or(Error::Mismatch("no closed-form dual extension available"))?;
                Ok(GridFunction::from_closure(&self.sphere, ext.clone()))
            }
        }
    }
}

/// `(Pf)(x)` by transport: push `f` to the sphere, extend with the
/// discrete `Q`, and undo the ball-side identity
/// `Pf(x) = J_Σ(x)^{(d-2)/(2d)} (Q u)(Σ x) / |S^{d-1}|^{1/p}`.
pub fn apply_p(op: &PoissonOperator, f: Field, x: &[f64]) -> Result<f64> {
    let dim = op.sphere.dim();
    if x.len() != dim.get() {
        return Err(Error::Mismatch("point has the wrong dimension"));
    }
    let y = sigma(x)?;
    let u = halfspace_pushforward(&op.sphere, f, None)?;
    let qu = op.eval_q_at(&u, &y)?;
    let c = libm::pow(dim.sphere_area(), 1.0 / dim.p());
    let v = powf(sigma_factor(x), (dim.f() - 2.0) / 2.0) * qu / c;
    if !v.is_finite() {
        return Err(Error::Overflow("half-space transport is not finite"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{act_on_sphere_function, HalfSpaceOptimizer, MobiusTransform};
    use crate::harmonics::zonal;
    use crate::Dim;

    fn small(n: usize, m: usize, r: usize) -> (Arc<QuadratureGrid>, Arc<QuadratureGrid>) {
        let s = Arc::new(QuadratureGrid::sphere(Dim::new(3).unwrap(), n, m).unwrap());
        let b = Arc::new(QuadratureGrid::ball(r, &s).unwrap());
        (s, b)
    }

    fn dense_q(op: &PoissonOperator, u: &[f64], k: usize) -> f64 {
        let y = op.ball.node(k);
        let r = libm::sqrt(norm2(y));
        let mut z = vec![0.0; op.degree + 1];
        (0..op.sphere.len())
            .map(|j| {
                let w = op.sphere.node(j);
                zonal_kernels(3, if r > 0.0 { dot(w, y) / r } else { 0.0 }, &mut z);
                let k: f64 = z.iter().enumerate().map(|(l, v)| v * libm::pow(r, l as f64)).sum();
                op.sphere.weights()[j] * k * u[j]
            })
            .sum()
    }

    #[test]
    fn block_layout_counts() {
        assert_eq!(block_count(0), 1);
        assert_eq!(block_count(3), 10);
        let o = pair_offsets(3);
        assert_eq!(o, vec![0, 4, 7, 9, 10]);
    }

    #[test]
    fn structured_matches_dense_sum() {
        let (s, b) = small(8, 16, 6);
        let op = PoissonOperator::new(s.clone(), b).unwrap();
        assert_eq!(op.degree(), 7);
        let u = GridFunction::from_fn(&s, |w| libm::exp(w[0] - 0.3 * w[1] * w[2]));
        let q = op.apply_q(&u).unwrap();
        for k in [0, 17, 101, 350, op.ball.len() - 1] {
            let want = dense_q(&op, u.values(), k);
            assert!((q.values()[k] - want).abs() < 1e-12, "{k}: {} vs {want}", q.values()[k]);
        }
    }

    #[test]
    fn constants_and_harmonics_extend_exactly() {
        let (s, b) = small(10, 20, 8);
        let op = PoissonOperator::new(s.clone(), b.clone()).unwrap();
        let one = op.apply_q(&GridFunction::constant(&s, 1.0)).unwrap();
        assert!(one.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        for l in 1..=5 {
            let y = zonal(l, &[0.6, 0.0, 0.8], Dim::new(3).unwrap()).unwrap();
            let q = op.apply_q(&y.on_sphere(&s).unwrap()).unwrap();
            let err = (0..b.len())
                .map(|k| (q.values()[k] - y.eval_solid(b.node(k))).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-11, "l={l}: {err}");
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let (s, b) = small(8, 16, 6);
        let op = PoissonOperator::new(s.clone(), b.clone()).unwrap();
        let u = GridFunction::from_fn(&s, |w| w[0] * w[0] + libm::sin(3.0 * w[2]));
        let v = GridFunction::from_fn(&b, |y| libm::cos(y[0] + 2.0 * y[1]) - y[2]);
        let res = op.adjointness_residual(&u, &v).unwrap();
        assert!(res < 1e-13, "{res}");
    }

    #[test]
    fn transpose_maps_solid_harmonics() {
        let (s, b) = small(12, 24, 12);
        let op = PoissonOperator::new(s.clone(), b.clone()).unwrap();
        let y = zonal(2, &[0.0, 0.0, 1.0], Dim::new(3).unwrap()).unwrap();
        let sv = op.apply_s_transpose(&y.solid_on_ball(&b).unwrap()).unwrap();
        let err = (0..s.len())
            .map(|j| (sv.values()[j] - 3.0 / 7.0 * y.eval(s.node(j))).abs())
            .fold(0.0, f64::max);
        // Exact up to the radial rule on r^{2ℓ+2}.
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn cached_blocks_roundtrip() {
        let (s, b) = small(6, 12, 4);
        let op = PoissonOperator::new(s.clone(), b.clone()).unwrap();
        let again = PoissonOperator::from_blocks(s.clone(), b.clone(), op.degree(), op.blocks().to_vec()).unwrap();
        let u = GridFunction::from_fn(&s, |w| w[1]);
        assert_eq!(op.apply_q(&u).unwrap().values(), again.apply_q(&u).unwrap().values());
        assert!(PoissonOperator::from_blocks(s, b, op.degree(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn rejects_mismatched_grids() {
        let (s, _) = small(6, 12, 4);
        let (s2, b2) = small(8, 16, 4);
        assert!(PoissonOperator::new(s.clone(), b2).is_err());
        let (_, b) = small(6, 12, 4);
        let op = PoissonOperator::new(s, b).unwrap();
        assert!(op.apply_q(&GridFunction::constant(&s2, 1.0)).is_err());
        assert!(op
            .eval_q_at(&GridFunction::constant(&op.sphere, 1.0), &[0.0, 0.0, 1.0])
            .is_err());
    }

    #[test]
    fn point_evaluation_agrees_with_grid() {
        let (s, b) = small(8, 16, 6);
        let op = PoissonOperator::new(s.clone(), b.clone()).unwrap();
        let u = GridFunction::from_fn(&s, |w| libm::exp(w[2]));
        let q = op.apply_q(&u).unwrap();
        for k in [3, 200, 700] {
            let v = op.eval_q_at(&u, b.node(k)).unwrap();
            assert!((v - q.values()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn direct_s_with_subtraction() {
        let (_, b) = small(24, 48, 24);
        let eval = Arc::new(
            QuadratureGrid::sphere(Dim::new(3).unwrap(), 4, 8)
                .unwrap()
                .rotated(&default_eval_rotation(3))
                .unwrap(),
        );
        let one = apply_s_direct(&GridFunction::constant(&b, 1.0), &eval, true).unwrap();
        assert!(one.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let y = zonal(1, &[0.0, 0.0, 1.0], Dim::new(3).unwrap()).unwrap();
        let sv = apply_s_direct(&y.solid_on_ball(&b).unwrap(), &eval, true).unwrap();
        let err = (0..eval.len())
            .map(|j| (sv.values()[j] - 0.6 * y.eval(eval.node(j))).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-2, "{err}");
        let raw = apply_s_direct(&GridFunction::constant(&b, 1.0), &eval, false).unwrap();
        let worst = raw.values().iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(worst > 1e-6 && worst < 0.5, "{worst}");
    }

    #[test]
    fn transport_reproduces_halfspace_extension() {
        let (s, b) = small(24, 48, 4);
        let op = PoissonOperator::new(s, b).unwrap();
        let h = HalfSpaceOptimizer::new(1.0, 2.0, vec![0.0, 0.0]).unwrap();
        let hh = h.clone();
        let f: Field = Arc::new(move |xi: &[f64]| hh.eval(xi));
        for x in [[0.1, -0.2, 0.3], [0.0, 0.0, 1.0], [1.5, 0.4, 0.7]] {
            let v = apply_p(&op, f.clone(), &x).unwrap();
            let want = h.poisson_extension(&x);
            assert!((v - want).abs() < 1e-8 * want.abs().max(1.0), "{x:?}: {v} vs {want}");
        }
    }

    #[test]
    fn halfspace_kernel_integrates_to_one() {
        // ∫ P(x, ξ) dξ = 1 in polar coordinates for d = 3.
        let x = [0.0, 0.0, 0.5];
        let g = crate::quadrature::GaussRule::legendre(200).unwrap();
        let mut total = 0.0;
        for (t, w) in g.nodes.iter().zip(&g.weights) {
            // ρ = tan(πt/2) maps [0,1) to [0,∞).
            let u = 0.5 * (t + 1.0);
            let rho = libm::tan(PI * u / 2.0);
            let jac = PI / 2.0 / libm::cos(PI * u / 2.0).powi(2);
            total += w * 2.0 * PI * rho * poisson_kernel_halfspace(&x, &[rho, 0.0]) * jac;
        }
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn closed_form_extension_follows_mobius_action() {
        let (s, b) = small(12, 24, 8);
        let ext = Extension::closed_form(s.clone(), b.clone());
        let t = MobiusTransform::sphere(vec![0.0, 0.2, 0.3]).unwrap();
        let u = act_on_sphere_function(&t, &GridFunction::constant(&s, 1.0)).unwrap();
        let op = Arc::new(PoissonOperator::new(s, b).unwrap());
        let a = ext.q(&u).unwrap();
        let d = Extension::discrete(op).q(&u).unwrap();
        let err = a
            .values()
            .iter()
            .zip(d.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }
}
