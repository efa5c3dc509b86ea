//! Quadrature rules for the uniform probability measure `dμ` on `S^{d-1}`
//! and for `dν = d r^{d-1} dr dμ` on `B^d`, grid-sampled functions and the
//! norms taken against them.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::linalg::tridiagonal_eigenvalues;
use crate::math::{pairwise_sum, powf};
use crate::{Dim, Error, Result};

/// Which measure a grid discretizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Sphere,
    Ball,
}

/// Gauss rule on `[-1, 1]` for the weight `(1 - t^2)^{λ - 1/2}`, weights
/// normalized to sum 1. `λ = 1/2` is Gauss-Legendre.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn gegenbauer_beta(k: usize, lam: f64) -> f64 {
    let k = k as f64;
    k * (k + 2.0 * lam - 1.0) / (4.0 * (k + lam) * (k + lam - 1.0))
}

/// Orthonormal polynomials `p_0..p_{n-1}` squared into `sq`; returns
/// `p_n(t)` and `p_n'(t)`. `a`, `b` are the monic recurrence coefficients
/// (`b[0]` unused).
fn orthonormal_with_derivative(a: &[f64], b: &[f64], t: f64, sq: &mut Vec<f64>) -> (f64, f64) {
    let n = a.len();
    sq.clear();
    let (mut p_prev, mut p) = (0.0, 1.0);
    let (mut dp_prev, mut dp) = (0.0, 0.0);
    let mut sb_prev = 0.0;
    for k in 0..n {
        sq.push(p * p);
        let sb = libm::sqrt(b[k + 1]);
        let p_next = ((t - a[k]) * p - sb_prev * p_prev) / sb;
        let dp_next = (p + (t - a[k]) * dp - sb_prev * dp_prev) / sb;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
        sb_prev = sb;
    }
    (p, dp)
}

impl GaussRule {
    /// Gauss rule from monic three-term recurrence coefficients: `a` has
    /// `n` entries, `b` has `n + 1` with `b[0]` ignored. Nodes come from the
    /// Jacobi matrix, are polished by Newton steps, and weights are the
    /// Christoffel numbers normalized to sum 1.
    pub fn from_recurrence(a: &[f64], b: &[f64]) -> Result<Self> {
        let n = a.len();
        if n == 0 || b.len() != n + 1 {
            return Err(Error::Resolution("gauss rule needs n >= 1 and n + 1 recurrence terms"));
        }
        let off: Vec<f64> = (1..n).map(|k| libm::sqrt(b[k])).collect();
        let mut nodes = tridiagonal_eigenvalues(a, &off);
        let mut sq = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for t in nodes.iter_mut() {
            for _ in 0..3 {
                let (p, dp) = orthonormal_with_derivative(a, b, *t, &mut sq);
                if dp != 0.0 {
                    *t -= p / dp;
                }
            }
            orthonormal_with_derivative(a, b, *t, &mut sq);
            weights.push(1.0 / sq.iter().sum::<f64>());
        }
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
        Ok(GaussRule { nodes, weights })
    }

    /// Weight `(1 - t^2)^{λ - 1/2}` on `[-1, 1]`.
    pub fn gegenbauer(n: usize, lam: f64) -> Result<Self> {
        if lam <= 0.0 {
            return Err(Error::Domain("gegenbauer parameter must be positive"));
        }
        let a = vec![0.0; n];
        let b: Vec<f64> = (0..=n)
            .map(|k| if k == 0 { 0.0 } else { gegenbauer_beta(k, lam) })
            .collect();
        let mut g = Self::from_recurrence(&a, &b)?;
        // Exact symmetry of the weight.
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let t = 0.5 * (g.nodes[j] - g.nodes[i]);
            g.nodes[i] = -t;
            g.nodes[j] = t;
            let w = 0.5 * (g.weights[i] + g.weights[j]);
            g.weights[i] = w;
            g.weights[j] = w;
        }
        if n % 2 == 1 {
            g.nodes[n / 2] = 0.0;
        }
        Ok(g)
    }

    /// Weight `(1 - t)^α (1 + t)^β` on `[-1, 1]`.
    pub fn jacobi(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > -1.0 && beta > -1.0) {
            return Err(Error::Domain("jacobi exponents must exceed -1"));
        }
        let ab = alpha + beta;
        let a: Vec<f64> = (0..n)
            .map(|k| {
                let k = k as f64;
                let s = 2.0 * k + ab;
                if s.abs() < 1e-300 || (s + 2.0).abs() < 1e-300 {
                    (beta - alpha) / (ab + 2.0)
                } else {
                    (beta * beta - alpha * alpha) / (s * (s + 2.0))
                }
            })
            .collect();
        let b: Vec<f64> = (0..=n)
            .map(|k| {
                if k == 0 {
                    return 0.0;
                }
                let k = k as f64;
                let s = 2.0 * k + ab;
                if k == 1.0 {
                    4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab))
                } else {
                    4.0 * k * (k + alpha) * (k + beta) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0))
                }
            })
            .collect();
        Self::from_recurrence(&a, &b)
    }

    pub fn legendre(n: usize) -> Result<Self> {
        Self::gegenbauer(n, 0.5)
    }

    /// Barycentric weights for polynomial interpolation through the nodes.
    pub fn barycentric_weights(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let mut w: Vec<f64> = (0..n)
            .map(|j| {
                let mut prod = 1.0;
                for k in 0..n {
                    if k != j {
                        prod *= 2.0 * (self.nodes[j] - self.nodes[k]);
                    }
                }
                1.0 / prod
            })
            .collect();
        let m = w.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        w.iter_mut().for_each(|x| *x /= m);
        w
    }
}

/// Radial rule for `d r^{d-1} dr` on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RadialRule {
    /// Gauss-Legendre in `s = r^d`; exact for polynomials in `s`.
    #[default]
    PowerSubstitution,
    /// Gauss-Jacobi in `r` with weight `r^{d-1}`; exact for polynomials in `r`.
    GaussJacobi,
}

/// Tensor structure of a product grid, kept so that the extension operator
/// can exploit the azimuthal symmetry and so that samples can be
/// interpolated.
#[derive(Clone, Debug)]
pub struct ProductLayout {
    /// Polar rules, outermost first (weights `sin^{d-2}`, ..., `sin^1`).
    pub polar: Vec<GaussRule>,
    /// Number of equispaced azimuth nodes.
    pub azimuth: usize,
    /// Radial nodes `r_i` (ball only).
    pub radial: Vec<f64>,
    /// Radial weights, summing to 1 (ball only).
    pub radial_weights: Vec<f64>,
}

impl ProductLayout {
    /// Number of polar tuples.
    pub fn polar_count(&self) -> usize {
        self.polar.iter().map(|r| r.nodes.len()).product()
    }

    /// Cosines of the polar angles of tuple `a`, outermost first.
    pub fn polar_cosines(&self, mut a: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.polar.len(), 0.0);
        for lvl in (0..self.polar.len()).rev() {
            let n = self.polar[lvl].nodes.len();
            out[lvl] = self.polar[lvl].nodes[a % n];
            a /= n;
        }
    }

    pub fn azimuth_angle(&self, s: usize) -> f64 {
        2.0 * PI * s as f64 / self.azimuth as f64
    }
}

#[derive(Clone, Debug)]
pub enum Layout {
    Product(ProductLayout),
    /// One node per ring about the `e_d` axis; valid only for functions
    /// that are invariant under rotations fixing `e_d`.
    Zonal,
    /// Arbitrary nodes (e.g. a rotated copy of a product grid).
    Scattered,
}

/// Nodes plus probability weights realizing `dμ` or `dν`.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    dim: Dim,
    domain: Domain,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    resolution: Vec<usize>,
    layout: Layout,
}

/// Cartesian coordinates from polar cosines (outermost first) and azimuth.
pub fn spherical_to_cartesian(cosines: &[f64], phi: f64, out: &mut [f64]) {
    let d = cosines.len() + 2;
    let mut s = 1.0;
    for (lvl, &c) in cosines.iter().enumerate() {
        out[d - 1 - lvl] = s * c;
        s *= libm::sqrt((1.0 - c * c).max(0.0));
    }
    out[1] = s * libm::sin(phi);
    out[0] = s * libm::cos(phi);
}

/// Inverse of [`spherical_to_cartesian`] for a nonzero vector.
pub fn cartesian_to_spherical(x: &[f64], cosines: &mut Vec<f64>) -> f64 {
    let d = x.len();
    cosines.clear();
    let mut rest2: f64 = x.iter().map(|v| v * v).sum();
    for lvl in 0..d - 2 {
        let xi = x[d - 1 - lvl];
        let r = libm::sqrt(rest2);
        cosines.push(if r > 0.0 { (xi / r).clamp(-1.0, 1.0) } else { 1.0 });
        rest2 -= xi * xi;
        rest2 = rest2.max(0.0);
    }
    libm::atan2(x[1], x[0])
}

impl QuadratureGrid {
    /// Product rule on `S^{d-1}`: `n_polar` Gauss nodes on every polar
    /// axis and `n_azimuth` equispaced azimuths. Exact for polynomials of
    /// degree `<= min(2 n_polar, n_azimuth) - 1`.
    pub fn sphere(dim: Dim, n_polar: usize, n_azimuth: usize) -> Result<Self> {
        if n_polar < 4 || n_azimuth < 4 {
            return Err(Error::Resolution("sphere grid needs at least 4 nodes per axis"));
        }
        let d = dim.get();
        let polar: Vec<GaussRule> = (0..d - 2)
            .map(|lvl| GaussRule::gegenbauer(n_polar, (d - 2 - lvl) as f64 / 2.0))
            .collect::<Result<_>>()?;
        let layout = ProductLayout {
            polar,
            azimuth: n_azimuth,
            radial: Vec::new(),
            radial_weights: Vec::new(),
        };
        let np = layout.polar_count();
        let mut nodes = Vec::with_capacity(np * n_azimuth * d);
        let mut weights = Vec::with_capacity(np * n_azimuth);
        let mut cos = Vec::new();
        let mut pt = vec![0.0; d];
        for a in 0..np {
            layout.polar_cosines(a, &mut cos);
            let mut w = 1.0;
            let mut idx = a;
            for lvl in (0..layout.polar.len()).rev() {
                let n = layout.polar[lvl].nodes.len();
                w *= layout.polar[lvl].weights[idx % n];
                idx /= n;
            }
            for s in 0..n_azimuth {
                spherical_to_cartesian(&cos, layout.azimuth_angle(s), &mut pt);
                nodes.extend_from_slice(&pt);
                weights.push(w / n_azimuth as f64);
            }
        }
        normalize(&mut weights);
        let mut resolution = vec![n_polar; d - 2];
        resolution.push(n_azimuth);
        Ok(QuadratureGrid {
            dim,
            domain: Domain::Sphere,
            nodes,
            weights,
            resolution,
            layout: Layout::Product(layout),
        })
    }

    /// Ball rule: Gauss-Legendre in `s = r^d` times a product sphere grid.
    /// Node order is radius-major.
    pub fn ball(radial_res: usize, sphere: &QuadratureGrid) -> Result<Self> {
        Self::ball_with(radial_res, sphere, RadialRule::PowerSubstitution)
    }

    pub fn ball_with(radial_res: usize, sphere: &QuadratureGrid, rule: RadialRule) -> Result<Self> {
        if radial_res < 4 {
            return Err(Error::Resolution("ball grid needs at least 4 radial nodes"));
        }
        let Layout::Product(sl) = &sphere.layout else {
            return Err(Error::Mismatch("ball grid needs a product sphere grid"));
        };
        if sphere.domain != Domain::Sphere {
            return Err(Error::Mismatch("ball grid needs a sphere grid"));
        }
        let dim = sphere.dim;
        let d = dim.get();
        let (radial, rw): (Vec<f64>, Vec<f64>) = match rule {
            RadialRule::PowerSubstitution => {
                let g = GaussRule::legendre(radial_res)?;
                let r = g
                    .nodes
                    .iter()
                    .map(|&x| libm::pow(0.5 * (x + 1.0), 1.0 / d as f64))
                    .collect();
                (r, g.weights)
            }
            RadialRule::GaussJacobi => {
                let g = GaussRule::jacobi(radial_res, 0.0, (d - 1) as f64)?;
                (g.nodes.iter().map(|&x| 0.5 * (x + 1.0)).collect(), g.weights)
            }
        };
        let ns = sphere.len();
        let mut nodes = Vec::with_capacity(radial_res * ns * d);
        let mut weights = Vec::with_capacity(radial_res * ns);
        for (i, &r) in radial.iter().enumerate() {
            for j in 0..ns {
                nodes.extend(sphere.node(j).iter().map(|x| r * x));
                weights.push(rw[i] * sphere.weights[j]);
            }
        }
        normalize(&mut weights);
        let mut layout = sl.clone();
        layout.radial = radial;
        layout.radial_weights = rw;
        let mut resolution = vec![radial_res];
        resolution.extend_from_slice(&sphere.resolution);
        Ok(QuadratureGrid {
            dim,
            domain: Domain::Ball,
            nodes,
            weights,
            resolution,
            layout: Layout::Product(layout),
        })
    }

    /// Copy of this grid with every node multiplied by the orthogonal
    /// matrix `rot` (row-major `d x d`). The result is scattered.
    pub fn rotated(&self, rot: &[f64]) -> Result<Self> {
        let d = self.dim.get();
        if rot.len() != d * d {
            return Err(Error::Mismatch("rotation matrix has the wrong size"));
        }
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for k in 0..self.len() {
            let x = self.node(k);
            for i in 0..d {
                nodes.push((0..d).map(|j| rot[i * d + j] * x[j]).sum());
            }
        }
        Ok(QuadratureGrid {
            nodes,
            layout: Layout::Scattered,
            ..self.clone()
        })
    }

    /// Zonal rule on `S^{d-1}` for functions symmetric about `e_d`,
    /// graded toward the pole `e_d` with smallest panel `h0`.
    pub fn sphere_zonal_graded(dim: Dim, h0: f64, opts: GradedOptions) -> Result<Self> {
        if !(h0 > 0.0) {
            return Err(Error::Domain("grading width must be positive"));
        }
        let d = dim.get();
        let (theta, wt) = graded_panels(0.0, PI, h0, opts)?;
        let mut nodes = Vec::with_capacity(theta.len() * d);
        let mut weights = Vec::with_capacity(theta.len());
        for (&t, &w) in theta.iter().zip(&wt) {
            push_meridian(&mut nodes, d, libm::sin(t), libm::cos(t));
            weights.push(w * powf(libm::sin(t), (d - 2) as f64));
        }
        normalize(&mut weights);
        Ok(QuadratureGrid {
            dim,
            domain: Domain::Sphere,
            nodes,
            weights,
            resolution: vec![theta.len()],
            layout: Layout::Zonal,
        })
    }

    /// Zonal rule on `B^d` graded toward the boundary point `e_d`, in both
    /// the polar angle and `1 - r`.
    pub fn ball_zonal_graded(dim: Dim, h0: f64, opts: GradedOptions) -> Result<Self> {
        if !(h0 > 0.0) {
            return Err(Error::Domain("grading width must be positive"));
        }
        let d = dim.get();
        let df = d as f64;
        let (theta, wt) = graded_panels(0.0, PI, h0, opts)?;
        let (gap, wg) = graded_panels(0.0, 1.0, h0, opts)?;
        let mut nodes = Vec::with_capacity(theta.len() * gap.len() * d);
        let mut weights = Vec::with_capacity(theta.len() * gap.len());
        for (&g, &wr) in gap.iter().zip(&wg) {
            let r = 1.0 - g;
            let radial_w = wr * df * powf(r, df - 1.0);
            for (&t, &w) in theta.iter().zip(&wt) {
                push_meridian(&mut nodes, d, r * libm::sin(t), r * libm::cos(t));
                weights.push(radial_w * w * powf(libm::sin(t), df - 2.0));
            }
        }
        normalize(&mut weights);
        Ok(QuadratureGrid {
            dim,
            domain: Domain::Ball,
            nodes,
            weights,
            resolution: vec![gap.len(), theta.len()],
            layout: Layout::Zonal,
        })
    }

    #[inline]
    pub fn dim(&self) -> Dim {
        self.dim
    }

    #[inline]
    pub fn domain(&self) -> Domain {
        self.domain
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn node(&self, k: usize) -> &[f64] {
        let d = self.dim.get();
        &self.nodes[k * d..(k + 1) * d]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn is_zonal(&self) -> bool {
        matches!(self.layout, Layout::Zonal)
    }

    /// `Σ w_k f(x_k)`.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        pairwise_sum(self.len(), &|k| self.weights[k] * f(self.node(k)))
    }

    /// `Σ w_k v_k` for sampled values.
    pub fn sum(&self, values: &[f64]) -> f64 {
        pairwise_sum(self.len(), &|k| self.weights[k] * values[k])
    }

    /// `Σ w_k |v_k|^r`.
    pub fn power_sum(&self, values: &[f64], r: f64) -> f64 {
        pairwise_sum(self.len(), &|k| self.weights[k] * powf(values[k].abs(), r))
    }

    pub fn same_as(&self, other: &QuadratureGrid) -> bool {
        core::ptr::eq(self, other)
            || (self.dim == other.dim
                && self.domain == other.domain
                && self.weights.len() == other.weights.len()
                && self.nodes == other.nodes
                && self.weights == other.weights)
    }
}

fn push_meridian(nodes: &mut Vec<f64>, d: usize, x1: f64, xd: f64) {
    nodes.push(x1);
    for _ in 1..d - 1 {
        nodes.push(0.0);
    }
    nodes.push(xd);
}

fn normalize(w: &mut [f64]) {
    let s: f64 = pairwise_sum(w.len(), &|i| w[i]);
    w.iter_mut().for_each(|x| *x /= s);
}

/// Panel layout for graded rules.
#[derive(Clone, Copy, Debug)]
pub struct GradedOptions {
    /// Gauss-Legendre nodes per panel.
    pub per_panel: usize,
    /// Geometric growth factor of consecutive panels.
    pub ratio: f64,
}

impl Default for GradedOptions {
    fn default() -> Self {
        GradedOptions {
            per_panel: 16,
            ratio: 3.0,
        }
    }
}

/// Composite Gauss-Legendre on `[lo, hi]` with panels growing
/// geometrically away from `lo`, first panel width `h0`.
pub fn graded_panels(lo: f64, hi: f64, h0: f64, opts: GradedOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    if opts.ratio <= 1.0 || opts.per_panel < 2 {
        return Err(Error::Domain("graded panels need ratio > 1 and at least 2 nodes"));
    }
    let g = GaussRule::legendre(opts.per_panel)?;
    let mut edges = vec![lo];
    let mut h = h0.min(hi - lo);
    let mut a = lo;
    while a < hi {
        let b = if a + h * opts.ratio > hi { hi } else { (a + h).min(hi) };
        edges.push(b);
        a = b;
        h *= opts.ratio;
    }
    let mut x = Vec::new();
    let mut w = Vec::new();
    for e in edges.windows(2) {
        let (a, b) = (e[0], e[1]);
        let half = 0.5 * (b - a);
        for (t, wt) in g.nodes.iter().zip(&g.weights) {
            x.push(a + half * (t + 1.0));
            // GaussRule weights sum to 1; rescale to the panel length.
            w.push(wt * (b - a));
        }
    }
    Ok((x, w))
}

/// Evaluator for off-grid points.
pub type Field = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Values of a function on the nodes of a grid, with the closure that
/// produced them when one exists, and optionally a closed-form harmonic
/// extension (sphere functions) or dual extension (ball functions).
#[derive(Clone)]
pub struct GridFunction {
    grid: Arc<QuadratureGrid>,
    values: Vec<f64>,
    closure: Option<Field>,
    extension: Option<Field>,
}

impl core::fmt::Debug for GridFunction {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("GridFunction")
            .field("domain", &self.grid.domain)
            .field("len", &self.values.len())
            .field("closure", &self.closure.is_some())
            .field("extension", &self.extension.is_some())
            .finish()
    }
}

impl GridFunction {
    pub fn from_closure(grid: &Arc<QuadratureGrid>, f: Field) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.node(k))).collect();
        GridFunction {
            grid: grid.clone(),
            values,
            closure: Some(f),
            extension: None,
        }
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(grid: &Arc<QuadratureGrid>, f: F) -> Self {
        Self::from_closure(grid, Arc::new(f))
    }

    pub fn from_values(grid: &Arc<QuadratureGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Mismatch("value count differs from node count"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow("non-finite sample"));
        }
        Ok(GridFunction {
            grid: grid.clone(),
            values,
            closure: None,
            extension: None,
        })
    }

    pub fn constant(grid: &Arc<QuadratureGrid>, c: f64) -> Self {
        let mut f = Self::from_fn(grid, move |_| c);
        f.extension = Some(Arc::new(move |_| c));
        f
    }

    /// Attach a closed-form extension (`Qu` for sphere functions, `Sv`
    /// for ball functions).
    pub fn with_extension(mut self, ext: Field) -> Self {
        self.extension = Some(ext);
        self
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn closure(&self) -> Option<&Field> {
        self.closure.as_ref()
    }

    pub fn extension(&self) -> Option<&Field> {
        self.extension.as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at an arbitrary point: the closure when present, otherwise
    /// barycentric interpolation on the product grid.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if let Some(f) = &self.closure {
            return Ok(f(x));
        }
        interpolate(&self.grid, &self.values, x)
    }

    /// Off-grid evaluator: the closure, or an interpolating closure.
    pub fn evaluator(&self) -> Result<Field> {
        if let Some(f) = &self.closure {
            return Ok(f.clone());
        }
        let it = Interpolant::new(&self.grid, &self.values)?;
        Ok(Arc::new(move |x: &[f64]| it.eval(x)))
    }

    /// Pointwise `c f`.
    pub fn scaled(&self, c: f64) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            closure: self
                .closure
                .clone()
                .map(|f| -> Field { Arc::new(move |x: &[f64]| c * f(x)) }),
            extension: self
                .extension
                .clone()
                .map(|f| -> Field { Arc::new(move |x: &[f64]| c * f(x)) }),
        }
    }

    /// Pointwise `f + g` on a common grid.
    pub fn plus(&self, other: &GridFunction) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::Mismatch("functions live on different grids"));
        }
        let join = |a: &Option<Field>, b: &Option<Field>| -> Option<Field> {
            match (a, b) {
                (Some(f), Some(g)) => {
                    let (f, g) = (f.clone(), g.clone());
                    Some(Arc::new(move |x: &[f64]| f(x) + g(x)))
                }
                _ => None,
            }
        };
        Ok(GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            closure: join(&self.closure, &other.closure),
            extension: join(&self.extension, &other.extension),
        })
    }

    /// `‖f‖_r = (Σ w |f|^r)^{1/r}` for `r >= 1`.
    pub fn norm(&self, r: f64) -> Result<f64> {
        norm(self, r)
    }

    pub fn integral(&self) -> f64 {
        self.grid.sum(&self.values)
    }
}

/// `‖f‖_r`; exponents below 1 are rejected.
pub fn norm(f: &GridFunction, r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::Domain("norm exponent must be at least 1"));
    }
    Ok(libm::pow(f.grid.power_sum(&f.values, r), 1.0 / r))
}

/// `Σ w f g`.
pub fn inner(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    if !f.grid.same_as(&g.grid) {
        return Err(Error::Mismatch("inner product across grids"));
    }
    let grid = &f.grid;
    Ok(pairwise_sum(grid.len(), &|k| {
        grid.weights[k] * f.values[k] * g.values[k]
    }))
}

/// `Σ w f^2 |m|`: an `L^2` norm squared against the weight function `m`.
pub fn weighted_norm2(f: &GridFunction, m: &GridFunction) -> Result<f64> {
    if !f.grid.same_as(&m.grid) {
        return Err(Error::Mismatch("weighted norm across grids"));
    }
    let grid = &f.grid;
    Ok(pairwise_sum(grid.len(), &|k| {
        grid.weights[k] * f.values[k] * f.values[k] * m.values[k].abs()
    }))
}

fn poly_bary(nodes: &[f64], bw: &[f64], t: f64, out: &mut Vec<f64>) {
    out.clear();
    if let Some(j) = nodes.iter().position(|&x| x == t) {
        out.resize(nodes.len(), 0.0);
        out[j] = 1.0;
        return;
    }
    let mut s = 0.0;
    for (x, w) in nodes.iter().zip(bw) {
        let c = w / (t - x);
        out.push(c);
        s += c;
    }
    out.iter_mut().for_each(|c| *c /= s);
}

/// Interpolant for samples on a three-dimensional product grid.
///
/// Samples are Fourier transformed along each ring. Mode `m` of a band
/// limited function is `sin^{|m|}θ` times a polynomial in `cos θ`, so even
/// modes are interpolated as polynomials in `cos θ` and odd modes after
/// dividing by `sin θ`. Ball samples are interpolated in `r` as well.
#[derive(Clone, Debug)]
pub struct Interpolant {
    polar: Vec<f64>,
    polar_bw: Vec<f64>,
    radial: Vec<f64>,
    radial_bw: Vec<f64>,
    azimuth: usize,
    /// `[shell][mode][ring]` cosine and sine coefficients, already divided
    /// by `sin θ` for odd modes.
    cos_coef: Vec<f64>,
    sin_coef: Vec<f64>,
}

impl Interpolant {
    pub fn new(grid: &QuadratureGrid, values: &[f64]) -> Result<Self> {
        let Layout::Product(l) = &grid.layout else {
            return Err(Error::Mismatch("interpolation needs a product grid"));
        };
        if grid.dim.get() != 3 {
            return Err(Error::Mismatch(
                "grid interpolation is implemented for d = 3; supply a closure",
            ));
        }
        if values.len() != grid.len() {
            return Err(Error::Mismatch("value count differs from grid"));
        }
        let rule = &l.polar[0];
        let n = rule.nodes.len();
        let m = l.azimuth;
        let shells = if grid.domain == Domain::Ball { l.radial.len() } else { 1 };
        let modes = m / 2 + 1;
        let mut cos_coef = vec![0.0; shells * modes * n];
        let mut sin_coef = vec![0.0; shells * modes * n];
        let (cs, sn): (Vec<f64>, Vec<f64>) = (0..m)
            .map(|s| {
                let a = 2.0 * PI * s as f64 / m as f64;
                (libm::cos(a), libm::sin(a))
            })
            .unzip();
        for sh in 0..shells {
            for j in 0..n {
                let ring = &values[(sh * n + j) * m..(sh * n + j + 1) * m];
                let st = libm::sqrt(1.0 - rule.nodes[j] * rule.nodes[j]);
                for k in 0..modes {
                    let (mut a, mut b) = (0.0, 0.0);
                    for (s, v) in ring.iter().enumerate() {
                        let idx = (k * s) % m;
                        a += v * cs[idx];
                        b += v * sn[idx];
                    }
                    let scale = if k == 0 || (m % 2 == 0 && k == m / 2) { 1.0 } else { 2.0 } / m as f64;
                    let div = if k % 2 == 1 { st } else { 1.0 };
                    cos_coef[(sh * modes + k) * n + j] = scale * a / div;
                    sin_coef[(sh * modes + k) * n + j] = scale * b / div;
                }
            }
        }
        let (radial, radial_bw) = if grid.domain == Domain::Ball {
            let r = l.radial.clone();
            let bw = GaussRule {
                nodes: r.clone(),
                weights: vec![0.0; r.len()],
            }
            .barycentric_weights();
            (r, bw)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Interpolant {
            polar: rule.nodes.clone(),
            polar_bw: rule.barycentric_weights(),
            radial,
            radial_bw,
            azimuth: m,
            cos_coef,
            sin_coef,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = libm::sqrt(x.iter().map(|v| v * v).sum::<f64>());
        let (t, st, phi) = if r > 0.0 {
            let t = (x[2] / r).clamp(-1.0, 1.0);
            (t, libm::sqrt((1.0 - t * t).max(0.0)), libm::atan2(x[1], x[0]))
        } else {
            (1.0, 0.0, 0.0)
        };
        let n = self.polar.len();
        let modes = self.azimuth / 2 + 1;
        let mut bt = Vec::with_capacity(n);
        poly_bary(&self.polar, &self.polar_bw, t, &mut bt);
        let mut br = Vec::new();
        let shells: Vec<(usize, f64)> = if self.radial.is_empty() {
            vec![(0, 1.0)]
        } else {
            poly_bary(&self.radial, &self.radial_bw, r, &mut br);
            br.iter().copied().enumerate().collect()
        };
        let mut acc = 0.0;
        for k in 0..modes {
            let (ck, sk) = (libm::cos(k as f64 * phi), libm::sin(k as f64 * phi));
            let mut a = 0.0;
            let mut b = 0.0;
            for &(sh, wr) in &shells {
                let base = (sh * modes + k) * n;
                let ca = &self.cos_coef[base..base + n];
                let sa = &self.sin_coef[base..base + n];
                let (mut pa, mut pb) = (0.0, 0.0);
                for j in 0..n {
                    pa += bt[j] * ca[j];
                    pb += bt[j] * sa[j];
                }
                a += wr * pa;
                b += wr * pb;
            }
            let f = if k % 2 == 1 { st } else { 1.0 };
            acc += f * (a * ck + b * sk);
        }
        acc
    }
}

/// One-off interpolation; builds an [`Interpolant`] per call.
pub fn interpolate(grid: &QuadratureGrid, values: &[f64], x: &[f64]) -> Result<f64> {
    Ok(Interpolant::new(grid, values)?.eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d3() -> Dim {
        Dim::new(3).unwrap()
    }

    #[test]
    fn legendre_matches_tabulated() {
        let g = GaussRule::legendre(3).unwrap();
        let t = libm::sqrt(0.6);
        assert!((g.nodes[0] + t).abs() < 1e-15 && (g.nodes[2] - t).abs() < 1e-15);
        assert!((g.weights[1] - 4.0 / 9.0).abs() < 1e-15);
        assert!((g.weights[0] - 5.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn gegenbauer_one_is_chebyshev_second_kind() {
        // λ = 1: nodes cos(kπ/(n+1)).
        let n = 9;
        let g = GaussRule::gegenbauer(n, 1.0).unwrap();
        for (k, t) in g.nodes.iter().enumerate() {
            let want = -libm::cos((k + 1) as f64 * PI / (n + 1) as f64);
            assert!((t - want).abs() < 1e-14);
        }
    }

    #[test]
    fn high_order_legendre_integrates_monomials() {
        let g = GaussRule::legendre(64).unwrap();
        for k in (0..=126).step_by(2) {
            let s: f64 = g
                .nodes
                .iter()
                .zip(&g.weights)
                .map(|(t, w)| w * powf(*t, k as f64))
                .sum();
            let want = 1.0 / (k as f64 + 1.0);
            assert!((s - want).abs() < 1e-14, "k={k}: {s} vs {want}");
        }
    }

    #[test]
    fn sphere_moments() {
        let g = QuadratureGrid::sphere(d3(), 16, 32).unwrap();
        let total: f64 = g.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
        assert!(g.weights().iter().all(|&w| w > 0.0));
        for i in 0..3 {
            assert!(g.integrate(|x| x[i]).abs() < 1e-13);
            for j in 0..3 {
                let want = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert!((g.integrate(|x| x[i] * x[j]) - want).abs() < 1e-13);
            }
        }
        assert!((g.integrate(|x| powf(x[2], 4.0)) - 0.2).abs() < 1e-13);
        assert!((g.integrate(|x| powf(x[0], 4.0)) - 0.2).abs() < 1e-13);
    }

    #[test]
    fn sphere_nodes_are_unit() {
        for d in 3..6 {
            let g = QuadratureGrid::sphere(Dim::new(d).unwrap(), 5, 10).unwrap();
            for k in 0..g.len() {
                let n: f64 = g.node(k).iter().map(|x| x * x).sum();
                assert!((n - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sphere_moments_higher_dimensions() {
        // ∫ ω_d^4 dμ = 3/(d(d+2)), ∫ ω_1^2 ω_2^2 dμ = 1/(d(d+2)).
        for d in 4..7 {
            let g = QuadratureGrid::sphere(Dim::new(d).unwrap(), 6, 12).unwrap();
            let df = d as f64;
            assert!((g.integrate(|x| powf(x[d - 1], 4.0)) - 3.0 / (df * (df + 2.0))).abs() < 1e-13);
            assert!((g.integrate(|x| x[0] * x[0] * x[1] * x[1]) - 1.0 / (df * (df + 2.0))).abs() < 1e-13);
            assert!((g.integrate(|x| x[0] * x[0]) - 1.0 / df).abs() < 1e-13);
        }
    }

    #[test]
    fn ball_moments() {
        let s = QuadratureGrid::sphere(d3(), 8, 16).unwrap();
        let b = QuadratureGrid::ball(12, &s).unwrap();
        assert!((b.weights().iter().sum::<f64>() - 1.0).abs() < 1e-13);
        // |y|^2 = s^{2/3} is not a polynomial in s: the substituted rule is
        // accurate, not exact. The Jacobi rule in r is exact.
        assert!((b.integrate(|y| y.iter().map(|v| v * v).sum()) - 0.6).abs() < 1e-4);
        let bj = QuadratureGrid::ball_with(12, &s, RadialRule::GaussJacobi).unwrap();
        assert!((bj.integrate(|y| y.iter().map(|v| v * v).sum()) - 0.6).abs() < 1e-12);
        let b48 = QuadratureGrid::ball(48, &s).unwrap();
        assert!((b48.integrate(|y| y.iter().map(|v| v * v).sum()) - 0.6).abs() / 0.6 < 1e-6);
        for i in 0..3 {
            assert!(b.integrate(|y| y[i]).abs() < 1e-14);
        }
        for k in 0..b.len() {
            let r: f64 = b.node(k).iter().map(|v| v * v).sum();
            assert!(r < 1.0);
        }
    }

    #[test]
    fn radial_substitution_accuracy() {
        // ∫ r^2 dν = ∫ s^{2/3} ds = 3/5; the s-rule sees a non-polynomial.
        let s = QuadratureGrid::sphere(d3(), 4, 8).unwrap();
        let b = QuadratureGrid::ball(48, &s).unwrap();
        let v = b.integrate(|y| libm::sqrt(y.iter().map(|v| v * v).sum()));
        assert!((v - 0.75).abs() / 0.75 < 1e-5);
        let v = b.integrate(|y| powf(y.iter().map(|v| v * v).sum(), 2.0));
        assert!((v - 3.0 / 7.0).abs() / (3.0 / 7.0) < 1e-8);
    }

    #[test]
    fn interpolation_reproduces_low_degree() {
        let g = Arc::new(QuadratureGrid::sphere(d3(), 10, 20).unwrap());
        let f = |x: &[f64]| 1.0 + x[0] * x[1] - 2.0 * x[2] * x[2] * x[2] + x[1];
        let gf = GridFunction::from_values(&g, (0..g.len()).map(|k| f(g.node(k))).collect()).unwrap();
        let p = [0.3f64, -0.5, 0.0];
        let n = libm::sqrt(p.iter().map(|v| v * v).sum::<f64>() + 0.64);
        let x = [p[0] / n, p[1] / n, 0.8 / n];
        assert!((gf.eval(&x).unwrap() - f(&x)).abs() < 1e-12);
    }

    #[test]
    fn interpolation_on_ball() {
        let s = QuadratureGrid::sphere(d3(), 8, 16).unwrap();
        let b = Arc::new(QuadratureGrid::ball(8, &s).unwrap());
        let f = |y: &[f64]| {
            let r2: f64 = y.iter().map(|v| v * v).sum();
            r2 * y[2] + y[0]
        };
        let gf = GridFunction::from_values(&b, (0..b.len()).map(|k| f(b.node(k))).collect()).unwrap();
        let y = [0.1, 0.2, -0.3];
        assert!((gf.eval(&y).unwrap() - f(&y)).abs() < 1e-10);
    }

    #[test]
    fn zonal_sphere_rule() {
        let g = QuadratureGrid::sphere_zonal_graded(d3(), 1e-6, GradedOptions::default()).unwrap();
        assert!((g.integrate(|x| x[2] * x[2]) - 1.0 / 3.0).abs() < 1e-13);
        assert!((g.integrate(|x| powf(x[2], 4.0)) - 0.2).abs() < 1e-13);
        // A bubble of width 1e-6 is resolved: ∫ J_Ψ dμ = 1.
        let eps: f64 = 1e-6;
        let t = 1.0 - eps;
        let jac = |x: &[f64]| {
            let den = x[0] * x[0] + (x[2] - t) * (x[2] - t);
            powf((1.0 - t * t) / den, 2.0)
        };
        assert!((g.integrate(jac) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zonal_ball_rule() {
        let d = d3();
        let g = QuadratureGrid::ball_zonal_graded(d, 1e-4, GradedOptions::default()).unwrap();
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-13);
        assert!((g.integrate(|y| y.iter().map(|v| v * v).sum()) - 0.6).abs() < 1e-12);
        assert!((g.integrate(|y| y[2] * y[2]) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_resolution() {
        assert!(QuadratureGrid::sphere(d3(), 3, 8).is_err());
        let s = QuadratureGrid::sphere(d3(), 4, 8).unwrap();
        assert!(QuadratureGrid::ball(3, &s).is_err());
    }

    #[test]
    fn norms() {
        let g = Arc::new(QuadratureGrid::sphere(d3(), 12, 24).unwrap());
        let one = GridFunction::constant(&g, 1.0);
        for r in [1.0, 1.2, 2.0, 4.0, 6.0] {
            assert!((one.norm(r).unwrap() - 1.0).abs() < 1e-14);
        }
        let w3 = GridFunction::from_fn(&g, |x| x[2]);
        assert!((w3.norm(2.0).unwrap().powi(2) - 1.0 / 3.0).abs() < 1e-13);
        assert!(w3.norm(0.5).is_err());
        assert!((inner(&w3, &w3).unwrap() - 1.0 / 3.0).abs() < 1e-13);
        let w33 = GridFunction::from_fn(&g, |x| x[2] * x[2]);
        assert!((weighted_norm2(&w3, &w33).unwrap() - 0.2).abs() < 1e-13);
    }
}
