//! Distances to the optimizer manifold minimized over `(λ, η)`, the
//! maximization of `F_v(η) = ∫ [v]_{Φ_η} dν`, and stability quotients.
//!
//! The Möbius action is an isometry of the relevant `L^r` spaces, so
//! `‖1 - λ(u)_{Ψ_η}‖_p = ‖(1)_{Ψ_{-η}} - λu‖_p` and
//! `‖1 - λ(u)_{Ψ_η}‖₂² = ∫ ((1)_{Ψ_{-η}} - λu)² j_{-η} dμ`, where
//! `j_{-η}` is the conformal factor of `Ψ_{-η}`. The searches use these
//! forms, which need only the samples of `u` and closed-form weights.

use alloc::vec;
use alloc::vec::Vec;

use crate::conformal::{act_on_ball_function, act_on_sphere_function, conformal_factor, phi_eta, MobiusTransform};
use crate::deficit::{deficit_dual, deficit_primal, two_term_distance, DeficitReport, Side};
use crate::extension::Extension;
use crate::math::{norm2, pairwise_sum, powf};
use crate::optimize::{nelder_mead, newton_fd, NelderMeadOptions};
use crate::quadrature::{Domain, GridFunction, QuadratureGrid};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceMode {
    TwoTerm,
    L2Only,
    LpOnly,
}

impl DistanceMode {
    pub fn tag(self) -> &'static str {
        match self {
            DistanceMode::TwoTerm => "two_term",
            DistanceMode::L2Only => "L2_only",
            DistanceMode::LpOnly => "Lp_only",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceResult {
    pub lambda: f64,
    /// Parameter of the transform applied to the input (`Ψ_η` or `Φ_η`).
    pub eta: Vec<f64>,
    /// Minimized objective.
    pub value: f64,
    /// `‖1 - λ(u)_Ψ‖_p^p` (primal).
    pub value_p: Option<f64>,
    /// `‖1 - λ(u)_Ψ‖₂²` (primal).
    pub value_2: Option<f64>,
    /// `‖1 - λ[v]_Φ‖_{q'}^{q'}` (dual).
    pub value_qprime: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `(f_2 - f_1)/f_2` for the best two multistart values.
    pub multistart_spread: f64,
    /// The best two starts disagree by more than 1%.
    pub flagged: bool,
}

impl DistanceResult {
    /// The distance entering the stability quotient: `a_p + a_2` on the
    /// primal side, `‖1 - λ[v]_Φ‖_{q'}²` on the dual side.
    pub fn distance(&self) -> f64 {
        match self.value_qprime {
            Some(a) => libm::pow(a, 2.0 / self.qprime()),
            None => self.value_p.unwrap_or(0.0) + self.value_2.unwrap_or(0.0),
        }
    }

    fn qprime(&self) -> f64 {
        let d = self.eta.len() as f64;
        2.0 * d / (d + 2.0)
    }
}

/// `η = tanh(|w|) w/|w|`, with `|η|` capped at `1 - 1e-12` where `tanh`
/// rounds to 1.
pub fn eta_from_w(w: &[f64]) -> Vec<f64> {
    let r = libm::sqrt(norm2(w));
    if r == 0.0 {
        return vec![0.0; w.len()];
    }
    let s = libm::tanh(r).min(1.0 - 1e-12) / r;
    w.iter().map(|x| x * s).collect()
}

fn neg(eta: &[f64]) -> Vec<f64> {
    eta.iter().map(|x| -x).collect()
}

/// `(‖1 - λ(u)_{Ψ_η}‖_p^p, ‖1 - λ(u)_{Ψ_η}‖₂²)` via the isometry form.
pub fn primal_objective_terms(u: &GridFunction, lambda: f64, eta: &[f64]) -> (f64, f64) {
    let g = u.grid();
    let dim = g.dim();
    let (p, h) = (dim.p(), (dim.f() - 2.0) / 2.0);
    let m = neg(eta);
    let w = g.weights();
    let v = u.values();
    let mut ap = Vec::with_capacity(v.len());
    let mut a2 = Vec::with_capacity(v.len());
    for k in 0..v.len() {
        let j = conformal_factor(&m, g.node(k));
        let diff = powf(j, h) - lambda * v[k];
        ap.push(w[k] * powf(diff.abs(), p));
        a2.push(w[k] * diff * diff * j);
    }
    (pairwise_sum(ap.len(), &|k| ap[k]), pairwise_sum(a2.len(), &|k| a2[k]))
}

/// `‖1 - λ[v]_{Φ_η}‖_{q'}^{q'}` via the isometry form.
pub fn dual_objective(v: &GridFunction, lambda: f64, eta: &[f64]) -> f64 {
    let g = v.grid();
    let dim = g.dim();
    let (qp, h) = (dim.q_dual(), (dim.f() + 2.0) / 2.0);
    let m = neg(eta);
    let w = g.weights();
    let vals = v.values();
    pairwise_sum(vals.len(), &|k| {
        let j = conformal_factor(&m, g.node(k));
        w[k] * libm::pow((powf(j, h) - lambda * vals[k]).abs(), qp)
    })
}

fn primal_value(mode: DistanceMode, t: (f64, f64)) -> f64 {
    match mode {
        DistanceMode::TwoTerm => t.0 + t.1,
        DistanceMode::L2Only => t.1,
        DistanceMode::LpOnly => t.0,
    }
}

fn check_input(u: &GridFunction, domain: Domain) -> Result<()> {
    if u.grid().domain() != domain {
        return Err(Error::Mismatch("function lives on the wrong domain"));
    }
    let g = u.grid();
    if libm::sqrt(g.power_sum(u.values(), 2.0)) < 1e-12 {
        return Err(Error::Domain("input norm below 1e-12"));
    }
    Ok(())
}

// Seeds for w: origin and ±0.5 along each searched axis.
fn seeds(grid: &QuadratureGrid) -> Vec<Vec<f64>> {
    let d = grid.dim().get();
    let axes: Vec<usize> = if grid.is_zonal() { vec![d - 1] } else { (0..d).collect() };
    let n = axes.len();
    let mut out = vec![vec![0.0; n]];
    for i in 0..n {
        for s in [0.5, -0.5] {
            let mut w = vec![0.0; n];
            w[i] = s;
            out.push(w);
        }
    }
    out
}

fn embed(grid: &QuadratureGrid, w: &[f64]) -> Vec<f64> {
    let d = grid.dim().get();
    if grid.is_zonal() {
        let mut full = vec![0.0; d];
        full[d - 1] = w[0];
        full
    } else {
        w.to_vec()
    }
}

struct Start {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

fn multistart<F: Fn(f64, &[f64]) -> f64, L: Fn(&[f64]) -> f64>(
    grid: &QuadratureGrid,
    objective: F,
    lambda_seed: L,
    opts: &NelderMeadOptions,
) -> (Vec<Start>, usize) {
    let mut runs = Vec::new();
    for w0 in seeds(grid) {
        let eta0 = eta_from_w(&embed(grid, &w0));
        let mut x0 = vec![lambda_seed(&eta0)];
        x0.extend_from_slice(&w0);
        let m = nelder_mead(
            |x: &[f64]| objective(x[0], &eta_from_w(&embed(grid, &x[1..]))),
            &x0,
            opts,
        );
        runs.push(Start {
            x: m.x,
            value: m.value,
            iterations: m.iterations,
            converged: m.converged,
        });
    }
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.value < runs[best].value {
            best = i;
        }
    }
    (runs, best)
}

fn spread(runs: &[Start]) -> (f64, bool) {
    let mut v: Vec<f64> = runs.iter().map(|r| r.value).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    if v.len() < 2 || v[1] <= 0.0 {
        return (0.0, false);
    }
    let s = (v[1] - v[0]) / v[1];
    // Values at rounding level are not compared.
    (s, s > 0.01 && v[1] > 1e-12)
}

/// `inf_{λ, η}` of the selected primal objective.
pub fn min_distance_primal(u: &GridFunction, mode: DistanceMode) -> Result<DistanceResult> {
    min_distance_primal_with(u, mode, &NelderMeadOptions::default())
}

pub fn min_distance_primal_with(
    u: &GridFunction,
    mode: DistanceMode,
    opts: &NelderMeadOptions,
) -> Result<DistanceResult> {
    check_input(u, Domain::Sphere)?;
    let g = u.grid().clone();
    let h = (g.dim().f() - 2.0) / 2.0;
    // L²-optimal λ at fixed η.
    let lambda_seed = |eta: &[f64]| {
        let m = neg(eta);
        let w = g.weights();
        let v = u.values();
        let num = pairwise_sum(v.len(), &|k| {
            let j = conformal_factor(&m, g.node(k));
            w[k] * j * powf(j, h) * v[k]
        });
        let den = pairwise_sum(v.len(), &|k| w[k] * conformal_factor(&m, g.node(k)) * v[k] * v[k]);
        if den > 0.0 {
            num / den
        } else {
            1.0
        }
    };
    let (runs, best) = multistart(
        &g,
        |l, eta| primal_value(mode, primal_objective_terms(u, l, eta)),
        lambda_seed,
        opts,
    );
    let r = &runs[best];
    let eta = eta_from_w(&embed(&g, &r.x[1..]));
    let terms = primal_objective_terms(u, r.x[0], &eta);
    let (s, flagged) = spread(&runs);
    Ok(DistanceResult {
        lambda: r.x[0],
        eta,
        value: primal_value(mode, terms),
        value_p: Some(terms.0),
        value_2: Some(terms.1),
        value_qprime: None,
        iterations: r.iterations,
        converged: r.converged,
        multistart_spread: s,
        flagged,
    })
}

/// `inf_{λ, η} ‖1 - λ[v]_{Φ_η}‖_{q'}^{q'}`; the reported distance is its
/// `2/q'` power.
pub fn min_distance_dual(v: &GridFunction) -> Result<DistanceResult> {
    min_distance_dual_with(v, &NelderMeadOptions::default())
}

pub fn min_distance_dual_with(v: &GridFunction, opts: &NelderMeadOptions) -> Result<DistanceResult> {
    check_input(v, Domain::Ball)?;
    let g = v.grid().clone();
    let h = (g.dim().f() + 2.0) / 2.0;
    // Warm start α = ∫ [v]_Φ dν style: the L²(ν) optimal λ at fixed η.
    let lambda_seed = |eta: &[f64]| {
        let m = neg(eta);
        let w = g.weights();
        let vals = v.values();
        let num = pairwise_sum(vals.len(), &|k| {
            w[k] * powf(conformal_factor(&m, g.node(k)), h) * vals[k]
        });
        let den = pairwise_sum(vals.len(), &|k| w[k] * vals[k] * vals[k]);
        if den > 0.0 {
            num / den
        } else {
            1.0
        }
    };
    let (runs, best) = multistart(&g, |l, eta| dual_objective(v, l, eta), lambda_seed, opts);
    let r = &runs[best];
    let eta = eta_from_w(&embed(&g, &r.x[1..]));
    let val = dual_objective(v, r.x[0], &eta);
    let (s, flagged) = spread(&runs);
    Ok(DistanceResult {
        lambda: r.x[0],
        eta,
        value: val,
        value_p: None,
        value_2: None,
        value_qprime: Some(val),
        iterations: r.iterations,
        converged: r.converged,
        multistart_spread: s,
        flagged,
    })
}

/// `F_v(η) = ∫ [v]_{Φ_η} dν = ∫ v j_{-η}^{(d-2)/2} dν`.
pub fn f_value(v: &GridFunction, eta: &[f64]) -> f64 {
    let g = v.grid();
    let h = (g.dim().f() - 2.0) / 2.0;
    let m = neg(eta);
    let w = g.weights();
    let vals = v.values();
    pairwise_sum(vals.len(), &|k| {
        w[k] * vals[k] * powf(conformal_factor(&m, g.node(k)), h)
    })
}

/// `∫ y_i [v]_{Φ_η}(y) dν(y)` by the change of variables `y' = Φ_η(y)`.
pub fn transformed_moments(v: &GridFunction, eta: &[f64]) -> Vec<f64> {
    let g = v.grid();
    let d = g.dim().get();
    let h = (g.dim().f() - 2.0) / 2.0;
    let m = neg(eta);
    let w = g.weights();
    let vals = v.values();
    let mut img = vec![0.0; g.len() * d];
    let mut fac = vec![0.0; g.len()];
    for k in 0..g.len() {
        let y = g.node(k);
        phi_eta(&m, y, &mut img[k * d..(k + 1) * d]);
        fac[k] = w[k] * vals[k] * powf(conformal_factor(&m, y), h);
    }
    (0..d)
        .map(|i| pairwise_sum(g.len(), &|k| fac[k] * img[k * d + i]))
        .collect()
}

/// `∫ y_i [v]_{Φ_η} dν` from samples of `[v]_{Φ_η}` on the grid.
pub fn direct_moments(v: &GridFunction, eta: &[f64]) -> Result<Vec<f64>> {
    let t = MobiusTransform::ball(eta.to_vec())?;
    let tv = act_on_ball_function(&t, v)?;
    let g = v.grid();
    let d = g.dim().get();
    let w = g.weights();
    let vals = tv.values();
    Ok((0..d)
        .map(|i| pairwise_sum(g.len(), &|k| w[k] * g.node(k)[i] * vals[k]))
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FMaximum {
    pub eta: Vec<f64>,
    pub value: f64,
    /// `∫ y_i r dν` with `r = [v]_{Φ_η*} - 1`, from grid samples.
    pub moments: Vec<f64>,
}

/// Maximize `F_v` over `η`: Nelder–Mead on `F`, then Newton on the
/// first-order condition `∫ y_i [v]_{Φ_η} dν = 0`.
pub fn maximize_f(v: &GridFunction) -> Result<FMaximum> {
    check_input(v, Domain::Ball)?;
    let g = v.grid().clone();
    let dim = g.dim();
    let dev: Vec<f64> = v.values().iter().map(|x| x - 1.0).collect();
    let dist = libm::pow(g.power_sum(&dev, dim.q_dual()), 1.0 / dim.q_dual());
    if !(dist < 1.0) {
        return Err(Error::Hypothesis("maximization needs ‖v - 1‖_{q'} < 1", dist));
    }
    let zonal = g.is_zonal();
    let d = dim.get();
    let n = if zonal { 1 } else { d };
    // Start one simplex from the best seed; it only has to land in
    // Newton's basin.
    let opts = NelderMeadOptions {
        x_tol: 1e-5,
        ..Default::default()
    };
    let neg_f = |w: &[f64]| -f_value(v, &eta_from_w(&embed(&g, w)));
    let w0 = seeds(&g)
        .into_iter()
        .map(|w| (neg_f(&w), w))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, w)| w)
        .expect("at least one seed");
    let w = nelder_mead(neg_f, &w0, &opts).x;
    let mut eta = eta_from_w(&embed(&g, &w));
    // Newton in η directly (the tanh map is only needed for the simplex).
    let pick = |full: Vec<f64>| -> Vec<f64> {
        if zonal {
            vec![full[d - 1]]
        } else {
            full
        }
    };
    let x0: Vec<f64> = pick(eta.clone());
    let (x, _) = newton_fd(
        |x: &[f64]| {
            let e = embed(&g, x);
            if norm2(&e) >= 1.0 {
                return vec![f64::INFINITY; n];
            }
            pick(transformed_moments(v, &e))
        },
        &x0,
        1e-13,
        20,
        1e-7,
    );
    eta = embed(&g, &x);
    let mut moments = direct_moments(v, &eta)?;
    if moments.iter().any(|m| m.abs() > 1e-9) {
        let (x2, _) = newton_fd(
            |x: &[f64]| {
                let e = embed(&g, x);
                if norm2(&e) >= 1.0 {
                    return vec![f64::INFINITY; n];
                }
                direct_moments(v, &e)
                    .map(pick)
                    .unwrap_or_else(|_| vec![f64::INFINITY; n])
            },
            &pick(eta.clone()),
            1e-12,
            4,
            1e-7,
        );
        eta = embed(&g, &x2);
        moments = direct_moments(v, &eta)?;
    }
    Ok(FMaximum {
        value: f_value(v, &eta),
        eta,
        moments,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityQuotient {
    pub deficit: DeficitReport,
    pub distance: DistanceResult,
    /// `deficit / distance`; `None` when the distance is below `1e-9`.
    pub ratio: Option<f64>,
}

/// Deficit over the side's distance (two-term on the primal side, squared
/// `L^{q'}` norm on the dual side).
pub fn stability_quotient(f: &GridFunction, side: Side, ext: &Extension) -> Result<StabilityQuotient> {
    let (deficit, distance) = match side {
        Side::Primal => (deficit_primal(f, ext)?, min_distance_primal(f, DistanceMode::TwoTerm)?),
        Side::Dual => (deficit_dual(f, ext)?, min_distance_dual(f)?),
    };
    let dist = distance.distance();
    let ratio = if dist < 1e-9 {
        None
    } else {
        Some(deficit.deficit / dist)
    };
    Ok(StabilityQuotient {
        deficit,
        distance,
        ratio,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    pub lambda: f64,
    pub eta: Vec<f64>,
    pub value: f64,
}

/// Brute-force scan of the primal objective over `λ ∈ [lo, hi]`
/// (`n_lambda` points) and `η` on a cubic lattice of `n_eta` points per
/// axis in `[-r, r]^d ∩ {|η| <= r}`, sampling `(u)_{Ψ_η}` directly.
pub fn grid_scan_primal(
    u: &GridFunction,
    mode: DistanceMode,
    lambda_range: (f64, f64),
    n_lambda: usize,
    eta_radius: f64,
    n_eta: usize,
) -> Result<ScanResult> {
    check_input(u, Domain::Sphere)?;
    let g = u.grid();
    let d = g.dim().get();
    let mut best = ScanResult {
        lambda: 1.0,
        eta: vec![0.0; d],
        value: f64::INFINITY,
    };
    let axis = |i: usize| -eta_radius + 2.0 * eta_radius * i as f64 / (n_eta - 1).max(1) as f64;
    let total = n_eta.pow(d as u32);
    for code in 0..total {
        let mut c = code;
        let mut eta = vec![0.0; d];
        for e in eta.iter_mut() {
            *e = axis(c % n_eta);
            c /= n_eta;
        }
        if norm2(&eta) > eta_radius * eta_radius + 1e-15 {
            continue;
        }
        let t = MobiusTransform::sphere(eta.clone())?;
        let ut = act_on_sphere_function(&t, u)?;
        for i in 0..n_lambda {
            let l = lambda_range.0 + (lambda_range.1 - lambda_range.0) * i as f64 / (n_lambda - 1).max(1) as f64;
            let id = MobiusTransform::identity(g.dim(), Domain::Sphere);
            let val = primal_value(mode, two_term_distance(&ut, l, &id)?);
            if val < best.value {
                best = ScanResult {
                    lambda: l,
                    eta: eta.clone(),
                    value: val,
                };
            }
        }
    }
    Ok(best)
}

/// Brute-force scan of the dual objective, sampling `[v]_{Φ_η}` directly.
pub fn grid_scan_dual(
    v: &GridFunction,
    lambda_range: (f64, f64),
    n_lambda: usize,
    eta_radius: f64,
    n_eta: usize,
) -> Result<ScanResult> {
    check_input(v, Domain::Ball)?;
    let g = v.grid();
    let d = g.dim().get();
    let qp = g.dim().q_dual();
    let mut best = ScanResult {
        lambda: 1.0,
        eta: vec![0.0; d],
        value: f64::INFINITY,
    };
    let axis = |i: usize| -eta_radius + 2.0 * eta_radius * i as f64 / (n_eta - 1).max(1) as f64;
    for code in 0..n_eta.pow(d as u32) {
        let mut c = code;
        let mut eta = vec![0.0; d];
        for e in eta.iter_mut() {
            *e = axis(c % n_eta);
            c /= n_eta;
        }
        if norm2(&eta) > eta_radius * eta_radius + 1e-15 {
            continue;
        }
        let tv = act_on_ball_function(&MobiusTransform::ball(eta.clone())?, v)?;
        for i in 0..n_lambda {
            let l = lambda_range.0 + (lambda_range.1 - lambda_range.0) * i as f64 / (n_lambda - 1).max(1) as f64;
            let diff: Vec<f64> = tv.values().iter().map(|x| 1.0 - l * x).collect();
            let val = g.power_sum(&diff, qp);
            if val < best.value {
                best = ScanResult {
                    lambda: l,
                    eta: eta.clone(),
                    value: val,
                };
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::zonal;
    use crate::Dim;
    use alloc::sync::Arc;

    fn d3() -> Dim {
        Dim::new(3).unwrap()
    }

    fn sphere(n: usize) -> Arc<QuadratureGrid> {
        Arc::new(QuadratureGrid::sphere(d3(), n, 2 * n).unwrap())
    }

    #[test]
    fn eta_map_stays_inside() {
        let e = eta_from_w(&[30.0, -40.0, 0.0]);
        assert!(norm2(&e) < 1.0);
        assert_eq!(eta_from_w(&[0.0; 3]), vec![0.0; 3]);
    }

    #[test]
    fn isometry_form_matches_direct_sampling() {
        let s = sphere(24);
        let u = GridFunction::from_fn(&s, |w| 1.0 + 0.2 * w[0] * w[2] + 0.1 * w[1]);
        let eta = [0.1, -0.2, 0.15];
        let (ap, a2) = primal_objective_terms(&u, 0.9, &eta);
        let t = MobiusTransform::sphere(eta.to_vec()).unwrap();
        let (bp, b2) = two_term_distance(&u, 0.9, &t).unwrap();
        assert!(
            (ap - bp).abs() < 1e-10 * bp && (a2 - b2).abs() < 1e-10 * b2,
            "{ap} {bp} {a2} {b2}"
        );
    }

    #[test]
    fn constant_is_at_distance_zero() {
        let s = sphere(12);
        let r = min_distance_primal(&GridFunction::constant(&s, 1.0), DistanceMode::TwoTerm).unwrap();
        assert!(r.value < 1e-16 && (r.lambda - 1.0).abs() < 1e-8 && norm2(&r.eta) < 1e-14);
    }

    #[test]
    fn orbit_point_is_recovered() {
        let s = sphere(32);
        let eta0 = vec![0.2, -0.3, 0.1];
        let t = MobiusTransform::sphere(eta0.clone()).unwrap();
        let u = act_on_sphere_function(&t, &GridFunction::constant(&s, 1.0)).unwrap();
        for mode in [DistanceMode::TwoTerm, DistanceMode::L2Only, DistanceMode::LpOnly] {
            let r = min_distance_primal(&u, mode).unwrap();
            assert!(r.value <= 1e-6, "{mode:?}: {}", r.value);
            for i in 0..3 {
                assert!((r.eta[i] + eta0[i]).abs() < 1e-3, "{:?}", r.eta);
            }
        }
    }

    #[test]
    fn perturbation_agrees_with_scan() {
        let s = sphere(16);
        let y2 = zonal(2, &[0.0, 0.0, 1.0], d3()).unwrap();
        let u = GridFunction::from_fn(&s, move |w| 1.0 + 0.05 * y2.eval(w));
        let r = min_distance_primal(&u, DistanceMode::TwoTerm).unwrap();
        let scan = grid_scan_primal(&u, DistanceMode::TwoTerm, (0.8, 1.2), 41, 0.3, 7).unwrap();
        assert!(r.value <= scan.value * (1.0 + 1e-9));
        assert!(
            (r.value - scan.value).abs() < 0.005 * scan.value,
            "{} vs {}",
            r.value,
            scan.value
        );
        assert!((r.value_2.unwrap() - 0.0025).abs() < 1e-4, "{:?}", r.value_2);
    }

    #[test]
    fn dual_constant_and_orbit() {
        let s = sphere(16);
        let b = Arc::new(QuadratureGrid::ball(16, &s).unwrap());
        let r = min_distance_dual(&GridFunction::constant(&b, 1.0)).unwrap();
        assert!(r.value < 1e-14 && (r.lambda - 1.0).abs() < 1e-6);
        let t = MobiusTransform::ball(vec![0.0, 0.25, -0.2]).unwrap();
        let v = act_on_ball_function(&t, &GridFunction::constant(&b, 1.0)).unwrap();
        let r = min_distance_dual(&v).unwrap();
        assert!(r.distance() <= 3e-3, "{}", r.distance());
    }

    #[test]
    fn maximize_f_examples() {
        let s = sphere(16);
        let b = Arc::new(QuadratureGrid::ball(16, &s).unwrap());
        let m = maximize_f(&GridFunction::constant(&b, 1.0)).unwrap();
        assert!(norm2(&m.eta) < 1e-16 && (m.value - 1.0).abs() < 1e-12);
        let eta0 = vec![0.15, 0.0, -0.1];
        let v = act_on_ball_function(
            &MobiusTransform::ball(eta0.clone()).unwrap(),
            &GridFunction::constant(&b, 1.0),
        )
        .unwrap();
        let m = maximize_f(&v).unwrap();
        assert!((m.value - 1.0).abs() < 1e-5, "{}", m.value);
        for i in 0..3 {
            assert!((m.eta[i] + eta0[i]).abs() < 1e-5, "{:?}", m.eta);
        }
        let v = GridFunction::from_fn(&b, |y| 1.0 + 0.02 * y[0]);
        let m = maximize_f(&v).unwrap();
        assert!(m.eta[0].abs() > 1e-4);
        assert!(m.moments.iter().all(|x| x.abs() <= 1e-6), "{:?}", m.moments);
        let far = GridFunction::constant(&b, 5.0);
        assert!(matches!(maximize_f(&far), Err(Error::Hypothesis(_, _))));
    }

    #[test]
    fn quotient_guards_degenerate_distance() {
        let s = sphere(16);
        let bb = Arc::new(QuadratureGrid::ball(8, &s).unwrap());
        let ext = Extension::discrete(Arc::new(crate::extension::PoissonOperator::new(s.clone(), bb).unwrap()));
        let q = stability_quotient(&GridFunction::constant(&s, 1.0), Side::Primal, &ext).unwrap();
        assert!(q.ratio.is_none());
        let y2 = zonal(2, &[0.0, 0.0, 1.0], d3()).unwrap();
        let u = GridFunction::from_fn(&s, move |w| 1.0 + 0.05 * y2.eval(w));
        let q = stability_quotient(&u, Side::Primal, &ext).unwrap();
        assert!(q.ratio.unwrap() > 0.0);
    }

    #[test]
    fn rejects_tiny_input() {
        let s = sphere(8);
        assert!(min_distance_primal(&GridFunction::constant(&s, 1e-14), DistanceMode::TwoTerm).is_err());
    }
}
