//! Numerical checks behind `hwy verify` and the acceptance suite.

use std::f64::consts::PI;
use std::sync::Arc;

use hwy_core::conformal::{
    act_on_sphere_function, conformal_factor, halfspace_pushforward, mobius_ball_apply, mobius_sphere_apply,
    poincare_extend, sigma_factor, sigma_inverse, HalfSpaceOptimizer, MobiusTransform,
};
use hwy_core::deficit::{
    calibrate_constant, deficit_dual, deficit_primal, elementary_grid, elementary_residual, orthogonality_residuals,
    ElementaryKind, Side,
};
use hwy_core::experiments::{
    family_quadratic, fit_slope, geometric_schedule, quadratic_coefficient, random_ball_series, random_sphere_series,
    sweep_dual, sweep_primal_p, with_constant, SweepRow, DUAL_BUBBLE_COUPLING, DUAL_BUBBLE_WINDOW,
    PRIMAL_BUBBLE_COUPLING, PRIMAL_BUBBLE_WINDOW,
};
use hwy_core::extension::apply_p;
use hwy_core::harmonics::zonal;
use hwy_core::quadrature::{norm, GaussRule, GridFunction};
use hwy_core::rng::{ball_point, uniform_in, unit_vector};
use hwy_core::search::{maximize_f, min_distance_primal, stability_quotient, DistanceMode};
use hwy_core::Dim;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Lab;
use crate::report::Check;

fn rng(lab: &Lab, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(lab.config.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt)
}

fn pole(d: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[d - 1] = 1.0;
    e
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Highest degree used for random band-limited inputs.
fn band(lab: &Lab) -> usize {
    lab.op.degree().min(8)
}

macro_rules! attempt {
    ($out:ident, $name:expr, $tol:expr, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => {
                $out.push(Check::failed(format!("{} ({err})", $name), $tol));
                return $out;
            }
        }
    };
    ($out:ident, $name:expr, $tol:expr, $e:expr; $extra:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => {
                $out.push(Check::failed(format!("{} ({err})", $name), $tol));
                return ($out, $extra);
            }
        }
    };
}

/// `‖QY_ℓ‖₂²/‖Y_ℓ‖₂² = d/(2ℓ+d)` for `ℓ ≤ 6`.
pub fn spectral_eigenvalues(lab: &Lab) -> Vec<Check> {
    let mut out = Vec::new();
    let d = lab.dim.f();
    for l in 0..=6usize.min(lab.op.degree()) {
        let name = format!("eigenvalue_l{l}");
        let y = attempt!(
            out,
            name,
            1e-6,
            zonal(l, &pole(lab.dim.get()), lab.dim).and_then(|h| h.on_sphere(&lab.sphere))
        );
        let q = attempt!(out, name, 1e-6, lab.op.apply_q(&y));
        let ratio = norm(&q, 2.0).unwrap().powi(2) / norm(&y, 2.0).unwrap().powi(2);
        let target = d / (2.0 * l as f64 + d);
        out.push(Check::near(name, ratio, target, 1e-6 * target));
    }
    out
}

/// Largest Rayleigh quotient of `Q` on random `φ ⊥ ℋ^l`.
pub fn spectral_gap_primal(lab: &Lab, samples: usize) -> Vec<Check> {
    let mut out = Vec::new();
    let mut r = rng(lab, 21);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let s = attempt!(
            out,
            "gap_primal",
            1e-6,
            random_sphere_series(&mut r, lab.dim, (2, band(lab)), 2, 1.0)
        );
        let phi = s.on_sphere(&lab.sphere);
        let q = attempt!(out, "gap_primal", 1e-6, lab.op.apply_q(&phi));
        worst = worst.max(norm(&q, 2.0).unwrap().powi(2) / norm(&phi, 2.0).unwrap().powi(2));
    }
    out.push(Check::at_most("gap_primal_max_rayleigh", worst, 3.0 / 7.0 + 1e-6));
    out
}

/// Largest Rayleigh quotient of the transposed `S` on random ball
/// functions orthogonal to `1, y_i`.
pub fn spectral_gap_dual(lab: &Lab, samples: usize) -> Vec<Check> {
    let mut out = Vec::new();
    let mut r = rng(lab, 22);
    let mut worst: f64 = 0.0;
    let deg = band(lab).min(4);
    for _ in 0..samples {
        let mut s = attempt!(out, "gap_dual", 5e-3, random_ball_series(&mut r, lab.dim, deg, 2, 1.0));
        attempt!(out, "gap_dual", 5e-3, s.orthogonalize_affine_ball());
        let phi = s.on_ball(&lab.ball);
        let sv = attempt!(out, "gap_dual", 5e-3, lab.op.apply_s_transpose(&phi));
        worst = worst.max(norm(&sv, 2.0).unwrap().powi(2) / norm(&phi, 2.0).unwrap().powi(2));
    }
    out.push(Check::at_most("gap_dual_max_rayleigh", worst, 3.0 / 7.0 + 5e-3));
    out
}

/// Nonnegativity on random inputs and vanishing on the optimizer orbit.
pub fn inequality_primal(lab: &Lab, samples: usize) -> Vec<Check> {
    let mut out = Vec::new();
    let ext = lab.extension();
    let mut r = rng(lab, 31);
    let mut min_def = f64::INFINITY;
    for _ in 0..samples {
        let amp = uniform_in(&mut r, 0.02, 0.5);
        let s = attempt!(
            out,
            "deficit_primal",
            1e-6,
            random_sphere_series(&mut r, lab.dim, (1, band(lab)), 1, amp)
        );
        let s = attempt!(out, "deficit_primal", 1e-6, with_constant(s, 1.0));
        let def = attempt!(
            out,
            "deficit_primal",
            1e-6,
            deficit_primal(&s.on_sphere(&lab.sphere), &ext)
        );
        min_def = min_def.min(def.deficit);
    }
    out.push(Check::at_least("deficit_primal_min_random", min_def, -1e-6));
    let one = GridFunction::constant(&lab.sphere, 1.0);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let rad = 0.7 * (k + 1) as f64 / 20.0;
        let eta: Vec<f64> = unit_vector(&mut r, lab.dim.get()).iter().map(|x| rad * x).collect();
        let t = attempt!(out, "deficit_primal_orbit", 1e-6, MobiusTransform::sphere(eta));
        let u = attempt!(out, "deficit_primal_orbit", 1e-6, act_on_sphere_function(&t, &one));
        let def = attempt!(out, "deficit_primal_orbit", 1e-6, deficit_primal(&u, &ext));
        worst = worst.max(def.deficit.abs());
    }
    out.push(Check::at_most("deficit_primal_orbit_max_abs", worst, 1e-6));
    out
}

pub fn inequality_dual(lab: &Lab, samples: usize) -> Vec<Check> {
    use hwy_core::conformal::act_on_ball_function;
    let mut out = Vec::new();
    let ext = lab.extension();
    let mut r = rng(lab, 32);
    let mut min_def = f64::INFINITY;
    let deg = band(lab).min(4);
    for _ in 0..samples {
        let amp = uniform_in(&mut r, 0.02, 0.3);
        let s = attempt!(
            out,
            "deficit_dual",
            3e-3,
            random_ball_series(&mut r, lab.dim, deg, 1, amp)
        );
        let s = attempt!(out, "deficit_dual", 3e-3, with_constant(s, 1.0));
        let def = attempt!(out, "deficit_dual", 3e-3, deficit_dual(&s.on_ball(&lab.ball), &ext));
        min_def = min_def.min(def.deficit);
    }
    out.push(Check::at_least("deficit_dual_min_random", min_def, -3e-3));
    let one = GridFunction::constant(&lab.ball, 1.0);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let rad = 0.7 * (k + 1) as f64 / 20.0;
        let eta: Vec<f64> = unit_vector(&mut r, lab.dim.get()).iter().map(|x| rad * x).collect();
        let t = attempt!(out, "deficit_dual_orbit", 3e-3, MobiusTransform::ball(eta));
        let v = attempt!(out, "deficit_dual_orbit", 3e-3, act_on_ball_function(&t, &one));
        let def = attempt!(out, "deficit_dual_orbit", 3e-3, deficit_dual(&v, &ext));
        worst = worst.max(def.deficit.abs());
    }
    out.push(Check::at_most("deficit_dual_orbit_max_abs", worst, 3e-3));
    out
}

/// Central differences with one Richardson step, `O(h⁴)`.
fn derivative<F: Fn(f64) -> Vec<f64>>(f: F, h: f64) -> Vec<f64> {
    let c = |h: f64| {
        let (a, b) = (f(h), f(-h));
        a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect::<Vec<f64>>()
    };
    let (d1, d2) = (c(h), c(h / 2.0));
    d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect()
}

fn det(mut a: Vec<f64>, n: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs()))
            .unwrap();
        if a[p * n + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for k in 0..n {
                a.swap(p * n + k, c * n + k);
            }
            det = -det;
        }
        det *= a[c * n + c];
        for i in c + 1..n {
            let m = a[i * n + c] / a[c * n + c];
            for k in c..n {
                a[i * n + k] -= m * a[c * n + k];
            }
        }
    }
    det
}

/// Group law, distance identities, the boundary Jacobian identity and
/// intertwining of `Q` with the Möbius actions.
pub fn conformal_machinery(lab: &Lab) -> Vec<Check> {
    let mut out = Vec::new();
    let d = lab.dim.get();
    let mut r = rng(lab, 41);
    let random_eta = |r: &mut ChaCha8Rng, rmax: f64| ball_point(r, d, rmax);

    // Φ_η ∘ Φ_{-η} = id.
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let eta = random_eta(&mut r, 0.9);
        let neg: Vec<f64> = eta.iter().map(|x| -x).collect();
        let y = ball_point(&mut r, d, 0.95);
        let a = attempt!(out, "group_inverse", 1e-12, MobiusTransform::ball(eta));
        let b = attempt!(out, "group_inverse", 1e-12, MobiusTransform::ball(neg));
        let z = attempt!(
            out,
            "group_inverse",
            1e-12,
            mobius_ball_apply(&b, &y).and_then(|z| mobius_ball_apply(&a, &z))
        );
        worst = worst.max(max_abs_diff(&z, &y));
    }
    out.push(Check::at_most("group_inverse_max_err", worst, 1e-12));

    // |T(x) - T(x')|² = J(x)^{1/n} |x - x'|² J(x')^{1/n}.
    let (mut ws, mut wb) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let eta = random_eta(&mut r, 0.8);
        let ts = attempt!(out, "distance_identity", 1e-10, MobiusTransform::sphere(eta.clone()));
        let tb = attempt!(out, "distance_identity", 1e-10, MobiusTransform::ball(eta.clone()));
        let (w1, w2) = (unit_vector(&mut r, d), unit_vector(&mut r, d));
        let a = attempt!(out, "distance_identity", 1e-10, mobius_sphere_apply(&ts, &w1));
        let b = attempt!(out, "distance_identity", 1e-10, mobius_sphere_apply(&ts, &w2));
        let lhs: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        let raw: f64 = w1.iter().zip(&w2).map(|(x, y)| (x - y).powi(2)).sum();
        let rhs = conformal_factor(&eta, &w1) * raw * conformal_factor(&eta, &w2);
        ws = ws.max((lhs - rhs).abs() / rhs.max(1e-300));
        let (y1, y2) = (ball_point(&mut r, d, 0.95), ball_point(&mut r, d, 0.95));
        let a = attempt!(out, "distance_identity", 1e-10, mobius_ball_apply(&tb, &y1));
        let b = attempt!(out, "distance_identity", 1e-10, mobius_ball_apply(&tb, &y2));
        let lhs: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        let raw: f64 = y1.iter().zip(&y2).map(|(x, y)| (x - y).powi(2)).sum();
        let rhs = conformal_factor(&eta, &y1) * raw * conformal_factor(&eta, &y2);
        wb = wb.max((lhs - rhs).abs() / rhs.max(1e-300));
    }
    out.push(Check::at_most("distance_identity_sphere_rel_err", ws, 1e-10));
    out.push(Check::at_most("distance_identity_ball_rel_err", wb, 1e-10));

    // J_Ψ(ω)^{1/(d-1)} from the tangential stretch of Ψ against
    // J_Φ(ω)^{1/d} from the determinant of DΦ, both by differences.
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let eta = random_eta(&mut r, 0.6);
        let ts = attempt!(out, "poincare_jacobian", 1e-10, MobiusTransform::sphere(eta));
        let tb = poincare_extend(&ts);
        let w = unit_vector(&mut r, d);
        let mut t = unit_vector(&mut r, d);
        let dot: f64 = t.iter().zip(&w).map(|(a, b)| a * b).sum();
        t.iter_mut().zip(&w).for_each(|(a, b)| *a -= dot * b);
        let nt = t.iter().map(|a| a * a).sum::<f64>().sqrt();
        t.iter_mut().for_each(|a| *a /= nt);
        let map = |x: &[f64]| {
            let mut o = vec![0.0; d];
            tb.apply_unchecked(x, &mut o);
            o
        };
        // Great-circle direction keeps the curve on the sphere.
        let curve = |s: f64| {
            let p: Vec<f64> = w.iter().zip(&t).map(|(a, b)| a * s.cos() + b * s.sin()).collect();
            let mut o = vec![0.0; d];
            ts.apply_unchecked(&p, &mut o);
            o
        };
        let dv = derivative(curve, 1e-3);
        let stretch = dv.iter().map(|a| a * a).sum::<f64>().sqrt();
        let mut jac = vec![0.0; d * d];
        for j in 0..d {
            let col = derivative(
                |s| {
                    let mut x = w.clone();
                    x[j] += s;
                    map(&x)
                },
                1e-3,
            );
            for i in 0..d {
                jac[i * d + j] = col[i];
            }
        }
        let jb = det(jac, d).abs().powf(1.0 / d as f64);
        worst = worst.max((stretch - jb).abs() / jb);
    }
    out.push(Check::at_most("poincare_jacobian_rel_err", worst, 1e-10));

    // Q((u)_Ψ) = J_Φ^{(d-2)/(2d)} (Qu)∘Φ, the right side in closed form.
    let mut worst: f64 = 0.0;
    let mut worst_one: f64 = 0.0;
    let one = GridFunction::constant(&lab.sphere, 1.0);
    for k in 0..6 {
        let rad = if k % 2 == 0 { 0.25 } else { 0.5 };
        let eta: Vec<f64> = unit_vector(&mut r, d).iter().map(|x| rad * x).collect();
        let t = attempt!(out, "intertwining", 1e-5, MobiusTransform::sphere(eta));
        let s = attempt!(
            out,
            "intertwining",
            1e-5,
            random_sphere_series(&mut r, lab.dim, (0, 4), 1, 0.5)
        );
        for (u, slot) in [(s.on_sphere(&lab.sphere), &mut worst), (one.clone(), &mut worst_one)] {
            let tu = attempt!(out, "intertwining", 1e-5, act_on_sphere_function(&t, &u));
            let q = attempt!(out, "intertwining", 1e-5, lab.op.apply_q(&tu));
            let exact = GridFunction::from_closure(&lab.ball, tu.extension().unwrap().clone());
            *slot = slot.max(max_abs_diff(q.values(), exact.values()));
        }
    }
    out.push(Check::at_most("intertwining_band_limited_max_dev", worst, 1e-5));
    out.push(Check::at_most("intertwining_constant_max_dev", worst_one, 1e-5));
    out
}

/// `|⟨u, Sv⟩ - ⟨Qu, v⟩|` with `S` the transposed kernel.
pub fn adjointness(lab: &Lab, samples: usize) -> Vec<Check> {
    let mut out = Vec::new();
    let mut r = rng(lab, 51);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let s = attempt!(
            out,
            "adjointness",
            1e-12,
            random_sphere_series(&mut r, lab.dim, (0, band(lab)), 1, 1.0)
        );
        let b = attempt!(
            out,
            "adjointness",
            1e-12,
            random_ball_series(&mut r, lab.dim, 4, 2, 1.0)
        );
        let res = attempt!(
            out,
            "adjointness",
            1e-12,
            lab.op
                .adjointness_residual(&s.on_sphere(&lab.sphere), &b.on_ball(&lab.ball))
        );
        worst = worst.max(res);
    }
    out.push(Check::at_most("adjointness_max_residual", worst, 1e-12));
    out
}

/// Deficit of `1 + εY₂` against its second-order expansion.
pub fn quadratic_family(lab: &Lab) -> Vec<Check> {
    let mut out = Vec::new();
    let ext = lab.extension();
    let y2 = attempt!(
        out,
        "quadratic",
        0.05,
        zonal(2, &pole(lab.dim.get()), lab.dim).and_then(|h| h.on_sphere(&lab.sphere))
    );
    let d = lab.dim.f();
    let want = quadratic_coefficient(lab.dim, 1.0, d / (4.0 + d));
    let eps = 0.01;
    let u = attempt!(out, "quadratic", 0.05, family_quadratic(eps, &y2));
    let def = attempt!(out, "quadratic", 0.05, deficit_primal(&u, &ext));
    let c = def.deficit / (eps * eps);
    out.push(Check::near("quadratic_coefficient_eps_0.01", c, want, 0.05 * want));
    let sched = geometric_schedule(1e-3, 1e-1, 9).unwrap();
    let mut defs = Vec::new();
    for &e in &sched {
        let u = attempt!(out, "quadratic_slope", 0.05, family_quadratic(e, &y2));
        defs.push(attempt!(out, "quadratic_slope", 0.05, deficit_primal(&u, &ext)).deficit);
    }
    let fit = attempt!(out, "quadratic_slope", 0.05, fit_slope(&sched, &defs));
    out.push(Check::near("quadratic_deficit_slope", fit.exponent, 2.0, 0.05));
    out
}

/// Slope fit of the deficit and boundedness of the matching-power quotient.
pub fn sweep_checks(prefix: &str, rows: &[SweepRow], target: f64, tol: f64) -> Vec<Check> {
    let mut out = Vec::new();
    let xs: Vec<f64> = rows.iter().map(|r| r.parameter).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.deficit).collect();
    match fit_slope(&xs, &ys) {
        Ok(f) => out.push(Check::near(format!("{prefix}_deficit_slope"), f.exponent, target, tol)),
        Err(e) => out.push(Check::failed(format!("{prefix}_deficit_slope ({e})"), tol)),
    }
    let q: Vec<f64> = rows.iter().map(|r| r.quotient).collect();
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = q.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if min > 0.0 && max.is_finite() {
        max / min
    } else {
        f64::INFINITY
    };
    out.push(Check::at_most(
        format!("{prefix}_quotient_max_over_min"),
        spread,
        QUOTIENT_SPREAD,
    ));
    out
}

/// A quotient drifting by more than this factor across one sweep counts
/// as unbounded.
pub const QUOTIENT_SPREAD: f64 = 10.0;

pub fn bubble_primal(lab: &Lab, points: usize) -> (Vec<SweepRow>, Vec<Check>) {
    let sched = geometric_schedule(PRIMAL_BUBBLE_WINDOW.0, PRIMAL_BUBBLE_WINDOW.1, points).unwrap();
    match sweep_primal_p(lab.dim, &sched, PRIMAL_BUBBLE_COUPLING) {
        Ok(rows) => {
            let c = sweep_checks("primal_bubble", &rows, lab.dim.p(), 0.3);
            (rows, c)
        }
        Err(e) => (Vec::new(), vec![Check::failed(format!("primal_bubble ({e})"), 0.3)]),
    }
}

pub fn bubble_dual(lab: &Lab, points: usize) -> (Vec<SweepRow>, Vec<Check>) {
    let sched = geometric_schedule(DUAL_BUBBLE_WINDOW.0, DUAL_BUBBLE_WINDOW.1, points).unwrap();
    match sweep_dual(lab.dim, &sched, DUAL_BUBBLE_COUPLING) {
        Ok(rows) => {
            let c = sweep_checks("dual_bubble", &rows, lab.dim.q_dual(), 0.15);
            (rows, c)
        }
        Err(e) => (Vec::new(), vec![Check::failed(format!("dual_bubble ({e})"), 0.15)]),
    }
}

/// Calibration of the four elementary inequalities at `κ`.
pub fn elementary(dim: Dim, kappa: f64, points: usize) -> Vec<Check> {
    let mut out = Vec::new();
    let g = elementary_grid(1e-6, 1e4, points);
    let g2 = elementary_grid(1e-6, 1e4, 2 * points);
    for kind in [
        ElementaryKind::LowerP,
        ElementaryKind::UpperQ,
        ElementaryKind::LowerQPrime,
        ElementaryKind::UpperPPrime,
    ] {
        let tag = kind.tag();
        let (a, b) = match (
            calibrate_constant(kind, kappa, &g, dim),
            calibrate_constant(kind, kappa, &g2, dim),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                out.push(Check::failed(format!("{tag}_constant ({e})"), 0.0));
                continue;
            }
        };
        let Some(c) = a.constant else {
            out.push(Check::failed(format!("{tag}_constant (infeasible)"), 0.0));
            continue;
        };
        if kind.is_lower() {
            out.push(Check::at_least(
                format!("{tag}_constant_positive"),
                c,
                f64::MIN_POSITIVE,
            ));
        } else {
            out.push(Check::at_most(format!("{tag}_constant_finite"), c, f64::MAX));
        }
        let worst = g
            .iter()
            .filter(|x| **x != 0.0)
            .map(|&x| elementary_residual(kind, x, kappa, c, dim).unwrap_or(f64::NEG_INFINITY))
            .fold(f64::INFINITY, f64::min);
        out.push(Check::at_least(format!("{tag}_min_residual"), worst, -1e-12));
        let rel = b.constant.map_or(f64::INFINITY, |c2| (c2 - c).abs() / c.abs());
        out.push(Check::at_most(format!("{tag}_refinement_rel_change"), rel, 0.01));
    }
    out
}

/// Orthogonality of the remainder after the `L²` distance search.
/// Also returns the largest `‖r‖_p` at the L² minimizer over the direct
/// L^p minimum, which is reported rather than checked.
pub fn orthogonality_primal(lab: &Lab, samples: usize) -> (Vec<Check>, f64) {
    let mut out = Vec::new();
    let mut r = rng(lab, 91);
    let mut worst: f64 = 0.0;
    let mut comparability: f64 = 0.0;
    for _ in 0..samples {
        let amp = uniform_in(&mut r, 0.02, 0.2);
        let s = attempt!(out, "orthogonality_primal", 10.0, random_sphere_series(&mut r, lab.dim, (1, 4), 1, amp); comparability);
        let s = attempt!(out, "orthogonality_primal", 10.0, with_constant(s, 1.0); comparability);
        let eta = ball_point(&mut r, lab.dim.get(), 0.5);
        let t = attempt!(out, "orthogonality_primal", 10.0, MobiusTransform::sphere(eta); comparability);
        let u = attempt!(out, "orthogonality_primal", 10.0, act_on_sphere_function(&t, &s.on_sphere(&lab.sphere)); comparability);
        let res =
            attempt!(out, "orthogonality_primal", 10.0, min_distance_primal(&u, DistanceMode::L2Only); comparability);
        let tt = attempt!(out, "orthogonality_primal", 10.0, MobiusTransform::sphere(res.eta.clone()); comparability);
        let moved = attempt!(out, "orthogonality_primal", 10.0, act_on_sphere_function(&tt, &u); comparability);
        let rem = attempt!(
            out,
            "orthogonality_primal",
            10.0,
            moved.scaled(res.lambda).plus(&GridFunction::constant(&lab.sphere, -1.0)); comparability
        );
        let o = attempt!(out, "orthogonality_primal", 10.0, orthogonality_residuals(&rem); comparability);
        worst = worst.max(o.ratio());
        if let (Ok(direct), Some(at_l2)) = (min_distance_primal(&u, DistanceMode::LpOnly), res.value_p) {
            let p = lab.dim.p();
            comparability = comparability.max((at_l2 / direct.value).powf(1.0 / p));
        }
    }
    out.push(Check::at_most("orthogonality_primal_max_ratio", worst, 10.0));
    (out, comparability)
}

/// Ball moments of `[v]_Φ - 1` at the maximizer of `F_v`.
pub fn orthogonality_dual(lab: &Lab, samples: usize) -> Vec<Check> {
    let mut out = Vec::new();
    let mut r = rng(lab, 92);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let amp = uniform_in(&mut r, 0.01, 0.1);
        let s = attempt!(
            out,
            "orthogonality_dual",
            1e-6,
            random_ball_series(&mut r, lab.dim, 3, 1, amp)
        );
        let s = attempt!(out, "orthogonality_dual", 1e-6, with_constant(s, 1.0));
        let m = attempt!(out, "orthogonality_dual", 1e-6, maximize_f(&s.on_ball(&lab.ball)));
        worst = m.moments.iter().fold(worst, |w, x| w.max(x.abs()));
    }
    out.push(Check::at_most("orthogonality_dual_max_moment", worst, 1e-6));
    out
}

/// `|S^{k-1}|`, the unit sphere of `R^k`.
fn sphere_area_in(k: usize) -> f64 {
    match k {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 2.0) * sphere_area_in(k - 2),
    }
}

/// `∫₀^∞ g(ρ) dρ` by Gauss-Legendre after `ρ = tan(πs/2)`.
fn half_line(n: usize, g: impl Fn(f64) -> f64) -> f64 {
    let rule = GaussRule::legendre(n).expect("legendre rule");
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(t, w)| {
            let s = 0.5 * (t + 1.0);
            let a = 0.5 * PI * s;
            let rho = a.tan();
            // Weights sum to 1 on [-1, 1], i.e. they already carry ds.
            w * g(rho) * 0.5 * PI / (a.cos() * a.cos())
        })
        .sum()
}

/// Pushforward of the half-space optimizer and the norm relations of the
/// conformal transport.
pub fn halfspace_bridge(lab: &Lab) -> Vec<Check> {
    let mut out = Vec::new();
    let dim = lab.dim;
    let d = dim.get();
    let df = dim.f();
    let (p, q) = (dim.p(), dim.q());
    let a = dim.pushforward_amplitude();
    let opt = attempt!(
        out,
        "pushforward",
        1e-8,
        HalfSpaceOptimizer::new(a, 1.0, vec![0.0; d - 1])
    );
    let (o1, o2) = (opt.clone(), opt.clone());
    let u = attempt!(
        out,
        "pushforward",
        1e-8,
        halfspace_pushforward(
            &lab.sphere,
            Arc::new(move |x: &[f64]| o1.eval(x)),
            Some(Arc::new(move |x: &[f64]| o2.poisson_extension(x)))
        )
    );
    let dev = u.values().iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    out.push(Check::at_most("pushforward_max_dev_from_one", dev, 1e-8));

    // ‖f‖_{L^p(R^{d-1})} by radial quadrature against ‖u‖_{L^p(dμ)}.
    let s_low = sphere_area_in(d - 1);
    let fp = s_low
        * half_line(400, |rho| {
            let mut xi = vec![0.0; d - 1];
            xi[0] = rho;
            opt.eval(&xi).abs().powf(p) * rho.powi(d as i32 - 2)
        });
    let fnorm = fp.powf(1.0 / p);
    let unorm = norm(&u, p).unwrap();
    out.push(Check::near("confinv_sphere_norm", unorm, fnorm, 1e-6));

    // ‖Pf‖_{L^q(R^d_+)}^q = |S|^{-q/p} |B| ‖Qu‖_{L^q(dν)}^q.
    let qu = attempt!(out, "confinv_ball", 1e-6, lab.op.apply_q(&u));
    let area = dim.sphere_area();
    let ball_side = area.powf(-q / p) * (area / df) * norm(&qu, q).unwrap().powf(q);
    let pf_q = half_line(200, |xd| {
        s_low
            * half_line(200, |rho| {
                let mut x = vec![0.0; d];
                x[0] = rho;
                x[d - 1] = xd;
                opt.poisson_extension(&x).abs().powf(q) * rho.powi(d as i32 - 2)
            })
    });
    out.push(Check::near("confinv_ball_norm_rel", ball_side / pf_q, 1.0, 1e-6));

    // Same integral by transport through Σ on the ball grid.
    let transported: f64 = lab
        .ball
        .nodes()
        .chunks(d)
        .zip(lab.ball.weights())
        .map(|(y, w)| {
            let x = sigma_inverse(y).unwrap();
            w * opt.poisson_extension(&x).abs().powf(q) * sigma_factor(&x).powf(-df)
        })
        .sum::<f64>()
        * area
        / df;
    out.push(Check::near("confinv_transport_rel", transported / pf_q, 1.0, 1e-6));

    // Equality in the sharp inequality.
    let c = dim.sharp_constant();
    out.push(Check::near("sharp_equality_rel", c * pf_q.powf(p / q) / fp, 1.0, 1e-6));
    if d == 3 {
        out.push(Check::near("sharp_constant_d3", c, (36.0 * PI).powf(1.0 / 3.0), 1e-12));
    }

    // P by transport against the closed form.
    let mut worst: f64 = 0.0;
    let o3 = opt.clone();
    let field: hwy_core::quadrature::Field = Arc::new(move |x: &[f64]| o3.eval(x));
    for k in 0..5 {
        let mut x = vec![0.0; d];
        x[0] = 0.3 * k as f64 - 0.4;
        x[d - 1] = 0.2 + 0.5 * k as f64;
        let v = attempt!(out, "apply_p", 1e-6, apply_p(&lab.op, field.clone(), &x));
        let exact = opt.poisson_extension(&x);
        worst = worst.max((v - exact).abs() / exact);
    }
    out.push(Check::at_most("apply_p_rel_err", worst, 1e-6));
    out
}

/// Smallest stability quotient over a random perturbation ensemble.
pub fn stability_witness(lab: &Lab, samples: usize) -> (Vec<Check>, f64) {
    let mut out = Vec::new();
    let ext = lab.extension();
    let mut r = rng(lab, 111);
    let mut min_q = f64::INFINITY;
    for _ in 0..samples {
        let amp = (uniform_in(&mut r, (1e-2f64).ln(), (0.3f64).ln())).exp();
        let s = match random_sphere_series(&mut r, lab.dim, (1, band(lab).min(6)), 1, amp)
            .and_then(|s| with_constant(s, 1.0))
        {
            Ok(s) => s,
            Err(e) => {
                out.push(Check::failed(format!("stability_witness ({e})"), 0.0));
                return (out, f64::NAN);
            }
        };
        let u = s.on_sphere(&lab.sphere);
        match stability_quotient(&u, Side::Primal, &ext) {
            Ok(sq) => {
                if let Some(q) = sq.ratio {
                    min_q = min_q.min(q);
                }
            }
            Err(e) => {
                out.push(Check::failed(format!("stability_witness ({e})"), 0.0));
                return (out, f64::NAN);
            }
        }
    }
    out.push(Check {
        name: "stability_witness_min_quotient".into(),
        value: min_q,
        tolerance: 0.0,
        pass: min_q > 0.0 && min_q.is_finite(),
        compare: "gt",
        target: None,
    });
    (out, min_q)
}
