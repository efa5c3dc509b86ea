//! Frozen values with closed-form derivations.

use std::f64::consts::PI;
use std::sync::Arc;

use hwy_core::conformal::{
    conformal_factor, jacobian_ball, mobius_ball_apply, sigma, stereographic, stereographic_inverse, MobiusTransform,
};
use hwy_core::deficit::{deficit_primal, elementary_residual, zeta_primal, ElementaryKind};
use hwy_core::experiments::{fit_slope, quadratic_coefficient, HarmonicSeries};
use hwy_core::extension::{Extension, PoissonOperator};
use hwy_core::harmonics::{gegenbauer, zonal};
use hwy_core::quadrature::{norm, GaussRule, GridFunction, QuadratureGrid};
use hwy_core::Dim;

fn d3() -> Dim {
    Dim::new(3).unwrap()
}

#[test]
fn exponents_and_constants_in_three_dimensions() {
    let d = d3();
    assert_eq!((d.p(), d.q()), (4.0, 6.0));
    assert!((d.p_dual() - 4.0 / 3.0).abs() < 1e-15);
    assert!((d.q_dual() - 1.2).abs() < 1e-15);
    // (d^{d-1} |S^2|)^{1/3} = (9 * 4π)^{1/3}.
    assert!((d.sharp_constant() - 4.835975862049408).abs() < 1e-14);
    assert!((d.sharp_constant() - (36.0 * PI).powf(1.0 / 3.0)).abs() < 1e-14);
    // √2 (4π)^{-1/4}.
    assert!((d.pushforward_amplitude() - 0.7511255444649425).abs() < 1e-15);
    assert!((d.sphere_area() - 4.0 * PI).abs() < 1e-14);
}

#[test]
fn mobius_hand_values() {
    let t = MobiusTransform::ball(vec![0.0, 0.0, 0.5]).unwrap();
    // Φ_η(0) = -η, and J(0) = ((1-|η|²)/1)^3 = 0.75³.
    let z = mobius_ball_apply(&t, &[0.0; 3]).unwrap();
    assert_eq!(z, vec![0.0, 0.0, -0.5]);
    assert!((jacobian_ball(&t, &[0.0; 3]).unwrap() - 0.421875).abs() < 1e-15);
    // [1]_Φ(0) = J^{(d+2)/(2d)} = 0.421875^{5/6}.
    let f = conformal_factor(&[0.0, 0.0, 0.5], &[0.0; 3]).powf(2.5);
    assert!((f - 0.48713929).abs() < 1e-8);
    // Φ_η(η) = 0.
    let z = mobius_ball_apply(&t, &[0.0, 0.0, 0.5]).unwrap();
    assert!(z.iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn stereographic_and_sigma_hand_values() {
    assert_eq!(stereographic(&[0.0, 0.0]), vec![0.0, 0.0, 1.0]);
    // |ξ| = 1 lands on the equator.
    let w = stereographic(&[1.0, 0.0]);
    assert!((w[0] - 1.0).abs() < 1e-15 && w[2].abs() < 1e-15);
    assert_eq!(stereographic(&[f64::INFINITY, 0.0]), vec![0.0, 0.0, -1.0]);
    assert!(stereographic_inverse(&[0.0, 0.0, -1.0]).is_none());
    let y = sigma(&[0.0, 0.0, 1.0]).unwrap();
    assert!(y.iter().all(|v| v.abs() < 1e-15));
    assert!(sigma(&[0.0, 0.0, 0.0]).is_err());
}

#[test]
fn gegenbauer_and_zonal_normalization() {
    // C_2^{1/2}(t) = (3t² - 1)/2; Y_ℓ(axis) = √(2ℓ+1) on S² with dμ normalized.
    assert!((gegenbauer(2, 0.5, 0.3) - (3.0 * 0.09 - 1.0) / 2.0).abs() < 1e-15);
    for l in 0..8 {
        let y = zonal(l, &[0.0, 0.0, 1.0], d3()).unwrap();
        assert!(
            (y.eval(&[0.0, 0.0, 1.0]) - ((2 * l + 1) as f64).sqrt()).abs() < 1e-12,
            "{l}"
        );
    }
}

#[test]
fn gauss_legendre_is_exact_to_degree_2n_minus_1() {
    let r = GaussRule::legendre(6).unwrap();
    // ∫_{-1}^{1} t^10 dt / 2 = 1/11.
    let v: f64 = r.nodes.iter().zip(&r.weights).map(|(t, w)| w * t.powi(10)).sum();
    assert!((v - 1.0 / 11.0).abs() < 1e-15);
}

#[test]
fn extension_eigenvalues_and_series_transforms() {
    let s = Arc::new(QuadratureGrid::sphere(d3(), 16, 32).unwrap());
    let b = Arc::new(QuadratureGrid::ball(16, &s).unwrap());
    let op = PoissonOperator::new(s.clone(), b.clone()).unwrap();
    for l in 0..=6 {
        let y = zonal(l, &[0.6, 0.0, 0.8], d3()).unwrap().on_sphere(&s).unwrap();
        let q = op.apply_q(&y).unwrap();
        let ratio = norm(&q, 2.0).unwrap().powi(2);
        // The 16x32 grid resolves the kernel to a few parts in 1e6.
        let exact = 3.0 / (2.0 * l as f64 + 3.0);
        assert!((ratio / exact - 1.0).abs() < 3e-5, "{l}: {ratio}");
    }
    // S(r^{ℓ+2m} Y_ℓ) = d/(2ℓ+2m+d) Y_ℓ: ℓ = 2, m = 1 gives 3/9.
    let mut ser = HarmonicSeries::new(d3());
    ser.push(1.0, 2, 1, &[0.0, 0.0, 1.0]).unwrap();
    let w = [0.0, 0.6, 0.8];
    let y2 = zonal(2, &[0.0, 0.0, 1.0], d3()).unwrap().eval(&w);
    assert!((ser.eval_dual_extension(&w) - y2 / 3.0).abs() < 1e-14);
}

#[test]
fn quadratic_coefficient_is_twelve_sevenths() {
    assert!((quadratic_coefficient(d3(), 1.0, 3.0 / 7.0) - 12.0 / 7.0).abs() < 1e-14);
    // ‖Qφ‖² = 3/5 ‖φ‖² (a degree-1 direction) is the borderline.
    assert!(quadratic_coefficient(d3(), 1.0, 0.6).abs() < 1e-14);
    assert!(quadratic_coefficient(d3(), 1.0, 0.7) < 0.0);
}

#[test]
fn elementary_values() {
    // Weight |1+a|^{p-1} on [-2, 0], 1 elsewhere.
    assert_eq!(zeta_primal(1.0, 4.0), 1.0);
    assert!((zeta_primal(-0.5, 4.0) - 0.125).abs() < 1e-15);
    // LowerP, κ = 0.1, c = 0, a = 1: 16 - (1 + 4 + 1.8 (1 + 2)) = 5.6.
    let r = elementary_residual(ElementaryKind::LowerP, 1.0, 0.1, 0.0, d3()).unwrap();
    assert!((r - 5.6).abs() < 1e-12, "{r}");
}

#[test]
fn slope_fit_exact_power() {
    let xs: Vec<f64> = (1..=6).map(|i| i as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x.powf(1.2)).collect();
    let f = fit_slope(&xs, &ys).unwrap();
    assert!((f.exponent - 1.2).abs() < 1e-13 && (f.intercept - 0.5f64.ln()).abs() < 1e-12);
    assert_eq!(f.n_points, 6);
    assert_eq!(f.range, (1.0, 6.0));
}

#[test]
fn constants_have_zero_deficit() {
    let s = Arc::new(QuadratureGrid::sphere(d3(), 12, 24).unwrap());
    let b = Arc::new(QuadratureGrid::ball(12, &s).unwrap());
    let ext = Extension::discrete(Arc::new(PoissonOperator::new(s.clone(), b).unwrap()));
    let r = deficit_primal(&GridFunction::constant(&s, 2.5), &ext).unwrap();
    assert!(r.deficit.abs() < 1e-13);
}
