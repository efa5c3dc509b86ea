use std::sync::Arc;

use proptest::prelude::*;

use hwy_core::conformal::MobiusTransform;
use hwy_core::deficit::{calibrate_constant, deficit_primal, elementary_grid, elementary_residual, ElementaryKind};
use hwy_core::experiments::fit_slope;
use hwy_core::extension::{Extension, PoissonOperator};
use hwy_core::harmonics::zonal;
use hwy_core::optimize::{nelder_mead, NelderMeadOptions};
use hwy_core::quadrature::{GridFunction, QuadratureGrid};
use hwy_core::Dim;

fn d3() -> Dim {
    Dim::new(3).unwrap()
}

/// Points of the ball of radius `r`.
fn ball_point(r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 3).prop_map(move |v| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1.0 {
            v.iter().map(|x| x / n * r).collect()
        } else {
            v.iter().map(|x| x * r).collect()
        }
    })
}

fn apply(t: &MobiusTransform, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    t.apply_unchecked(y, &mut out);
    out
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn inverse_undoes_transform(eta in ball_point(0.9), y in ball_point(0.95)) {
        let t = MobiusTransform::ball(eta).unwrap();
        let back = apply(&t.inverse(), &apply(&t, &y));
        prop_assert!(dist2(&back, &y).sqrt() < 1e-10);
    }

    #[test]
    fn distance_scales_by_conformal_factors(eta in ball_point(0.9), x in ball_point(0.95), y in ball_point(0.95)) {
        let t = MobiusTransform::ball(eta).unwrap();
        let lhs = dist2(&apply(&t, &x), &apply(&t, &y));
        let rhs = t.conformal_factor(&x) * t.conformal_factor(&y) * dist2(&x, &y);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-12));
    }

    #[test]
    fn conformal_factor_chain_rule(a in ball_point(0.8), b in ball_point(0.8), y in ball_point(0.9)) {
        let s = MobiusTransform::ball(a).unwrap();
        let t = MobiusTransform::ball(b).unwrap();
        let ts = t.compose(&s);
        let lhs = ts.conformal_factor(&y);
        let rhs = t.conformal_factor(&apply(&s, &y)) * s.conformal_factor(&y);
        prop_assert!((lhs / rhs - 1.0).abs() < 1e-9);
        let direct = apply(&t, &apply(&s, &y));
        prop_assert!(dist2(&apply(&ts, &y), &direct).sqrt() < 1e-10);
    }

    #[test]
    fn slope_fit_recovers_power_laws(k in 0.2f64..4.0, c in 1e-3f64..1e3, lo in 1e-4f64..1e-2) {
        let xs: Vec<f64> = (0..7).map(|i| lo * 1.8f64.powi(i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(k)).collect();
        let f = fit_slope(&xs, &ys).unwrap();
        prop_assert!((f.exponent - k).abs() < 1e-9);
        prop_assert!(f.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum(c in prop::collection::vec(-2.0f64..2.0, 3), w in prop::collection::vec(0.5f64..5.0, 3)) {
        let f = |x: &[f64]| x.iter().zip(&c).zip(&w).map(|((x, c), w)| w * (x - c) * (x - c)).sum::<f64>();
        let m = nelder_mead(f, &[0.0; 3], &NelderMeadOptions { max_iter: 5000, ..Default::default() });
        prop_assert!(m.converged);
        prop_assert!(dist2(&m.x, &c).sqrt() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn primal_deficit_is_nonnegative(coefs in prop::collection::vec(-0.6f64..0.6, 4), eta in ball_point(0.6)) {
        let s = Arc::new(QuadratureGrid::sphere(d3(), 16, 32).unwrap());
        let b = Arc::new(QuadratureGrid::ball(12, &s).unwrap());
        let ext = Extension::discrete(Arc::new(PoissonOperator::new(s.clone(), b).unwrap()));
        let mut u = GridFunction::constant(&s, 1.0);
        for (l, c) in coefs.iter().enumerate() {
            let y = zonal(l + 1, &[0.6, 0.0, 0.8], d3()).unwrap().on_sphere(&s).unwrap();
            u = u.plus(&y.scaled(*c)).unwrap();
        }
        let t = MobiusTransform::sphere(eta).unwrap();
        let u = hwy_core::conformal::act_on_sphere_function(&t, &u).unwrap();
        let r = deficit_primal(&u, &ext).unwrap();
        prop_assert!(r.deficit >= -1e-6, "{}", r.deficit);
    }

    #[test]
    fn calibrated_constants_are_admissible(kappa in 0.05f64..0.95, a in -50.0f64..50.0) {
        let grid = elementary_grid(1e-6, 1e4, 400);
        for kind in [ElementaryKind::LowerP, ElementaryKind::UpperQ, ElementaryKind::LowerQPrime, ElementaryKind::UpperPPrime] {
            let cal = calibrate_constant(kind, kappa, &grid, d3()).unwrap();
            let c = cal.constant.unwrap();
            prop_assert!(cal.min_residual >= -1e-12);
            for x in &grid {
                prop_assert!(elementary_residual(kind, *x, kappa, c, d3()).unwrap() >= -1e-12);
            }
            // Off-grid points should be close to admissible as well.
            let r = elementary_residual(kind, a, kappa, c, d3()).unwrap();
            prop_assert!(r >= -1e-3 * (1.0 + a.abs()).powf(6.0), "{kind:?} {a} {r}");
        }
    }
}
