//! Derivative-free minimization (Nelder–Mead) and a small Newton solver.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::solve;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NelderMeadOptions {
    /// Stop once the simplex diameter (max-norm) drops below this.
    pub x_tol: f64,
    /// Stop once the spread of simplex values drops below this.
    pub f_tol: f64,
    pub max_iter: usize,
    /// Initial edge length along each coordinate.
    pub step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            x_tol: 1e-10,
            f_tol: 0.0,
            max_iter: 500,
            step: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Final simplex diameter.
    pub diameter: f64,
    /// `diameter <= x_tol`.
    pub converged: bool,
}

/// Nelder–Mead with the standard coefficients (1, 2, 1/2, 1/2). The best
/// vertex value never increases. Non-finite objective values are treated
/// as `+∞`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p, &mut evals)).collect();
    let diameter = |pts: &[Vec<f64>]| {
        let mut d: f64 = 0.0;
        for p in &pts[1..] {
            for (a, b) in p.iter().zip(&pts[0]) {
                d = d.max((a - b).abs());
            }
        }
        d
    };
    let mut iter = 0;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];
    loop {
        // Sort ascending by value.
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(core::cmp::Ordering::Equal));
        pts = idx.iter().map(|&i| pts[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        let diam = diameter(&pts);
        let spread = vals[n] - vals[0];
        if diam <= opts.x_tol || (opts.f_tol > 0.0 && spread <= opts.f_tol) || iter >= opts.max_iter {
            return Minimum {
                x: pts[0].clone(),
                value: vals[0],
                iterations: iter,
                evaluations: evals,
                diameter: diam,
                converged: diam <= opts.x_tol,
            };
        }
        iter += 1;
        centroid.iter_mut().for_each(|c| *c = 0.0);
        for p in &pts[..n] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / n as f64;
            }
        }
        let worst = pts[n].clone();
        let along = |t: f64, out: &mut Vec<f64>| {
            for i in 0..n {
                out[i] = centroid[i] + t * (worst[i] - centroid[i]);
            }
        };
        along(-1.0, &mut trial);
        let fr = eval(&trial, &mut evals);
        if fr < vals[0] {
            along(-2.0, &mut trial2);
            let fe = eval(&trial2, &mut evals);
            if fe < fr {
                pts[n].copy_from_slice(&trial2);
                vals[n] = fe;
            } else {
                pts[n].copy_from_slice(&trial);
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n].copy_from_slice(&trial);
            vals[n] = fr;
            continue;
        }
        // Contraction, outside or inside.
        let (t, bound) = if fr < vals[n] { (-0.5, fr) } else { (0.5, vals[n]) };
        along(t, &mut trial2);
        let fc = eval(&trial2, &mut evals);
        if fc < bound {
            pts[n].copy_from_slice(&trial2);
            vals[n] = fc;
            continue;
        }
        // Shrink towards the best vertex.
        for k in 1..=n {
            for i in 0..n {
                pts[k][i] = pts[0][i] + 0.5 * (pts[k][i] - pts[0][i]);
            }
            vals[k] = eval(&pts[k], &mut evals);
        }
    }
}

/// Newton iteration for `g(x) = 0` with a forward-difference Jacobian.
/// Returns the last iterate and its residual max-norm. A step is accepted
/// only if it reduces the residual (with up to 8 halvings).
pub fn newton_fd<G: FnMut(&[f64]) -> Vec<f64>>(
    mut g: G,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
    h: f64,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = g(&x);
    let maxnorm = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let mut res = maxnorm(&r);
    for _ in 0..max_iter {
        if res <= tol {
            break;
        }
        let mut jac = vec![0.0; r.len() * n];
        for j in 0..n {
            let mut xp = x.clone();
            xp[j] += h;
            let rp = g(&xp);
            for i in 0..r.len() {
                jac[i * n + j] = (rp[i] - r[i]) / h;
            }
        }
        let Some(step) = solve(&jac, &r) else { break };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..9 {
            let xn: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let rn = g(&xn);
            let resn = maxnorm(&rn);
            if resn < res {
                x = xn;
                r = rn;
                res = resn;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (x, res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::cell::RefCell;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions {
            max_iter: 5000,
            ..Default::default()
        };
        let m = nelder_mead(f, &[-1.2, 1.0], &opts);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-7 && (m.x[1] - 1.0).abs() < 1e-7, "{:?}", m.x);
    }

    #[test]
    fn quadratic_bowl_to_tolerance() {
        let f = |x: &[f64]| {
            x.iter()
                .enumerate()
                .map(|(i, v)| (i + 1) as f64 * (v - 0.3).powi(2))
                .sum::<f64>()
        };
        let m = nelder_mead(f, &[0.0; 3], &NelderMeadOptions::default());
        assert!(m.converged && m.diameter <= 1e-10);
        assert!(m.x.iter().all(|v| (v - 0.3).abs() < 1e-9));
    }

    #[test]
    fn best_value_is_monotone() {
        let best = RefCell::new(alloc::vec::Vec::new());
        let f = |x: &[f64]| {
            let v = libm::sin(3.0 * x[0]) + (x[0] * x[0] + x[1] * x[1]);
            best.borrow_mut().push(v);
            v
        };
        let m = nelder_mead(f, &[1.0, -1.0], &NelderMeadOptions::default());
        let seen = best.borrow();
        // Running minimum of evaluations ends at the reported value.
        let run = seen.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert_eq!(run, m.value);
    }

    #[test]
    fn iteration_cap() {
        let f = |x: &[f64]| x[0].abs().sqrt();
        let opts = NelderMeadOptions {
            max_iter: 3,
            ..Default::default()
        };
        let m = nelder_mead(f, &[5.0], &opts);
        assert_eq!(m.iterations, 3);
        assert!(!m.converged);
    }

    #[test]
    fn non_finite_values_are_avoided() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.5).powi(2) };
        let m = nelder_mead(f, &[0.05], &NelderMeadOptions::default());
        assert!((m.x[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn newton_solves_system() {
        let g = |x: &[f64]| vec![x[0] * x[0] + x[1] - 2.0, x[0] - x[1]];
        let (x, r) = newton_fd(g, &[2.0, 0.0], 1e-12, 30, 1e-7);
        assert!(r < 1e-12 && (x[0] - 1.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
    }
}
