//! Small vector helpers shared by the modules.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn powf(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else if e == 2.0 {
        x * x
    } else if e == 4.0 {
        let s = x * x;
        s * s
    } else if e == 0.5 {
        libm::sqrt(x)
    } else if e == 2.5 {
        x * x * libm::sqrt(x)
    } else if e == 6.0 {
        let s = x * x;
        s * s * s
    } else {
        libm::pow(x, e)
    }
}

/// Pairwise summation: fixed order, so results do not depend on how
/// callers chunk the work.
pub fn pairwise_sum<F: Fn(usize) -> f64>(n: usize, f: &F) -> f64 {
    fn go<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= 32 {
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            s
        } else {
            let mid = lo + (hi - lo) / 2;
            go(lo, mid, f) + go(mid, hi, f)
        }
    }
    if n == 0 {
        0.0
    } else {
        go(0, n, f)
    }
}
