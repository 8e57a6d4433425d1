//! Small numeric helpers shared by the decomposition, measurement and
//! phase-space code.

use num_complex::Complex64;

/// Largest `n` whose factorial is finite in `f64`.
pub const MAX_FACTORIAL: usize = 170;

pub fn ln_factorial(n: usize) -> f64 {
    // exact summation is cheap at the sizes used here and avoids a gamma dependency
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub fn sqrt_factorial(n: usize) -> f64 {
    if n <= MAX_FACTORIAL {
        (1..=n).fold(1.0f64, |acc, k| acc * (k as f64).sqrt())
    } else {
        f64::INFINITY
    }
}

/// `binomial(n, k)` in floating point.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// `e^{-|alpha|^2/2} alpha^n / sqrt(n!)` for `n = 0..=cutoff`.
pub fn coherent_fock_row(alpha: Complex64, cutoff: usize) -> Vec<Complex64> {
    let mut row = Vec::with_capacity(cutoff + 1);
    let mut v = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..=cutoff {
        row.push(v);
        v *= alpha / ((n + 1) as f64).sqrt();
    }
    row
}

/// Single level of [`coherent_fock_row`], evaluated in log space so that
/// large `n` underflows cleanly instead of producing `inf * 0`.
pub fn coherent_fock_amplitude(alpha: Complex64, n: usize) -> Complex64 {
    if n == 0 {
        return Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    }
    let r = alpha.norm();
    if r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let log_mod = -0.5 * r * r + n as f64 * r.ln() - 0.5 * ln_factorial(n);
    Complex64::from_polar(log_mod.exp(), n as f64 * alpha.arg())
}

/// Laguerre polynomial `L_n(x)` by the three-term recurrence.
pub fn laguerre(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 1 { x } else { p1 };
            let pm1 = if order == 1 { 1.0 } else { p0 };
            dp = n * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}
