//! Wigner functions of single-mode coherent superpositions and Fock states,
//! negativity integrals and the rank monotone.

use std::f64::consts::{FRAC_2_PI, PI};
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gauss_legendre, laguerre};
use crate::state::CoherentSuperposition;

/// Highest Fock level accepted by [`wigner_fock`].
pub const MAX_WIGNER_FOCK: usize = 60;

const BOUNDARY_TOL: f64 = 1e-12;
const PANEL_ORDER: usize = 12;
const ADAPT_TOL: f64 = 1e-11;
const MAX_DEPTH: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint(Complex64);

impl PhasePoint {
    pub fn new(kappa: Complex64) -> Result<Self> {
        if !(kappa.re.is_finite() && kappa.im.is_finite()) {
            return Err(Error::InvalidParameter(format!("phase point {kappa} is not finite")));
        }
        Ok(Self(kappa))
    }

    pub fn from_parts(re: f64, im: f64) -> Result<Self> {
        Self::new(Complex64::new(re, im))
    }

    pub fn kappa(&self) -> Complex64 {
        self.0
    }
}

/// Square `[-radius, radius]^2` with a Gauss-Legendre rule per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub radius: f64,
    pub points_per_axis: usize,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self { radius: 8.0, points_per_axis: 400 }
    }
}

impl QuadratureGrid {
    pub fn new(radius: f64, points_per_axis: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid radius must be positive, got {radius}")));
        }
        if points_per_axis < 16 {
            return Err(Error::InvalidParameter(format!(
                "need at least 16 points per axis, got {points_per_axis}"
            )));
        }
        Ok(Self { radius, points_per_axis })
    }

    /// Tensor-product Gauss-Legendre integral of `f` over the square.
    /// Rows are evaluated in parallel and summed in order.
    pub fn integrate<F>(&self, f: F) -> Complex64
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        let (x, w) = gauss_legendre(self.points_per_axis);
        let r = self.radius;
        let rows: Vec<Complex64> = x
            .par_iter()
            .zip(w.par_iter())
            .map(|(xi, wi)| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (yj, wj) in x.iter().zip(&w) {
                    acc += f(Complex64::new(r * xi, r * yj)) * (wi * wj);
                }
                acc
            })
            .collect();
        rows.iter().sum::<Complex64>() * (r * r)
    }
}

/// Wigner function of `|alpha><beta|`.
pub fn wigner_offdiag(alpha: Complex64, beta: Complex64, kappa: PhasePoint) -> Complex64 {
    let k = kappa.kappa();
    let exponent = -2.0 * k.norm_sqr() + 2.0 * k.conj() * alpha + 2.0 * k * beta.conj()
        - alpha * beta.conj()
        - 0.5 * (alpha.norm_sqr() + beta.norm_sqr());
    exponent.exp() * FRAC_2_PI
}

fn check_single_mode(psi: &CoherentSuperposition) -> Result<()> {
    if psi.modes() != 1 {
        return Err(Error::Dimension { expected: 1, found: psi.modes() });
    }
    Ok(())
}

fn superposition_value(amps: &[Complex64], labels: &[Complex64], kappa: PhasePoint) -> f64 {
    let mut total = 0.0;
    for i in 0..amps.len() {
        total += amps[i].norm_sqr() * wigner_offdiag(labels[i], labels[i], kappa).re;
        for j in i + 1..amps.len() {
            total += 2.0 * (amps[i] * amps[j].conj() * wigner_offdiag(labels[i], labels[j], kappa)).re;
        }
    }
    total
}

/// `W(kappa)` of a single-mode superposition, unnormalized states included.
pub fn wigner_superposition(psi: &CoherentSuperposition, kappa: PhasePoint) -> Result<f64> {
    check_single_mode(psi)?;
    Ok(superposition_value(psi.amplitudes(), psi.labels_flat(), kappa))
}

/// `(-1)^n (2/pi) e^{-2|kappa|^2} L_n(4|kappa|^2)`.
pub fn wigner_fock(n: usize, kappa: PhasePoint) -> Result<f64> {
    if n > MAX_WIGNER_FOCK {
        return Err(Error::Range(format!("Fock level {n} above {MAX_WIGNER_FOCK}")));
    }
    Ok(fock_radial(n, kappa.kappa().norm()))
}

fn fock_radial(n: usize, r: f64) -> f64 {
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign * FRAC_2_PI * (-2.0 * r * r).exp() * laguerre(n, 4.0 * r * r)
}

/// What [`wigner_negativity`] integrates.
#[derive(Debug, Clone)]
pub enum WignerSource<'a> {
    Fock(usize),
    Superposition(&'a CoherentSuperposition),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativityReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// `int |W|`.
    pub integral: f64,
    /// `log2` of the integral.
    pub log2: f64,
}

/// `int |W|` over the grid square and its base-2 logarithm.
///
/// Fock states are integrated radially with the panels split at the zeros of
/// `L_n(4 r^2)`. Superpositions use adaptive composite Gauss-Legendre panels,
/// starting from `points_per_axis / 16` panels per axis, since `|W|` has
/// kinks along its nodal lines that a single tensor rule resolves poorly.
pub fn wigner_negativity(which: &WignerSource<'_>, grid: &QuadratureGrid) -> Result<NegativityReport> {
    let r = grid.radius;
    let integral = match which {
        WignerSource::Fock(n) => {
            let n = *n;
            if n > MAX_WIGNER_FOCK {
                return Err(Error::Range(format!("Fock level {n} above {MAX_WIGNER_FOCK}")));
            }
            let boundary = fock_radial(n, r).abs();
            if boundary >= BOUNDARY_TOL {
                return Err(Error::RadiusTooSmall { boundary });
            }
            let report = fock_abs_integral(n, r);
            return Ok(NegativityReport { n: Some(n), integral: report, log2: report.log2() });
        }
        WignerSource::Superposition(psi) => {
            check_single_mode(psi)?;
            let amps = psi.amplitudes();
            let labels = psi.labels_flat();
            let f = |z: Complex64| superposition_value(amps, labels, PhasePoint(z)).abs();
            let boundary = boundary_max(&f, r);
            if boundary >= BOUNDARY_TOL {
                return Err(Error::RadiusTooSmall { boundary });
            }
            adaptive_square(&f, r, (grid.points_per_axis / 16).max(1))
        }
    };
    Ok(NegativityReport { n: None, integral, log2: integral.log2() })
}

fn boundary_max<F: Fn(Complex64) -> f64>(f: &F, r: f64) -> f64 {
    let steps = 400;
    let mut worst: f64 = 0.0;
    for i in 0..=steps {
        let t = -r + 2.0 * r * i as f64 / steps as f64;
        for z in [
            Complex64::new(t, r),
            Complex64::new(t, -r),
            Complex64::new(r, t),
            Complex64::new(-r, t),
        ] {
            worst = worst.max(f(z));
        }
    }
    worst
}

fn gl_segment<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    nodes.iter().zip(weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

fn fock_abs_integral(n: usize, radius: f64) -> f64 {
    let integrand = |r: f64| 2.0 * PI * r * fock_radial(n, r).abs();
    let mut breaks = vec![0.0];
    breaks.extend(laguerre_roots(n).into_iter().map(|x| x.sqrt() / 2.0).filter(|&r| r < radius));
    breaks.push(radius);
    let (nodes, weights) = gauss_legendre(32);
    let mut total = 0.0;
    for pair in breaks.windows(2) {
        // a few sub-panels per segment keep the Gaussian tail well resolved
        let pieces = 8;
        let h = (pair[1] - pair[0]) / pieces as f64;
        for p in 0..pieces {
            let a = pair[0] + p as f64 * h;
            total += gl_segment(&integrand, a, a + h, &nodes, &weights);
        }
    }
    total
}

/// Zeros of `L_n` on `(0, 4n + 2)` by scanning and bisection.
fn laguerre_roots(n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let upper = 4.0 * n as f64 + 2.0 + 2.0 * (n as f64).sqrt();
    let steps = 400 * n;
    let mut roots = Vec::with_capacity(n);
    let mut a = 0.0;
    let mut fa = laguerre(n, a);
    for i in 1..=steps {
        let b = upper * i as f64 / steps as f64;
        let fb = laguerre(n, b);
        if fa.signum() != fb.signum() {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = laguerre(n, mid);
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 * hi.max(1.0) {
                    break;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    roots
}

struct Panel {
    x0: f64,
    y0: f64,
    h: f64,
}

fn panel_rule<F: Fn(Complex64) -> f64>(f: &F, p: &Panel, nodes: &[f64], weights: &[f64]) -> f64 {
    let half = 0.5 * p.h;
    let (cx, cy) = (p.x0 + half, p.y0 + half);
    let mut acc = 0.0;
    for (xi, wi) in nodes.iter().zip(weights) {
        for (yj, wj) in nodes.iter().zip(weights) {
            acc += wi * wj * f(Complex64::new(cx + half * xi, cy + half * yj));
        }
    }
    acc * half * half
}

fn refine<F: Fn(Complex64) -> f64>(f: &F, p: Panel, coarse: f64, tol: f64, depth: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let h = 0.5 * p.h;
    let kids = [
        Panel { x0: p.x0, y0: p.y0, h },
        Panel { x0: p.x0 + h, y0: p.y0, h },
        Panel { x0: p.x0, y0: p.y0 + h, h },
        Panel { x0: p.x0 + h, y0: p.y0 + h, h },
    ];
    let values: Vec<f64> = kids.iter().map(|k| panel_rule(f, k, &rule.0, &rule.1)).collect();
    let fine: f64 = values.iter().sum();
    if (fine - coarse).abs() <= tol || depth >= MAX_DEPTH {
        return fine;
    }
    kids.into_iter()
        .zip(values)
        .map(|(k, v)| refine(f, k, v, 0.25 * tol, depth + 1, rule))
        .sum()
}

fn adaptive_square<F: Fn(Complex64) -> f64 + Sync>(f: &F, r: f64, panels: usize) -> f64 {
    let rule = gauss_legendre(PANEL_ORDER);
    let h = 2.0 * r / panels as f64;
    let tol = ADAPT_TOL / (panels * panels) as f64;
    let parts: Vec<f64> = (0..panels * panels)
        .into_par_iter()
        .map(|idx| {
            let p = Panel { x0: -r + (idx / panels) as f64 * h, y0: -r + (idx % panels) as f64 * h, h };
            let coarse = panel_rule(f, &p, &rule.0, &rule.1);
            refine(f, p, coarse, tol, 0, &rule)
        })
        .collect();
    parts.iter().sum()
}

/// `log2` of the number of nonzero amplitudes, an upper bound on the
/// minimal-rank monotone. Zero for a rank-1 or zero state.
pub fn rank_monotone(psi: &CoherentSuperposition) -> f64 {
    let k = psi.amplitudes().iter().filter(|a| a.norm_sqr() > 0.0).count();
    if k <= 1 {
        0.0
    } else {
        (k as f64).log2()
    }
}

/// `W` sampled on a uniform `points x points` grid over `[-radius, radius]^2`,
/// as `(kappa_re, kappa_im, W)` rows in row-major order.
pub fn wigner_grid(psi: &CoherentSuperposition, radius: f64, points: usize) -> Result<Vec<(f64, f64, f64)>> {
    check_single_mode(psi)?;
    if points < 2 {
        return Err(Error::InvalidParameter("need at least 2 grid points per axis".into()));
    }
    let step = 2.0 * radius / (points - 1) as f64;
    let amps = psi.amplitudes();
    let labels = psi.labels_flat();
    Ok((0..points * points)
        .into_par_iter()
        .map(|idx| {
            let re = -radius + (idx / points) as f64 * step;
            let im = -radius + (idx % points) as f64 * step;
            (re, im, superposition_value(amps, labels, PhasePoint(Complex64::new(re, im))))
        })
        .collect())
}

pub fn write_wigner_csv<W: Write>(mut w: W, rows: &[(f64, f64, f64)]) -> Result<()> {
    writeln!(w, "kappa_re,kappa_im,W")?;
    for (re, im, v) in rows {
        writeln!(w, "{re},{im},{v:e}")?;
    }
    Ok(())
}
