//! Finite coherent-state decompositions of Fock-basis objects.
//!
//! A state with support on levels `0..=N` is reproduced exactly on those
//! levels by `N + 1` coherent states on a circle of radius `eps`; the
//! leftover amplitude sits on levels `> N` and shrinks like `eps^(N+1)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::special::{binomial, ln_factorial, sqrt_factorial};
use crate::state::{inner_product, norm_squared, CoherentSuperposition};

pub const DEFAULT_EPSILON: f64 = 0.2;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn root_of_unity(k: usize, n: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "epsilon must be positive and finite, got {eps}"
        )))
    }
}

/// Amplitudes `a_0..a_N` of a state supported on at most `N` photons.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amplitudes: Vec<Complex64>,
}

impl FockVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("Fock amplitudes must be finite".into()));
        }
        if amplitudes.iter().all(|a| a.norm_sqr() == 0.0) {
            return Err(Error::Degenerate("Fock vector has no nonzero entry".into()));
        }
        Ok(Self { amplitudes })
    }

    pub fn basis(n: usize) -> Self {
        let mut amplitudes = vec![c(0.0, 0.0); n + 1];
        amplitudes[n] = c(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Highest level `N` (the vector has `N + 1` entries).
    pub fn max_level(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// `c_k = e^{eps^2/2}/(N+1) sum_n sqrt(n!) a_n / eps^n e^{-2 pi i n k/(N+1)}`.
pub fn fourier_coefficients(amplitudes: &[Complex64], eps: f64) -> Result<Vec<Complex64>> {
    check_eps(eps)?;
    let size = amplitudes.len();
    let prefactor = (0.5 * eps * eps).exp() / size as f64;
    let mut scaled = Vec::with_capacity(size);
    for (n, &a) in amplitudes.iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            scaled.push(c(0.0, 0.0));
            continue;
        }
        let weight = (0.5 * ln_factorial(n) - n as f64 * eps.ln()).exp() * prefactor;
        let value = a * weight;
        if !value.is_finite() {
            return Err(Error::Overflow { level: n });
        }
        scaled.push(value);
    }
    let coefficients: Vec<Complex64> = (0..size)
        .map(|k| {
            scaled
                .iter()
                .enumerate()
                .map(|(n, &s)| s * root_of_unity((n * k) % size, size).conj())
                .sum()
        })
        .collect();
    if let Some(level) = coefficients.iter().position(|v| !v.is_finite()) {
        return Err(Error::Overflow { level });
    }
    Ok(coefficients)
}

/// Unnormalized construction that reproduces `a_0..a_N` exactly on levels `0..=N`.
pub fn fock_vector_construction(fv: &FockVector, eps: f64) -> Result<CoherentSuperposition> {
    let size = fv.amplitudes.len();
    let amplitudes = fourier_coefficients(&fv.amplitudes, eps)?;
    let labels = (0..size).map(|k| root_of_unity(k, size) * eps).collect();
    Ok(CoherentSuperposition::from_raw(1, amplitudes, labels))
}

/// Normalized rank-`N + 1` approximation of the state with amplitudes `fv`.
pub fn decompose_fock_vector(fv: &FockVector, eps: f64) -> Result<CoherentSuperposition> {
    let raw = fock_vector_construction(fv, eps)?;
    crate::state::normalize(&raw)
}

/// Fidelity of [`decompose_fock_vector`] to the normalized target.
///
/// Levels `0..=N` of the unnormalized construction equal `a`, so the overlap
/// with the target is `|a|^2` and the fidelity is `|a|^2 / |construction|^2`.
pub fn fock_vector_fidelity(fv: &FockVector, eps: f64) -> Result<f64> {
    let raw = fock_vector_construction(fv, eps)?;
    Ok(fv.norm_squared() / norm_squared(&raw))
}

/// `n! sum_{k>=0} eps^{2k(n+1)} / (k(n+1)+n)!`, the squared norm of the
/// unnormalized rank-`n + 1` construction of `|n>`.
pub fn fock_normalization(n: usize, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let ln_nfact = ln_factorial(n);
    let mut total = 0.0;
    for k in 0.. {
        let level = k * (n + 1) + n;
        let term = (ln_nfact + 2.0 * (level - n) as f64 * eps.ln() - ln_factorial(level)).exp();
        total += term;
        if term <= total * 1e-18 || level > 4000 {
            break;
        }
    }
    Ok(total)
}

/// `|<n|decompose_fock(n, eps)>|^2`.
pub fn fock_fidelity(n: usize, eps: f64) -> Result<f64> {
    Ok(1.0 / fock_normalization(n, eps)?)
}

/// Unnormalized construction of `|n>` with unit amplitude on level `n`.
pub fn fock_construction(n: usize, eps: f64) -> Result<CoherentSuperposition> {
    fock_vector_construction(&FockVector::basis(n), eps)
}

/// Normalized rank-`n + 1` approximation of `|n>`.
pub fn decompose_fock(n: usize, eps: f64) -> Result<CoherentSuperposition> {
    let raw = fock_construction(n, eps)?;
    let scale = 1.0 / fock_normalization(n, eps)?.sqrt();
    Ok(raw.scale(c(scale, 0.0)).with_normalized_flag(true))
}

/// `|n_1> (x) ... (x) |n_m>` with each nonzero level decomposed and vacuum
/// modes kept as the exact label `0`.
pub fn decompose_fock_product(ns: &[usize], eps: f64) -> Result<CoherentSuperposition> {
    if ns.is_empty() {
        return Err(Error::InvalidParameter("need at least one mode".into()));
    }
    let mut state: Option<CoherentSuperposition> = None;
    for &n in ns {
        let factor = if n == 0 {
            CoherentSuperposition::vacuum(1)
        } else {
            decompose_fock(n, eps)?
        };
        state = Some(match state {
            None => factor,
            Some(s) => crate::state::tensor(&s, &factor),
        });
    }
    Ok(state.expect("nonempty"))
}

/// Unnormalized product construction whose `sum(ns)`-photon sector is exactly
/// `|n_1, ..., n_m>`; every other component has more photons.
pub fn fock_product_construction(ns: &[usize], eps: f64) -> Result<CoherentSuperposition> {
    if ns.is_empty() {
        return Err(Error::InvalidParameter("need at least one mode".into()));
    }
    let mut state: Option<CoherentSuperposition> = None;
    for &n in ns {
        let factor = if n == 0 {
            CoherentSuperposition::vacuum(1)
        } else {
            fock_construction(n, eps)?
        };
        state = Some(match state {
            None => factor,
            Some(s) => crate::state::tensor(&s, &factor),
        });
    }
    Ok(state.expect("nonempty"))
}

/// `|<prod n_i| decompose_fock_product(ns, eps)>|^2`.
pub fn fock_product_fidelity(ns: &[usize], eps: f64) -> Result<f64> {
    ns.iter()
        .filter(|&&n| n > 0)
        .try_fold(1.0, |acc, &n| Ok(acc * fock_fidelity(n, eps)?))
}

/// Squeeze parameter `zeta = r e^{i phi}` together with the number of even
/// cat pairs used to approximate `S(zeta)|0>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeParams {
    pub r: f64,
    pub phi: f64,
    /// Cat-pair count; the decomposition has `2 * terms` coherent states.
    pub terms: usize,
}

impl SqueezeParams {
    pub fn new(r: f64, phi: f64, terms: usize) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("squeeze magnitude must be >= 0, got {r}")));
        }
        if !phi.is_finite() {
            return Err(Error::InvalidParameter("squeeze phase must be finite".into()));
        }
        if terms == 0 {
            return Err(Error::InvalidParameter("need at least one cat pair".into()));
        }
        Ok(Self {
            r,
            phi: phi.rem_euclid(2.0 * PI),
            terms,
        })
    }
}

/// Exact amplitudes `<n|S(zeta)|0>` for `n = 0..=cutoff`.
pub fn squeezed_vacuum_fock_amplitudes(r: f64, phi: f64, cutoff: usize) -> Vec<Complex64> {
    let mut out = vec![c(0.0, 0.0); cutoff + 1];
    let t = r.tanh();
    let base = 1.0 / r.cosh().sqrt();
    for m in 0..=cutoff / 2 {
        let magnitude = if m == 0 {
            base
        } else if t == 0.0 {
            0.0
        } else {
            (m as f64 * t.ln() + 0.5 * ln_factorial(2 * m)
                - m as f64 * 2f64.ln()
                - ln_factorial(m))
            .exp()
                * base
        };
        // (-e^{i phi})^m
        out[2 * m] = Complex64::from_polar(magnitude, m as f64 * (phi + PI));
    }
    out
}

/// Unnormalized cat-pair construction of `S(zeta)|0>`, exact up to level `2 * terms + 1`.
///
/// Pair `k` sits at `+-alpha_k` with `alpha_k^2 = e^{2 pi i k / terms} gamma`,
/// `gamma = s / (2a)`, `s = -e^{i phi} tanh r`. The free scale `a` is fixed so
/// the amplitude on level `2 * terms` also matches, which gives
/// `a^terms = terms! / (2 terms)!`; the positive real root is used.
pub fn squeezed_vacuum_construction(sp: &SqueezeParams) -> Result<CoherentSuperposition> {
    if sp.r == 0.0 {
        return Ok(CoherentSuperposition::vacuum(1));
    }
    let pairs = sp.terms;
    let ln_a = (ln_factorial(pairs) - ln_factorial(2 * pairs)) / pairs as f64;
    let a = ln_a.exp();
    let s = Complex64::from_polar(sp.r.tanh(), sp.phi + PI);
    let gamma = s / (2.0 * a);
    if !gamma.is_finite() || !a.is_finite() || a <= 0.0 {
        return Err(Error::DecompositionFailure(format!(
            "no finite scale for r = {}, {} pairs",
            sp.r, pairs
        )));
    }
    // f_n = a^n (2n)!/n! e^{|gamma|/2} / (2 sqrt(cosh r)), n < pairs
    let front = (0.5 * gamma.norm()).exp() / (2.0 * sp.r.cosh().sqrt());
    let f: Vec<f64> = (0..pairs)
        .map(|n| (n as f64 * ln_a + ln_factorial(2 * n) - ln_factorial(n)).exp() * front)
        .collect();
    let mut amplitudes = Vec::with_capacity(2 * pairs);
    let mut labels = Vec::with_capacity(2 * pairs);
    let root = gamma.sqrt();
    for k in 0..pairs {
        let ck: Complex64 = f
            .iter()
            .enumerate()
            .map(|(n, &fv)| root_of_unity((n * k) % pairs, pairs).conj() * fv)
            .sum::<Complex64>()
            / pairs as f64;
        let alpha = Complex64::from_polar(1.0, PI * k as f64 / pairs as f64) * root;
        amplitudes.push(ck);
        labels.push(alpha);
        amplitudes.push(ck);
        labels.push(-alpha);
    }
    if amplitudes.iter().chain(&labels).any(|z| !z.is_finite()) {
        return Err(Error::DecompositionFailure(
            "cat-pair coefficients are not finite".into(),
        ));
    }
    Ok(CoherentSuperposition::from_raw(1, amplitudes, labels))
}

/// Normalized `2 * terms`-state approximation of the squeezed vacuum.
pub fn decompose_squeezed_vacuum(sp: &SqueezeParams) -> Result<CoherentSuperposition> {
    crate::state::normalize(&squeezed_vacuum_construction(sp)?)
}

/// Kernel `sum_{k,l} c_{kl} |eps w^k><eps w^l|` of a single-mode operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorKernel {
    size: usize,
    eps: f64,
    /// Row-major `c_{kl}`, ket index `k` first.
    coefficients: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEntry {
    pub amplitude: Complex64,
    pub ket: Complex64,
    pub bra: Complex64,
}

impl OperatorKernel {
    pub fn modes(&self) -> usize {
        1
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn label(&self, k: usize) -> Complex64 {
        root_of_unity(k, self.size) * self.eps
    }

    pub fn entries(&self) -> Vec<KernelEntry> {
        let mut out = Vec::with_capacity(self.len());
        for k in 0..self.size {
            for l in 0..self.size {
                out.push(KernelEntry {
                    amplitude: self.coefficients[k * self.size + l],
                    ket: self.label(k),
                    bra: self.label(l),
                });
            }
        }
        out
    }

    /// Applies the kernel to `mode` of `psi`; rank grows by a factor `N + 1`.
    pub fn apply(&self, psi: &CoherentSuperposition, mode: usize) -> Result<CoherentSuperposition> {
        check_mode(psi, mode)?;
        let m = psi.modes();
        let labels_grid: Vec<Complex64> = (0..self.size).map(|k| self.label(k)).collect();
        let mut amplitudes = Vec::with_capacity(psi.rank() * self.size);
        let mut labels = Vec::with_capacity(psi.rank() * self.size * m);
        for (ci, alpha) in psi.terms() {
            let bras: Vec<Complex64> = labels_grid
                .iter()
                .map(|&b| crate::state::overlap_slices(&[b], &[alpha[mode]]))
                .collect();
            for (k, &ket) in labels_grid.iter().enumerate() {
                let row = &self.coefficients[k * self.size..(k + 1) * self.size];
                let weight: Complex64 = row.iter().zip(&bras).map(|(c, b)| c * b).sum();
                amplitudes.push(ci * weight);
                labels.extend_from_slice(alpha);
                let last = labels.len() - m + mode;
                labels[last] = ket;
            }
        }
        Ok(CoherentSuperposition::from_raw(m, amplitudes, labels))
    }
}

/// Coherent-state kernel of a level-`N` Fock-basis operator, given as `N + 1` rows.
pub fn decompose_operator_fock(matrix: &[Vec<Complex64>], eps: f64) -> Result<OperatorKernel> {
    check_eps(eps)?;
    let size = matrix.len();
    if size == 0 {
        return Err(Error::InvalidParameter("operator matrix is empty".into()));
    }
    if let Some(row) = matrix.iter().find(|row| row.len() != size) {
        return Err(Error::Dimension {
            expected: size,
            found: row.len(),
        });
    }
    let prefactor = (eps * eps).exp() / (size * size) as f64;
    let weight: Vec<f64> = (0..size)
        .map(|n| (0.5 * ln_factorial(n) - n as f64 * eps.ln()).exp())
        .collect();
    let mut scaled = vec![c(0.0, 0.0); size * size];
    for n in 0..size {
        for m in 0..size {
            let v = matrix[n][m] * (weight[n] * weight[m] * prefactor);
            if !v.is_finite() {
                return Err(Error::Overflow { level: n.max(m) });
            }
            scaled[n * size + m] = v;
        }
    }
    let mut coefficients = vec![c(0.0, 0.0); size * size];
    for k in 0..size {
        for l in 0..size {
            let mut acc = c(0.0, 0.0);
            for n in 0..size {
                for m in 0..size {
                    let s = scaled[n * size + m];
                    if s.norm_sqr() == 0.0 {
                        continue;
                    }
                    // e^{-2 pi i (k n - l m)/(N+1)}
                    let idx = (k * n + (size - (l * m) % size)) % size;
                    acc += s * root_of_unity(idx, size).conj();
                }
            }
            coefficients[k * size + l] = acc;
        }
    }
    Ok(OperatorKernel {
        size,
        eps,
        coefficients,
    })
}

fn check_mode(psi: &CoherentSuperposition, mode: usize) -> Result<()> {
    if mode >= psi.modes() {
        return Err(Error::Index {
            index: mode,
            modes: psi.modes(),
        });
    }
    Ok(())
}

/// `sum_l b_l (a^dag)^l` applied to `mode` of `psi`.
///
/// Each term is handled as `A|alpha> = D(alpha) A'(alpha)|0>`, where
/// `A'(alpha)|0>` has at most `n` photons and is re-decomposed with `eps`,
/// then displaced back. The rank grows by a factor `n + 1`; a constant
/// polynomial is applied exactly.
pub fn apply_creation_polynomial(
    psi: &CoherentSuperposition,
    mode: usize,
    coeffs: &[Complex64],
    eps: f64,
) -> Result<CoherentSuperposition> {
    check_mode(psi, mode)?;
    check_eps(eps)?;
    if coeffs.is_empty() {
        return Err(Error::InvalidParameter("polynomial needs at least one coefficient".into()));
    }
    let degree = coeffs.len() - 1;
    let m = psi.modes();
    if degree == 0 {
        return Ok(psi.scale(coeffs[0]));
    }
    let size = degree + 1;
    let grid: Vec<Complex64> = (0..size).map(|k| root_of_unity(k, size) * eps).collect();
    let sqrt_fact: Vec<f64> = (0..size).map(sqrt_factorial).collect();
    let mut amplitudes = Vec::with_capacity(psi.rank() * size);
    let mut labels = Vec::with_capacity(psi.rank() * size * m);
    for (ci, alpha) in psi.terms() {
        let a = alpha[mode];
        let ac = a.conj();
        // v_j = sum_l b_l C(l, j) conj(alpha)^{l-j} sqrt(j!)
        let v: Vec<Complex64> = (0..size)
            .map(|j| {
                let mut acc = c(0.0, 0.0);
                for (l, &b) in coeffs.iter().enumerate().skip(j) {
                    acc += b * binomial(l, j) * ac.powu((l - j) as u32);
                }
                acc * sqrt_fact[j]
            })
            .collect();
        let ck = fourier_coefficients(&v, eps)?;
        for (k, &g) in grid.iter().enumerate() {
            // D(alpha)|g> = e^{i Im(conj(g) alpha)} |g + alpha>
            let phase = Complex64::from_polar(1.0, (g.conj() * a).im);
            amplitudes.push(ci * ck[k] * phase);
            labels.extend_from_slice(alpha);
            let last = labels.len() - m + mode;
            labels[last] = g + a;
        }
    }
    Ok(CoherentSuperposition::from_raw(m, amplitudes, labels))
}

/// `a^dag` on `mode` through a weak beamsplitter and vacuum post-selection:
/// `(1/eps_bs) (I (x) <0|) B(2 eps_bs, 0) |psi, 1~>`, with `|1~>` the odd-cat
/// approximation of a single photon at `aux_eps`.
///
/// The output is unnormalized and carries an `O(eps_bs^2)` error.
pub fn apply_creation_postselect(
    psi: &CoherentSuperposition,
    mode: usize,
    eps_bs: f64,
    aux_eps: f64,
) -> Result<CoherentSuperposition> {
    check_mode(psi, mode)?;
    check_eps(eps_bs)?;
    check_eps(aux_eps)?;
    let aux = decompose_fock(1, aux_eps)?;
    let (t, r) = (eps_bs.cos(), eps_bs.sin());
    let m = psi.modes();
    let mut amplitudes = Vec::with_capacity(psi.rank() * aux.rank());
    let mut labels = Vec::with_capacity(psi.rank() * aux.rank() * m);
    for (ci, alpha) in psi.terms() {
        let a = alpha[mode];
        for (d, b) in aux.terms() {
            let b = b[0];
            let a_out = a * t + b * r;
            let b_out = b * t - a * r;
            let vacuum_overlap = (-0.5 * b_out.norm_sqr()).exp();
            amplitudes.push(ci * d * (vacuum_overlap / eps_bs));
            labels.extend_from_slice(alpha);
            let last = labels.len() - m + mode;
            labels[last] = a_out;
        }
    }
    Ok(CoherentSuperposition::from_raw(m, amplitudes, labels))
}

/// `|<a|b>|^2 / (|a|^2 |b|^2)`.
pub fn fidelity(a: &CoherentSuperposition, b: &CoherentSuperposition) -> Result<f64> {
    let cross = inner_product(a, b)?.norm_sqr();
    let denom = norm_squared(a) * norm_squared(b);
    if !(denom > 0.0) {
        return Err(Error::Degenerate("fidelity with a zero vector".into()));
    }
    Ok(cross / denom)
}
