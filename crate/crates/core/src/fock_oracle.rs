//! Exact Fock-basis evolution by expanding creation-operator polynomials.
//! Used to check the coherent-state route on small instances.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linear_optics::TransferMatrix;
use crate::measure::{fixed_photon_outcomes, FockOutcome};
use crate::special::sqrt_factorial;

/// Default photon cap for exact evolution.
pub const DEFAULT_PHOTON_CAP: usize = 12;

/// Largest number of basis states the distribution routine will list.
pub const MAX_DISTRIBUTION_SIZE: u64 = 1_000_000;

/// `C(n + m - 1, m - 1)`, the number of `n`-photon states in `m` modes.
pub fn fock_dimension(n: usize, m: usize) -> Result<u64> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one mode".into()));
    }
    let top = (n + m - 1) as u128;
    let k = (m - 1).min(n) as u128;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (top - i) / (i + 1);
        if acc > (1u128 << 63) {
            return Err(Error::Overflow { level: n });
        }
    }
    Ok(acc as u64)
}

/// Fock-basis state with a fixed photon number, keyed by photon counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FockPolyState {
    modes: usize,
    amplitudes: BTreeMap<Vec<u8>, Complex64>,
}

impl FockPolyState {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitude(&self, outcome: &FockOutcome) -> Complex64 {
        if outcome.modes() != self.modes || outcome.counts.iter().any(|&n| n > u8::MAX as usize) {
            return Complex64::new(0.0, 0.0);
        }
        let key: Vec<u8> = outcome.counts.iter().map(|&n| n as u8).collect();
        self.amplitudes.get(&key).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (FockOutcome, Complex64)> + '_ {
        self.amplitudes
            .iter()
            .map(|(k, v)| (FockOutcome::new(k.iter().map(|&n| n as usize).collect()), *v))
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }
}

/// `U |input>` with the default photon cap.
pub fn evolve_fock_exact(input: &FockOutcome, transfer: &TransferMatrix) -> Result<FockPolyState> {
    evolve_fock_exact_with_cap(input, transfer, DEFAULT_PHOTON_CAP)
}

/// `U |input>` computed from `prod_i (sum_j u_ji a_j^dag)^{n_i} / sqrt(n_i!) |0>`.
pub fn evolve_fock_exact_with_cap(input: &FockOutcome, transfer: &TransferMatrix, cap: usize) -> Result<FockPolyState> {
    let m = transfer.modes();
    if input.modes() != m {
        return Err(Error::Dimension { expected: m, found: input.modes() });
    }
    let total = input.total();
    if total > cap {
        return Err(Error::ResourceCap(format!(
            "exact evolution of {total} photons exceeds the cap of {cap}"
        )));
    }
    // monomial coefficients of the creation polynomial
    let mut poly: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
    poly.insert(vec![0; m], Complex64::new(1.0, 0.0));
    for (i, &n) in input.counts.iter().enumerate() {
        for _ in 0..n {
            let mut next: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
            for (key, coeff) in &poly {
                for j in 0..m {
                    let u = transfer.get(j, i);
                    if u == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let mut k = key.clone();
                    k[j] += 1;
                    *next.entry(k).or_default() += coeff * u;
                }
            }
            poly = next;
        }
    }
    let norm: f64 = input.counts.iter().map(|&n| sqrt_factorial(n)).product();
    let amplitudes = poly
        .into_iter()
        .map(|(k, coeff)| {
            let s: f64 = k.iter().map(|&n| sqrt_factorial(n as usize)).product();
            (k, coeff * (s / norm))
        })
        .collect();
    Ok(FockPolyState { modes: m, amplitudes })
}

/// `<output| U |input>` by exact expansion.
pub fn oracle_amplitude(input: &FockOutcome, transfer: &TransferMatrix, output: &FockOutcome) -> Result<Complex64> {
    if output.modes() != transfer.modes() {
        return Err(Error::Dimension { expected: transfer.modes(), found: output.modes() });
    }
    if output.total() != input.total() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(evolve_fock_exact(input, transfer)?.amplitude(output))
}

/// Every output probability in reverse lexicographic order.
pub fn oracle_distribution(input: &FockOutcome, transfer: &TransferMatrix) -> Result<Vec<(FockOutcome, f64)>> {
    let m = transfer.modes();
    let n = input.total();
    let dim = fock_dimension(n, m)?;
    if dim > MAX_DISTRIBUTION_SIZE {
        return Err(Error::ResourceCap(format!(
            "{dim} outcomes exceed the listing cap of {MAX_DISTRIBUTION_SIZE}"
        )));
    }
    let state = evolve_fock_exact(input, transfer)?;
    Ok(fixed_photon_outcomes(n, m)
        .into_iter()
        .map(|o| {
            let p = state.amplitude(&o).norm_sqr();
            (o, p)
        })
        .collect())
}

/// Writes `outcome,re,im,prob` rows.
pub fn write_amplitude_csv<W: Write>(mut w: W, rows: &[(FockOutcome, Complex64)]) -> Result<()> {
    writeln!(w, "outcome,re,im,prob")?;
    for (o, a) in rows {
        writeln!(w, "{},{:e},{:e},{:e}", o.to_field(), a.re, a.im, a.norm_sqr())?;
    }
    Ok(())
}
