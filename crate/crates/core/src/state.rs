//! Coherent-state superpositions `sum_i c_i |alpha_i^(1), ..., alpha_i^(m)>`.
//!
//! A [`CoherentSuperposition`] stores its amplitudes in one array and its
//! labels in a second, flat `k * m` array (term-major), so per-term maps
//! touch contiguous memory. Every operation here is exact: the only error
//! in the framework comes from how a state was decomposed in the first place.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gram sums with fewer pairs than this stay on the calling thread.
const PAR_PAIR_THRESHOLD: usize = 1 << 14;

/// Amplitudes are flagged when they come within this factor of `f64::MAX / k`.
const AMPLITUDE_GUARD: f64 = 1e300;

const NORM_CLAMP: f64 = 1e-12;

/// Displacement amplitudes of a multi-mode coherent product state.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentLabel {
    alphas: Vec<Complex64>,
}

impl CoherentLabel {
    pub fn new(alphas: Vec<Complex64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidParameter(
                "a coherent label needs at least one mode".into(),
            ));
        }
        if alphas.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter(
                "coherent label entries must be finite".into(),
            ));
        }
        Ok(Self { alphas })
    }

    pub fn vacuum(modes: usize) -> Self {
        Self {
            alphas: vec![Complex64::new(0.0, 0.0); modes.max(1)],
        }
    }

    pub fn modes(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[Complex64] {
        &self.alphas
    }
}

impl From<CoherentLabel> for Vec<Complex64> {
    fn from(label: CoherentLabel) -> Self {
        label.alphas
    }
}

/// One weighted coherent product state.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub amplitude: Complex64,
    pub label: CoherentLabel,
}

impl Term {
    pub fn new(amplitude: Complex64, label: CoherentLabel) -> Result<Self> {
        if !amplitude.is_finite() {
            return Err(Error::InvalidParameter("term amplitude must be finite".into()));
        }
        Ok(Self { amplitude, label })
    }
}

/// `<a|b>` for two labels of equal length.
pub(crate) fn overlap_slices(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let mut log_modulus = 0.0;
    let mut phase = 0.0;
    for (x, y) in a.iter().zip(b) {
        log_modulus -= 0.5 * (x - y).norm_sqr();
        phase -= (x * y.conj()).im;
    }
    Complex64::from_polar(log_modulus.exp(), phase)
}

/// Inner product `<a|b>` of two multi-mode coherent states.
pub fn overlap(a: &CoherentLabel, b: &CoherentLabel) -> Result<Complex64> {
    if a.modes() != b.modes() {
        return Err(Error::Dimension {
            expected: a.modes(),
            found: b.modes(),
        });
    }
    Ok(overlap_slices(&a.alphas, &b.alphas))
}

/// Deterministic pairwise (tree) summation.
pub(crate) fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let (left, right) = values.split_at(values.len() / 2);
    pairwise_sum(left) + pairwise_sum(right)
}

pub(crate) fn pairwise_sum_real(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let (left, right) = values.split_at(values.len() / 2);
    pairwise_sum_real(left) + pairwise_sum_real(right)
}

/// A finite superposition of `m`-mode coherent product states.
///
/// The coherent rank of the held representation is [`rank`](Self::rank).
/// An empty term list represents the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentSuperposition {
    modes: usize,
    amplitudes: Vec<Complex64>,
    labels: Vec<Complex64>,
    normalized: bool,
}

impl CoherentSuperposition {
    /// The zero vector on `modes` modes.
    pub fn zero(modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidParameter("mode count must be positive".into()));
        }
        Ok(Self {
            modes,
            amplitudes: Vec::new(),
            labels: Vec::new(),
            normalized: false,
        })
    }

    /// The normalized rank-1 state `|label>`.
    pub fn coherent(label: CoherentLabel) -> Self {
        Self {
            modes: label.modes(),
            amplitudes: vec![Complex64::new(1.0, 0.0)],
            labels: label.alphas,
            normalized: true,
        }
    }

    pub fn vacuum(modes: usize) -> Self {
        Self::coherent(CoherentLabel::vacuum(modes))
    }

    pub fn from_terms(modes: usize, terms: Vec<Term>) -> Result<Self> {
        let mut amplitudes = Vec::with_capacity(terms.len());
        let mut labels = Vec::with_capacity(terms.len() * modes);
        for term in terms {
            if term.label.modes() != modes {
                return Err(Error::Dimension {
                    expected: modes,
                    found: term.label.modes(),
                });
            }
            amplitudes.push(term.amplitude);
            labels.extend(term.label.alphas);
        }
        Self::from_parts(modes, amplitudes, labels)
    }

    /// Builds a state from an amplitude array and a flat term-major label array.
    pub fn from_parts(
        modes: usize,
        amplitudes: Vec<Complex64>,
        labels: Vec<Complex64>,
    ) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidParameter("mode count must be positive".into()));
        }
        if labels.len() != amplitudes.len() * modes {
            return Err(Error::InvalidParameter(format!(
                "{} label entries cannot hold {} terms on {} modes",
                labels.len(),
                amplitudes.len(),
                modes
            )));
        }
        if amplitudes.iter().chain(&labels).any(|z| !z.is_finite()) {
            return Err(Error::InvalidParameter(
                "amplitudes and labels must be finite".into(),
            ));
        }
        let state = Self::from_raw(modes, amplitudes, labels);
        state.guard_amplitudes();
        Ok(state)
    }

    pub(crate) fn from_raw(
        modes: usize,
        amplitudes: Vec<Complex64>,
        labels: Vec<Complex64>,
    ) -> Self {
        debug_assert!(modes > 0);
        debug_assert_eq!(labels.len(), amplitudes.len() * modes);
        Self {
            modes,
            amplitudes,
            labels,
            normalized: false,
        }
    }

    pub(crate) fn with_normalized_flag(mut self, normalized: bool) -> Self {
        self.normalized = normalized;
        self
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Number of terms in the held representation.
    pub fn rank(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_zero(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, term: usize) -> Complex64 {
        self.amplitudes[term]
    }

    pub fn label(&self, term: usize) -> &[Complex64] {
        &self.labels[term * self.modes..(term + 1) * self.modes]
    }

    /// Flat term-major label storage (`rank * modes` entries).
    pub fn labels_flat(&self) -> &[Complex64] {
        &self.labels
    }

    pub fn terms(&self) -> impl ExactSizeIterator<Item = (Complex64, &[Complex64])> + '_ {
        self.amplitudes
            .iter()
            .copied()
            .zip(self.labels.chunks_exact(self.modes))
    }

    pub fn to_terms(&self) -> Vec<Term> {
        self.terms()
            .map(|(amplitude, label)| Term {
                amplitude,
                label: CoherentLabel {
                    alphas: label.to_vec(),
                },
            })
            .collect()
    }

    /// `(modes, amplitudes, row-major labels)`.
    pub fn into_parts(self) -> (usize, Vec<Complex64>, Vec<Complex64>) {
        (self.modes, self.amplitudes, self.labels)
    }

    /// Multiplies every amplitude by `factor`.
    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for c in &mut out.amplitudes {
            *c *= factor;
        }
        out.normalized = self.normalized && (factor.norm() - 1.0).abs() <= 1e-15;
        out
    }

    /// The (unnormalized) sum of two states, concatenating their term lists.
    pub fn superpose(&self, other: &Self) -> Result<Self> {
        if self.modes != other.modes {
            return Err(Error::Dimension {
                expected: self.modes,
                found: other.modes,
            });
        }
        let mut amplitudes = self.amplitudes.clone();
        amplitudes.extend_from_slice(&other.amplitudes);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(Self::from_raw(self.modes, amplitudes, labels))
    }

    fn guard_amplitudes(&self) {
        let k = self.rank().max(1) as f64;
        let max = self.amplitudes.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if max > AMPLITUDE_GUARD / k {
            log::warn!(
                "amplitude magnitude {max:e} with {} terms is close to the f64 range; \
                 cancellations will lose precision",
                self.rank()
            );
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&StateDocument::from(self)).expect("state serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&StateDocument::from(self)).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StateDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// `<psi|phi>`, evaluated as the Gram double sum over both term lists.
pub fn inner_product(psi: &CoherentSuperposition, phi: &CoherentSuperposition) -> Result<Complex64> {
    if psi.modes != phi.modes {
        return Err(Error::Dimension {
            expected: psi.modes,
            found: phi.modes,
        });
    }
    let row = |(ci, ai): (Complex64, &[Complex64])| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (dj, bj) in phi.terms() {
            acc += dj * overlap_slices(ai, bj);
        }
        ci.conj() * acc
    };
    let rows: Vec<Complex64> = if psi.rank() * phi.rank() >= PAR_PAIR_THRESHOLD {
        psi.amplitudes
            .par_iter()
            .copied()
            .zip(psi.labels.par_chunks_exact(psi.modes))
            .map(row)
            .collect()
    } else {
        psi.terms().map(row).collect()
    };
    Ok(pairwise_sum(&rows))
}

/// `<psi|psi>`, with floating-point noise below zero clamped away.
/// `conj(c_i) c_j <alpha_i|alpha_j>` for every pair `i < j`, row-major.
pub fn term_overlaps(psi: &CoherentSuperposition) -> Vec<Complex64> {
    let k = psi.rank();
    let mut out = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            out.push(psi.amplitude(i).conj() * psi.amplitude(j) * overlap_slices(psi.label(i), psi.label(j)));
        }
    }
    out
}

pub fn norm_squared(psi: &CoherentSuperposition) -> f64 {
    let value = inner_product(psi, psi).expect("same mode count").re;
    if value < 0.0 {
        let scale: f64 = psi.amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if value >= -NORM_CLAMP * scale.max(1.0) {
            return 0.0;
        }
        log::warn!("Gram sum {value:e} is negative beyond rounding noise");
    }
    value
}

/// Rescales `psi` to unit norm.
pub fn normalize(psi: &CoherentSuperposition) -> Result<CoherentSuperposition> {
    let n2 = norm_squared(psi);
    if !(n2 > 1e-30) {
        return Err(Error::Degenerate(format!(
            "cannot normalize a state with norm squared {n2:e}"
        )));
    }
    let inv = 1.0 / n2.sqrt();
    let mut out = psi.clone();
    for c in &mut out.amplitudes {
        *c *= inv;
    }
    out.normalized = true;
    out.guard_amplitudes();
    Ok(out)
}

/// `psi (x) phi`: amplitudes multiply, labels concatenate, `psi`-major term order.
pub fn tensor(psi: &CoherentSuperposition, phi: &CoherentSuperposition) -> CoherentSuperposition {
    let modes = psi.modes + phi.modes;
    let rank = psi.rank() * phi.rank();
    let mut amplitudes = Vec::with_capacity(rank);
    let mut labels = Vec::with_capacity(rank * modes);
    for (c, a) in psi.terms() {
        for (d, b) in phi.terms() {
            amplitudes.push(c * d);
            labels.extend_from_slice(a);
            labels.extend_from_slice(b);
        }
    }
    CoherentSuperposition::from_raw(modes, amplitudes, labels)
        .with_normalized_flag(psi.normalized && phi.normalized)
}

/// Result of [`prune`].
#[derive(Debug, Clone)]
pub struct Pruned {
    pub state: CoherentSuperposition,
    /// `|1 - |<psi|pruned>|^2 / (|psi|^2 |pruned|^2)|`.
    pub fidelity_loss: f64,
    pub dropped: usize,
}

/// Drops every term with `|c| <= tol`.
pub fn prune(psi: &CoherentSuperposition, tol: f64) -> Result<Pruned> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "prune tolerance must be nonnegative, got {tol}"
        )));
    }
    let mut amplitudes = Vec::new();
    let mut labels = Vec::new();
    for (c, a) in psi.terms() {
        if c.norm() > tol {
            amplitudes.push(c);
            labels.extend_from_slice(a);
        }
    }
    if amplitudes.is_empty() {
        return Err(Error::Degenerate(format!(
            "every term has |amplitude| <= {tol:e}"
        )));
    }
    let dropped = psi.rank() - amplitudes.len();
    let pruned = CoherentSuperposition::from_raw(psi.modes, amplitudes, labels)
        .with_normalized_flag(psi.normalized && dropped == 0);
    let fidelity_loss = if dropped == 0 {
        0.0
    } else {
        let cross = inner_product(psi, &pruned)?.norm_sqr();
        let denom = norm_squared(psi) * norm_squared(&pruned);
        if !(denom > 0.0) {
            return Err(Error::Degenerate("pruned state has zero norm".into()));
        }
        (1.0 - cross / denom).abs()
    };
    Ok(Pruned {
        state: pruned,
        fidelity_loss,
        dropped,
    })
}

/// JSON layout `{"modes": m, "terms": [{"c": [re, im], "alpha": [[re, im], ...]}]}`.
#[derive(Debug, Serialize, Deserialize)]
struct StateDocument {
    modes: usize,
    terms: Vec<TermDocument>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TermDocument {
    c: [f64; 2],
    alpha: Vec<[f64; 2]>,
}

impl From<&CoherentSuperposition> for StateDocument {
    fn from(state: &CoherentSuperposition) -> Self {
        let terms = state
            .terms()
            .map(|(c, label)| TermDocument {
                c: [c.re, c.im],
                alpha: label.iter().map(|a| [a.re, a.im]).collect(),
            })
            .collect();
        StateDocument {
            modes: state.modes,
            terms,
        }
    }
}

impl TryFrom<StateDocument> for CoherentSuperposition {
    type Error = Error;

    fn try_from(doc: StateDocument) -> Result<Self> {
        let mut amplitudes = Vec::with_capacity(doc.terms.len());
        let mut labels = Vec::with_capacity(doc.terms.len() * doc.modes);
        for term in doc.terms {
            if term.alpha.len() != doc.modes {
                return Err(Error::Dimension {
                    expected: doc.modes,
                    found: term.alpha.len(),
                });
            }
            amplitudes.push(Complex64::new(term.c[0], term.c[1]));
            labels.extend(term.alpha.iter().map(|a| Complex64::new(a[0], a[1])));
        }
        CoherentSuperposition::from_parts(doc.modes, amplitudes, labels)
    }
}

impl Serialize for CoherentSuperposition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        StateDocument::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CoherentSuperposition {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = StateDocument::deserialize(deserializer)?;
        doc.try_into().map_err(serde::de::Error::custom)
    }
}
