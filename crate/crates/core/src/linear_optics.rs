//! Linear-optical circuits acting on coherent labels.
//!
//! A passive circuit maps `|alpha>` to `|u alpha>` with no phase, so it
//! changes labels only. Displacements add a label offset and a term phase.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decompose::apply_creation_polynomial;
use crate::error::{Error, Result};
use crate::state::{overlap_slices, pairwise_sum, tensor, CoherentSuperposition};

pub const UNITARITY_TOL: f64 = 1e-10;

const PAR_TERM_THRESHOLD: usize = 4096;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `m x m` unitary acting on label vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    u: DMatrix<Complex64>,
}

fn unitarity_defect(u: &DMatrix<Complex64>) -> f64 {
    let m = u.nrows();
    let p = u * u.adjoint();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((p[(i, j)] - target).norm());
        }
    }
    worst
}

/// Nearest unitary `W V^dag` from the SVD `u = W S V^dag`.
fn polar_unitary(u: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let svd = u.clone().svd(true, true);
    let w = svd.u.expect("left vectors requested");
    let vt = svd.v_t.expect("right vectors requested");
    w * vt
}

impl TransferMatrix {
    pub fn new(u: DMatrix<Complex64>) -> Result<Self> {
        if u.nrows() == 0 || u.nrows() != u.ncols() {
            return Err(Error::InvalidParameter(format!(
                "transfer matrix must be square and nonempty, got {}x{}",
                u.nrows(),
                u.ncols()
            )));
        }
        if u.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidParameter("transfer matrix has non-finite entries".into()));
        }
        let defect = unitarity_defect(&u);
        if defect > UNITARITY_TOL {
            return Err(Error::NotUnitary { defect });
        }
        Ok(Self { u })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidParameter("transfer rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
    }

    pub fn identity(m: usize) -> Self {
        Self {
            u: DMatrix::identity(m.max(1), m.max(1)),
        }
    }

    pub fn modes(&self) -> usize {
        self.u.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.u
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.u[(row, col)]
    }

    pub fn defect(&self) -> f64 {
        unitarity_defect(&self.u)
    }

    /// `self` followed by `next`, i.e. `next * self`.
    ///
    /// Rounding drift past the unitarity tolerance is removed by projecting
    /// back onto the unitary group.
    pub fn then(&self, next: &TransferMatrix) -> Result<TransferMatrix> {
        if next.modes() != self.modes() {
            return Err(Error::Dimension {
                expected: self.modes(),
                found: next.modes(),
            });
        }
        let mut u = &next.u * &self.u;
        if unitarity_defect(&u) > UNITARITY_TOL {
            log::debug!("re-orthonormalizing composed transfer matrix");
            u = polar_unitary(&u);
        }
        Ok(Self { u })
    }

    pub fn adjoint(&self) -> TransferMatrix {
        Self {
            u: self.u.adjoint(),
        }
    }

    /// Rows that differ from the identity.
    fn touched_rows(&self) -> Vec<usize> {
        let m = self.modes();
        (0..m)
            .filter(|&i| (0..m).any(|j| self.u[(i, j)] != if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }))
            .collect()
    }

    /// `u alpha` for one label.
    pub fn apply_label(&self, alpha: &[Complex64]) -> Vec<Complex64> {
        let m = self.modes();
        (0..m)
            .map(|i| (0..m).map(|j| self.u[(i, j)] * alpha[j]).sum())
            .collect()
    }
}

fn check_index(index: usize, modes: usize) -> Result<()> {
    if index >= modes {
        Err(Error::Index { index, modes })
    } else {
        Ok(())
    }
}

/// Beamsplitter `[[t, r e^{i phi}], [-r e^{-i phi}, t]]` on modes `(i, j)`,
/// `t = cos(theta/2)`, `r = sin(theta/2)`.
pub fn beamsplitter_matrix(theta: f64, phi: f64, i: usize, j: usize, m: usize) -> Result<TransferMatrix> {
    check_index(i, m)?;
    check_index(j, m)?;
    if i == j {
        return Err(Error::InvalidParameter(format!("beamsplitter needs two distinct modes, got {i} twice")));
    }
    if !theta.is_finite() || !phi.is_finite() {
        return Err(Error::InvalidParameter("beamsplitter angles must be finite".into()));
    }
    let (t, r) = ((0.5 * theta).cos(), (0.5 * theta).sin());
    let mut u = DMatrix::identity(m, m);
    u[(i, i)] = c(t, 0.0);
    u[(j, j)] = c(t, 0.0);
    u[(i, j)] = Complex64::from_polar(r, phi);
    u[(j, i)] = -Complex64::from_polar(r, -phi);
    Ok(TransferMatrix { u })
}

pub fn phase_shift_matrix(phi: f64, mode: usize, m: usize) -> Result<TransferMatrix> {
    check_index(mode, m)?;
    if !phi.is_finite() {
        return Err(Error::InvalidParameter("phase must be finite".into()));
    }
    let mut u = DMatrix::identity(m, m);
    u[(mode, mode)] = Complex64::from_polar(1.0, phi);
    Ok(TransferMatrix { u })
}

/// Haar-distributed unitary from the QR factorization of a complex Ginibre
/// matrix, with the phases of `R`'s diagonal moved into `Q`.
pub fn haar_random_transfer(m: usize, seed: u64) -> Result<TransferMatrix> {
    if m == 0 {
        return Err(Error::InvalidParameter("mode count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(m, m, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        c(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..m {
            q[(i, j)] *= phase;
        }
    }
    TransferMatrix::new(q)
}

/// One element of a circuit file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CircuitElement {
    Bs { theta: f64, phi: f64, modes: [usize; 2] },
    Ps { phi: f64, mode: usize },
    Disp { beta: [f64; 2], mode: usize },
    Haar { seed: u64 },
}

/// `{"modes": m, "elements": [...]}`, applied in list order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub modes: usize,
    #[serde(default)]
    pub elements: Vec<CircuitElement>,
}

impl Circuit {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn summary(&self) -> Result<CircuitSummary> {
        compose_circuit(&self.elements, self.modes)
    }
}

/// A whole circuit as `D(offset) U` up to the constant phase `e^{i phase}`.
///
/// Applied to `|alpha>` it gives `e^{i phase} e^{i Im(conj(u alpha) . offset)} |u alpha + offset>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSummary {
    pub transfer: TransferMatrix,
    pub offset: Vec<Complex64>,
    pub phase: f64,
}

impl CircuitSummary {
    pub fn is_passive(&self) -> bool {
        self.offset.iter().all(|d| d.norm_sqr() == 0.0)
    }
}

fn element_transfer(element: &CircuitElement, m: usize) -> Result<Option<TransferMatrix>> {
    match *element {
        CircuitElement::Bs { theta, phi, modes } => {
            beamsplitter_matrix(theta, phi, modes[0], modes[1], m).map(Some)
        }
        CircuitElement::Ps { phi, mode } => phase_shift_matrix(phi, mode, m).map(Some),
        CircuitElement::Haar { seed } => haar_random_transfer(m, seed).map(Some),
        CircuitElement::Disp { .. } => Ok(None),
    }
}

/// Folds a circuit into `(u, d)` plus a global phase; see [`CircuitSummary`].
pub fn compose_circuit(elements: &[CircuitElement], m: usize) -> Result<CircuitSummary> {
    if m == 0 {
        return Err(Error::InvalidParameter("mode count must be positive".into()));
    }
    let mut u = TransferMatrix::identity(m);
    let mut d = vec![c(0.0, 0.0); m];
    let mut phase = 0.0;
    for (index, element) in elements.iter().enumerate() {
        match element_transfer(element, m).map_err(|e| Error::element(index, e))? {
            Some(v) => {
                // V D(d) U = D(V d) V U
                d = v.apply_label(&d);
                u = u.then(&v)?;
            }
            None => {
                let CircuitElement::Disp { beta, mode } = *element else {
                    unreachable!()
                };
                check_index(mode, m).map_err(|e| Error::element(index, e))?;
                let beta = c(beta[0], beta[1]);
                if !beta.is_finite() {
                    return Err(Error::element(
                        index,
                        Error::InvalidParameter("displacement must be finite".into()),
                    ));
                }
                // D(a) D(b) = e^{i Im(a conj(b))} D(a + b)
                phase += (beta * d[mode].conj()).im;
                d[mode] += beta;
            }
        }
    }
    Ok(CircuitSummary {
        transfer: u,
        offset: d,
        phase,
    })
}

fn map_terms<F>(psi: &CoherentSuperposition, f: F) -> (Vec<Complex64>, Vec<Complex64>)
where
    F: Fn(Complex64, &[Complex64], &mut [Complex64]) -> Complex64 + Sync,
{
    let m = psi.modes();
    let mut labels = psi.labels_flat().to_vec();
    let mut amplitudes = psi.amplitudes().to_vec();
    if psi.rank() >= PAR_TERM_THRESHOLD {
        amplitudes
            .par_iter_mut()
            .zip(labels.par_chunks_exact_mut(m))
            .zip(psi.labels_flat().par_chunks_exact(m))
            .for_each(|((amp, out), old)| *amp = f(*amp, old, out));
    } else {
        for ((amp, out), old) in amplitudes
            .iter_mut()
            .zip(labels.chunks_exact_mut(m))
            .zip(psi.labels_flat().chunks_exact(m))
        {
            *amp = f(*amp, old, out);
        }
    }
    (amplitudes, labels)
}

/// Maps every label `alpha -> u alpha`; amplitudes are untouched.
pub fn apply_transfer(psi: &CoherentSuperposition, t: &TransferMatrix) -> Result<CoherentSuperposition> {
    if psi.modes() != t.modes() {
        return Err(Error::Dimension {
            expected: t.modes(),
            found: psi.modes(),
        });
    }
    let rows = t.touched_rows();
    let m = psi.modes();
    let u = &t.u;
    let (amplitudes, labels) = map_terms(psi, |amp, old, out| {
        for &i in &rows {
            let mut acc = c(0.0, 0.0);
            for j in 0..m {
                acc += u[(i, j)] * old[j];
            }
            out[i] = acc;
        }
        amp
    });
    Ok(CoherentSuperposition::from_raw(m, amplitudes, labels).with_normalized_flag(psi.is_normalized()))
}

/// Applies a composed circuit, including its displacement offset and phases.
pub fn apply_circuit(psi: &CoherentSuperposition, summary: &CircuitSummary) -> Result<CoherentSuperposition> {
    let moved = apply_transfer(psi, &summary.transfer)?;
    if summary.is_passive() {
        return Ok(moved.scale(Complex64::from_polar(1.0, summary.phase)));
    }
    let global = Complex64::from_polar(1.0, summary.phase);
    let d = &summary.offset;
    let (amplitudes, labels) = map_terms(&moved, |amp, old, out| {
        let mut arg = 0.0;
        for j in 0..old.len() {
            arg += (old[j].conj() * d[j]).im;
            out[j] = old[j] + d[j];
        }
        amp * global * Complex64::from_polar(1.0, arg)
    });
    Ok(CoherentSuperposition::from_raw(psi.modes(), amplitudes, labels)
        .with_normalized_flag(psi.is_normalized()))
}

/// `D(beta)` on `mode`: `|alpha> -> e^{i Im(conj(alpha) beta)} |alpha + beta>`.
pub fn apply_displacement(psi: &CoherentSuperposition, mode: usize, beta: Complex64) -> Result<CoherentSuperposition> {
    check_index(mode, psi.modes())?;
    if !beta.is_finite() {
        return Err(Error::InvalidParameter("displacement must be finite".into()));
    }
    let (amplitudes, labels) = map_terms(psi, |amp, old, out| {
        out[mode] = old[mode] + beta;
        amp * Complex64::from_polar(1.0, (old[mode].conj() * beta).im)
    });
    Ok(CoherentSuperposition::from_raw(psi.modes(), amplitudes, labels)
        .with_normalized_flag(psi.is_normalized()))
}

/// `a` on `mode`: `c_i -> c_i alpha_i`. The result is unnormalized.
pub fn apply_annihilation(psi: &CoherentSuperposition, mode: usize) -> Result<CoherentSuperposition> {
    check_index(mode, psi.modes())?;
    let (amplitudes, labels) = map_terms(psi, |amp, old, _| amp * old[mode]);
    Ok(CoherentSuperposition::from_raw(psi.modes(), amplitudes, labels))
}

/// A single-side operator in a partitioned expansion.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalOp {
    Identity,
    Transfer(TransferMatrix),
    Displacement { mode: usize, beta: Complex64 },
    Annihilation { mode: usize },
    /// `a^dag` on `mode`, re-decomposed at `eps`; raises the rank.
    Creation { mode: usize, eps: f64 },
    /// Applied left to right.
    Sequence(Vec<LocalOp>),
}

impl LocalOp {
    pub fn apply(&self, psi: &CoherentSuperposition) -> Result<CoherentSuperposition> {
        match self {
            LocalOp::Identity => Ok(psi.clone()),
            LocalOp::Transfer(t) => apply_transfer(psi, t),
            LocalOp::Displacement { mode, beta } => apply_displacement(psi, *mode, *beta),
            LocalOp::Annihilation { mode } => apply_annihilation(psi, *mode),
            LocalOp::Creation { mode, eps } => {
                apply_creation_polynomial(psi, *mode, &[c(0.0, 0.0), c(1.0, 0.0)], *eps)
            }
            LocalOp::Sequence(ops) => {
                let mut state = psi.clone();
                for op in ops {
                    state = op.apply(&state)?;
                }
                Ok(state)
            }
        }
    }
}

/// One part `weight * left (x) right` of a partitioned state.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub weight: Complex64,
    pub left: CoherentSuperposition,
    pub right: CoherentSuperposition,
}

/// `sum_i w_i |L_i> (x) |R_i>` kept in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedState {
    left_modes: usize,
    right_modes: usize,
    parts: Vec<Part>,
}

impl PartitionedState {
    pub fn new(
        left: Vec<CoherentSuperposition>,
        right: Vec<CoherentSuperposition>,
        weights: Vec<Complex64>,
    ) -> Result<Self> {
        if left.is_empty() || left.len() != right.len() || left.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "partition lists must be nonempty and equal length, got {}, {}, {}",
                left.len(),
                right.len(),
                weights.len()
            )));
        }
        let left_modes = left[0].modes();
        let right_modes = right[0].modes();
        if let Some(p) = left.iter().find(|p| p.modes() != left_modes) {
            return Err(Error::Dimension {
                expected: left_modes,
                found: p.modes(),
            });
        }
        if let Some(p) = right.iter().find(|p| p.modes() != right_modes) {
            return Err(Error::Dimension {
                expected: right_modes,
                found: p.modes(),
            });
        }
        let parts = left
            .into_iter()
            .zip(right)
            .zip(weights)
            .map(|((left, right), weight)| Part { weight, left, right })
            .collect();
        Ok(Self {
            left_modes,
            right_modes,
            parts,
        })
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.left_modes + self.right_modes
    }

    /// Stored complex numbers: sum over parts of `k_L (m_L + 1) + k_R (m_R + 1)`.
    pub fn storage(&self) -> usize {
        self.parts
            .iter()
            .map(|p| p.left.rank() * (self.left_modes + 1) + p.right.rank() * (self.right_modes + 1))
            .sum()
    }

    /// Explicit tensor-product form.
    pub fn contract(&self) -> CoherentSuperposition {
        let mut out = CoherentSuperposition::zero(self.modes()).expect("positive modes");
        for p in &self.parts {
            let t = tensor(&p.left, &p.right).scale(p.weight);
            out = out.superpose(&t).expect("same modes");
        }
        out
    }

    /// `<reference|self>` without forming the tensor product.
    pub fn inner_product_with(&self, reference: &CoherentSuperposition) -> Result<Complex64> {
        if reference.modes() != self.modes() {
            return Err(Error::Dimension {
                expected: self.modes(),
                found: reference.modes(),
            });
        }
        let lm = self.left_modes;
        let rows: Vec<Complex64> = reference
            .terms()
            .map(|(cr, label)| {
                let (rl, rr) = label.split_at(lm);
                let per_part: Vec<Complex64> = self
                    .parts
                    .iter()
                    .map(|p| {
                        let l: Complex64 = p.left.terms().map(|(a, al)| a * overlap_slices(rl, al)).sum();
                        let r: Complex64 = p.right.terms().map(|(b, bl)| b * overlap_slices(rr, bl)).sum();
                        p.weight * l * r
                    })
                    .collect();
                cr.conj() * pairwise_sum(&per_part)
            })
            .collect();
        Ok(pairwise_sum(&rows))
    }
}

/// One term `weight * left_op (x) right_op` of an operator across the partition.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossTerm {
    pub weight: Complex64,
    pub left: LocalOp,
    pub right: LocalOp,
}

/// Applies `sum_j w_j L_j (x) R_j`; the part count multiplies by the number of cross terms.
pub fn evolve_partitioned(state: &PartitionedState, cross: &[CrossTerm]) -> Result<PartitionedState> {
    if cross.is_empty() {
        return Err(Error::InvalidParameter("cross-partition operator has no terms".into()));
    }
    let mut parts = Vec::with_capacity(state.parts.len() * cross.len());
    for p in &state.parts {
        for term in cross {
            let left = term.left.apply(&p.left)?;
            let right = term.right.apply(&p.right)?;
            if left.modes() != state.left_modes || right.modes() != state.right_modes {
                return Err(Error::Dimension {
                    expected: state.modes(),
                    found: left.modes() + right.modes(),
                });
            }
            parts.push(Part {
                weight: p.weight * term.weight,
                left,
                right,
            });
        }
    }
    Ok(PartitionedState {
        left_modes: state.left_modes,
        right_modes: state.right_modes,
        parts,
    })
}
