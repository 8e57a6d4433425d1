//! Per-mode product input states, as read from JSON.
//!
//! ```json
//! {"epsilon": 0.2, "modes": [{"fock": 1}, {"coherent": [0.5, 0.0]},
//!                            {"squeezed": {"r": 0.5, "phi": 0.0, "terms": 4}}]}
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::decompose::{
    decompose_fock, decompose_squeezed_vacuum, fock_fidelity, fock_product_construction,
    squeezed_vacuum_fock_amplitudes, SqueezeParams, DEFAULT_EPSILON,
};
use crate::error::{Error, Result};
use crate::measure::FockOutcome;
use crate::special::coherent_fock_amplitude;
use crate::state::{norm_squared, tensor, CoherentLabel, CoherentSuperposition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ModeSpec {
    Fock(usize),
    Coherent([f64; 2]),
    Squeezed(SqueezedSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqueezedSpec {
    pub r: f64,
    #[serde(default)]
    pub phi: f64,
    pub terms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub modes: Vec<ModeSpec>,
}

/// A built input state with its bookkeeping.
#[derive(Debug, Clone)]
pub struct PreparedInput {
    pub state: CoherentSuperposition,
    /// Product of per-mode fidelities against the ideal input.
    pub fidelity: f64,
    pub epsilon: f64,
    /// Photon counts when every mode is a Fock state.
    pub fock: Option<FockOutcome>,
}

impl PreparedInput {
    pub fn total_photons(&self) -> Option<usize> {
        self.fock.as_ref().map(|f| f.total())
    }
}

impl InputSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: InputSpec = serde_json::from_str(text)?;
        if spec.modes.is_empty() {
            return Err(Error::InvalidParameter("input state has no modes".into()));
        }
        Ok(spec)
    }

    pub fn fock(counts: &[usize]) -> Self {
        Self {
            epsilon: None,
            modes: counts.iter().map(|&n| ModeSpec::Fock(n)).collect(),
        }
    }

    pub fn modes(&self) -> usize {
        self.modes.len()
    }

    /// Photon counts when every mode is a Fock state.
    pub fn fock_counts(&self) -> Option<FockOutcome> {
        self.modes
            .iter()
            .map(|m| match m {
                ModeSpec::Fock(n) => Some(*n),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(FockOutcome::new)
    }

    /// Builds the normalized product state. `eps` overrides the file's epsilon.
    pub fn prepare(&self, eps: Option<f64>) -> Result<PreparedInput> {
        let epsilon = eps.or(self.epsilon).unwrap_or(DEFAULT_EPSILON);
        let mut state: Option<CoherentSuperposition> = None;
        let mut fidelity = 1.0;
        for (j, mode) in self.modes.iter().enumerate() {
            let (factor, f) = build_mode(mode, epsilon).map_err(|e| Error::element(j, e))?;
            fidelity *= f;
            state = Some(match state {
                None => factor,
                Some(s) => tensor(&s, &factor),
            });
        }
        let state = state.ok_or_else(|| Error::InvalidParameter("input state has no modes".into()))?;
        Ok(PreparedInput {
            state: state.with_normalized_flag(true),
            fidelity,
            epsilon,
            fock: self.fock_counts(),
        })
    }

    /// Unnormalized construction whose input photon-number sector is exact.
    /// Only available for all-Fock inputs.
    pub fn prepare_exact_sector(&self, eps: Option<f64>) -> Result<CoherentSuperposition> {
        let counts = self
            .fock_counts()
            .ok_or_else(|| Error::InvalidParameter("exact-sector construction needs Fock inputs".into()))?;
        fock_product_construction(&counts.counts, eps.or(self.epsilon).unwrap_or(DEFAULT_EPSILON))
    }
}

fn build_mode(mode: &ModeSpec, eps: f64) -> Result<(CoherentSuperposition, f64)> {
    match mode {
        ModeSpec::Fock(0) => Ok((CoherentSuperposition::vacuum(1), 1.0)),
        ModeSpec::Fock(n) => Ok((decompose_fock(*n, eps)?, fock_fidelity(*n, eps)?)),
        ModeSpec::Coherent([re, im]) => {
            let label = CoherentLabel::new(vec![Complex64::new(*re, *im)])?;
            Ok((CoherentSuperposition::coherent(label), 1.0))
        }
        ModeSpec::Squeezed(s) => {
            let params = SqueezeParams::new(s.r, s.phi, s.terms)?;
            let psi = decompose_squeezed_vacuum(&params)?;
            Ok((psi.clone(), squeezed_fidelity(&psi, &params)?))
        }
    }
}

/// Fidelity against the squeezed vacuum truncated at 200 photons.
pub fn squeezed_fidelity(psi: &CoherentSuperposition, params: &SqueezeParams) -> Result<f64> {
    let cutoff = 200;
    let reference = squeezed_vacuum_fock_amplitudes(params.r, params.phi, cutoff);
    let mut amp = Complex64::new(0.0, 0.0);
    for (n, r) in reference.iter().enumerate() {
        if r.norm_sqr() == 0.0 {
            continue;
        }
        let a: Complex64 = psi
            .terms()
            .map(|(c, label)| c * coherent_fock_amplitude(label[0], n))
            .sum();
        amp += r.conj() * a;
    }
    let ref_norm: f64 = reference.iter().map(|r| r.norm_sqr()).sum();
    Ok(amp.norm_sqr() / (ref_norm * norm_squared(psi)))
}
