//! Fock and coherent amplitudes, partial projections and samplers.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decompose::{check_eps, fock_product_construction};
use crate::error::{Error, Result};
use crate::linear_optics::{apply_transfer, TransferMatrix};
use crate::special::{sqrt_factorial, MAX_FACTORIAL};
use crate::state::{
    norm_squared, overlap_slices, pairwise_sum, pairwise_sum_real, tensor, CoherentLabel,
    CoherentSuperposition,
};

const PAR_TERM_THRESHOLD: usize = 4096;
const MC_CHUNK: usize = 4096;
const RESTART_AFTER: usize = 500;
const INIT_ATTEMPTS: usize = 100;
const TAIL_TARGET: f64 = 1e-6;
const TAIL_LIMIT: f64 = 1e-3;
const AUTO_CUTOFF_CAP: usize = 60;

/// Default rank cap for the reversed projected-norm evaluation.
pub const DEFAULT_RANK_CAP: usize = 1 << 20;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Photon counts `n_1..n_m` of a Fock-basis measurement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FockOutcome {
    pub counts: Vec<usize>,
}

impl FockOutcome {
    pub fn new(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    pub fn vacuum(modes: usize) -> Self {
        Self { counts: vec![0; modes] }
    }

    pub fn modes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Space-separated counts, as used in CSV tables.
    pub fn to_field(&self) -> String {
        self.counts
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl From<Vec<usize>> for FockOutcome {
    fn from(counts: Vec<usize>) -> Self {
        Self { counts }
    }
}

/// Every outcome with `n` photons in `m` modes, in reverse lexicographic order
/// (`(n, 0, ..)` first).
pub fn fixed_photon_outcomes(n: usize, m: usize) -> Vec<FockOutcome> {
    fn rec(n: usize, m: usize, prefix: &mut Vec<usize>, out: &mut Vec<FockOutcome>) {
        if m == 1 {
            prefix.push(n);
            out.push(FockOutcome::new(prefix.clone()));
            prefix.pop();
            return;
        }
        for k in (0..=n).rev() {
            prefix.push(k);
            rec(n - k, m - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if m > 0 {
        rec(n, m, &mut Vec::with_capacity(m), &mut out);
    }
    out
}

fn check_counts(counts: &[usize]) -> Result<()> {
    if let Some(&n) = counts.iter().find(|&&n| n > MAX_FACTORIAL) {
        return Err(Error::Range(format!(
            "photon count {n} exceeds {MAX_FACTORIAL}, where n! overflows"
        )));
    }
    Ok(())
}

/// `prod_j e^{-|a_j|^2/2} a_j^{n_j} / sqrt(n_j!)` over the given modes.
fn fock_factor(label: &[Complex64], counts: &[usize], inv_sqrt_fact: &[f64]) -> Complex64 {
    let mut log_mod = 0.0;
    let mut value = c(1.0, 0.0);
    for (a, &n) in label.iter().zip(counts) {
        log_mod -= 0.5 * a.norm_sqr();
        if n > 0 {
            value *= a.powu(n as u32);
        }
    }
    value * (log_mod.exp() * inv_sqrt_fact.iter().product::<f64>())
}

fn inverse_sqrt_factorials(counts: &[usize]) -> Vec<f64> {
    counts.iter().map(|&n| 1.0 / sqrt_factorial(n)).collect()
}

/// `<n_1..n_m|psi>`, linear in the rank.
pub fn fock_amplitude(psi: &CoherentSuperposition, outcome: &FockOutcome) -> Result<Complex64> {
    if outcome.modes() != psi.modes() {
        return Err(Error::Dimension {
            expected: psi.modes(),
            found: outcome.modes(),
        });
    }
    check_counts(&outcome.counts)?;
    let inv = inverse_sqrt_factorials(&outcome.counts);
    let counts = &outcome.counts;
    let m = psi.modes();
    let per_term = |(amp, label): (&Complex64, &[Complex64])| *amp * fock_factor(label, counts, &inv);
    let terms: Vec<Complex64> = if psi.rank() >= PAR_TERM_THRESHOLD {
        psi.amplitudes()
            .par_iter()
            .zip(psi.labels_flat().par_chunks_exact(m))
            .map(per_term)
            .collect()
    } else {
        psi.amplitudes()
            .iter()
            .zip(psi.labels_flat().chunks_exact(m))
            .map(per_term)
            .collect()
    };
    Ok(pairwise_sum(&terms))
}

pub fn fock_probability(psi: &CoherentSuperposition, outcome: &FockOutcome) -> Result<f64> {
    Ok(fock_amplitude(psi, outcome)?.norm_sqr())
}

/// `sum_i |c_i prod_j <n_j|alpha_ij>|`, the scale that rounding error is relative to.
fn fock_amplitude_magnitude(psi: &CoherentSuperposition, outcome: &FockOutcome) -> f64 {
    let inv = inverse_sqrt_factorials(&outcome.counts);
    psi.terms()
        .map(|(amp, label)| (amp * fock_factor(label, &outcome.counts, &inv)).norm())
        .sum()
}

/// `<beta|psi>` for a coherent product state `|beta>`.
pub fn coherent_amplitude(psi: &CoherentSuperposition, betas: &CoherentLabel) -> Result<Complex64> {
    if betas.modes() != psi.modes() {
        return Err(Error::Dimension {
            expected: psi.modes(),
            found: betas.modes(),
        });
    }
    let b = betas.alphas();
    let terms: Vec<Complex64> = psi.terms().map(|(amp, a)| amp * overlap_slices(b, a)).collect();
    Ok(pairwise_sum(&terms))
}

/// Which side of `<out|U|in>` was decomposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `U` applied to the decomposed input.
    Forward,
    /// `conj(<in|U^dag|out>)` with the output decomposed.
    Reversed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionAmplitude {
    pub value: Complex64,
    pub direction: Direction,
    /// Coherent rank of the decomposed side.
    pub rank: usize,
    /// Bound on floating-point cancellation error.
    pub certified_error: f64,
}

fn fock_rank(counts: &[usize]) -> usize {
    counts.iter().map(|&n| n + 1).product()
}

/// `<out|U|in>` evaluated from whichever side has the smaller coherent rank.
///
/// The decomposed side uses the unnormalized construction whose
/// photon-number sector of interest is exact, so the result carries no
/// decomposition error; only rounding remains.
pub fn transition_amplitude(
    input: &FockOutcome,
    circuit: &TransferMatrix,
    output: &FockOutcome,
    eps: f64,
) -> Result<TransitionAmplitude> {
    let direction = if fock_rank(&input.counts) <= fock_rank(&output.counts) {
        Direction::Forward
    } else {
        Direction::Reversed
    };
    transition_amplitude_directed(input, circuit, output, eps, direction)
}

/// [`transition_amplitude`] with the evaluation direction fixed by the caller.
pub fn transition_amplitude_directed(
    input: &FockOutcome,
    circuit: &TransferMatrix,
    output: &FockOutcome,
    eps: f64,
    direction: Direction,
) -> Result<TransitionAmplitude> {
    check_eps(eps)?;
    let m = circuit.modes();
    for o in [input, output] {
        if o.modes() != m {
            return Err(Error::Dimension {
                expected: m,
                found: o.modes(),
            });
        }
    }
    let (source, target, transfer) = match direction {
        Direction::Forward => (input, output, circuit.clone()),
        Direction::Reversed => (output, input, circuit.adjoint()),
    };
    let rank = fock_rank(&source.counts);
    if input.total() != output.total() {
        return Ok(TransitionAmplitude {
            value: c(0.0, 0.0),
            direction,
            rank,
            certified_error: 0.0,
        });
    }
    let prepared = fock_product_construction(&source.counts, eps)?;
    let evolved = apply_transfer(&prepared, &transfer)?;
    let value = fock_amplitude(&evolved, target)?;
    let scale = fock_amplitude_magnitude(&evolved, target);
    let value = match direction {
        Direction::Forward => value,
        Direction::Reversed => value.conj(),
    };
    Ok(TransitionAmplitude {
        value,
        direction,
        rank,
        certified_error: 64.0 * f64::EPSILON * scale.max(1.0),
    })
}

/// `<n_1..n_p| psi>` on the first `p` modes, leaving an unnormalized state
/// on the remaining `m - p` modes.
pub fn project_fock_partial(psi: &CoherentSuperposition, partial: &[usize]) -> Result<CoherentSuperposition> {
    let m = psi.modes();
    let p = partial.len();
    if p >= m {
        return Err(Error::Dimension { expected: m - 1, found: p });
    }
    check_counts(partial)?;
    let inv = inverse_sqrt_factorials(partial);
    let rest = m - p;
    let mut amplitudes = Vec::with_capacity(psi.rank());
    let mut labels = Vec::with_capacity(psi.rank() * rest);
    for (amp, label) in psi.terms() {
        amplitudes.push(amp * fock_factor(&label[..p], partial, &inv));
        labels.extend_from_slice(&label[p..]);
    }
    Ok(CoherentSuperposition::from_raw(rest, amplitudes, labels))
}

/// `<n|psi>` on a single `mode`, anywhere in the register.
pub fn project_mode_fock(psi: &CoherentSuperposition, mode: usize, n: usize) -> Result<CoherentSuperposition> {
    let m = psi.modes();
    if mode >= m {
        return Err(Error::Index { index: mode, modes: m });
    }
    if m == 1 {
        return Err(Error::Dimension { expected: 2, found: 1 });
    }
    check_counts(&[n])?;
    let inv = inverse_sqrt_factorials(&[n]);
    let mut amplitudes = Vec::with_capacity(psi.rank());
    let mut labels = Vec::with_capacity(psi.rank() * (m - 1));
    for (amp, label) in psi.terms() {
        amplitudes.push(amp * fock_factor(&label[mode..mode + 1], &[n], &inv));
        labels.extend_from_slice(&label[..mode]);
        labels.extend_from_slice(&label[mode + 1..]);
    }
    Ok(CoherentSuperposition::from_raw(m - 1, amplitudes, labels))
}

/// `psi = U |input>`, for the linear-cost reversed norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ReversedSource {
    pub input: FockOutcome,
    pub transfer: TransferMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionMethod {
    /// Gram sum of the projected state, `O((m - p) k^2)`.
    Direct,
    /// `<psi| (|n><n| (x) I) |psi>` evaluated right to left with `|n>`
    /// re-decomposed at `eps`.
    ///
    /// With a `source`, the bra is `<input| U^dag`, which costs
    /// `O(m^2 k prod(n_j + 1))` and is exact in the input's photon-number
    /// sector. Without one the final overlap is a Gram sum and the result
    /// carries an `O(eps^(n+1))` error from the re-decomposition.
    Reversed {
        eps: f64,
        rank_cap: usize,
        source: Option<ReversedSource>,
    },
}

impl ProjectionMethod {
    pub fn reversed(eps: f64) -> Self {
        ProjectionMethod::Reversed {
            eps,
            rank_cap: DEFAULT_RANK_CAP,
            source: None,
        }
    }
}

/// `|| <n_1..n_p|psi> ||^2`.
pub fn projected_norm(psi: &CoherentSuperposition, partial: &[usize], method: &ProjectionMethod) -> Result<f64> {
    let m = psi.modes();
    let p = partial.len();
    if p > m {
        return Err(Error::Dimension { expected: m, found: p });
    }
    if p == m {
        return fock_probability(psi, &FockOutcome::new(partial.to_vec()));
    }
    match method {
        ProjectionMethod::Direct => Ok(norm_squared(&project_fock_partial(psi, partial)?)),
        ProjectionMethod::Reversed { eps, rank_cap, source } => {
            let grown = psi.rank().saturating_mul(fock_rank(partial));
            if grown > *rank_cap {
                return Err(Error::ResourceCap(format!(
                    "reversed projection needs rank {grown} > cap {rank_cap}; use the direct method"
                )));
            }
            let projected = project_fock_partial(psi, partial)?;
            let kets = fock_product_construction(partial, *eps)?;
            let phi = tensor(&kets, &projected);
            let value = match source {
                Some(src) => {
                    if src.transfer.modes() != m || src.input.modes() != m {
                        return Err(Error::Dimension {
                            expected: m,
                            found: src.transfer.modes(),
                        });
                    }
                    let back = apply_transfer(&phi, &src.transfer.adjoint())?;
                    fock_amplitude(&back, &src.input)?.re
                }
                None => crate::state::inner_product(psi, &phi)?.re,
            };
            Ok(value.max(0.0))
        }
    }
}

/// Seeded sampler settings shared by the Metropolis, conditional and
/// Monte-Carlo routines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    /// Metropolis steps or Monte-Carlo draws.
    pub steps: usize,
    /// Polydisk radius for Monte-Carlo norms.
    pub radius: f64,
    /// Fixed photon number, when the state conserves it.
    pub total_photons: Option<usize>,
    /// Per-mode photon cutoff when photon number is not fixed.
    pub cutoff: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            steps: 2000,
            radius: 3.0,
            total_photons: None,
            cutoff: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be at least 1".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        Ok(())
    }

    /// Independent generator for stream `stream` of this seed.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Final state of one Metropolis chain.
#[derive(Debug, Clone, PartialEq)]
pub struct MetropolisRun {
    pub outcome: FockOutcome,
    pub acceptance_rate: f64,
}

/// `delta >= 1` with `P(delta) = 2^-delta`.
fn geometric_half<R: Rng>(rng: &mut R) -> usize {
    let mut delta = 1;
    while rng.random_bool(0.5) {
        delta += 1;
    }
    delta
}

fn random_outcome<R: Rng>(rng: &mut R, m: usize, total: Option<usize>, cutoff: usize) -> Vec<usize> {
    match total {
        Some(n) => {
            let mut counts = vec![0; m];
            for _ in 0..n {
                counts[rng.random_range(0..m)] += 1;
            }
            counts
        }
        None => (0..m).map(|_| rng.random_range(0..=cutoff)).collect(),
    }
}

/// Symmetric local move, or `None` when it would leave the allowed set
/// (the chain then stays put).
fn propose<R: Rng>(rng: &mut R, current: &[usize], total: Option<usize>, cutoff: usize) -> Option<Vec<usize>> {
    let m = current.len();
    let delta = geometric_half(rng);
    let mut next = current.to_vec();
    match total {
        Some(_) => {
            if m < 2 {
                return None;
            }
            let from = rng.random_range(0..m);
            let mut to = rng.random_range(0..m - 1);
            if to >= from {
                to += 1;
            }
            if current[from] < delta {
                return None;
            }
            next[from] -= delta;
            next[to] += delta;
        }
        None => {
            let mode = rng.random_range(0..m);
            if rng.random_bool(0.5) {
                if current[mode] + delta > cutoff {
                    return None;
                }
                next[mode] += delta;
            } else {
                if current[mode] < delta {
                    return None;
                }
                next[mode] -= delta;
            }
        }
    }
    Some(next)
}

fn chain_space(psi: &CoherentSuperposition, cfg: &SamplerConfig) -> Result<usize> {
    match (cfg.total_photons, cfg.cutoff) {
        (Some(n), _) => Ok(n),
        (None, Some(cut)) => Ok(cut),
        (None, None) => Err(Error::InvalidParameter(format!(
            "Metropolis on {} modes needs either a fixed photon number or a cutoff",
            psi.modes()
        ))),
    }
}

/// Outcome near the per-mode mean photon numbers `sum_i |c_i|^2 |alpha_ij|^2 / sum_i |c_i|^2`,
/// used when random starts all land on zero probability.
fn mean_photon_guess(psi: &CoherentSuperposition, total: Option<usize>, cutoff: usize) -> Vec<usize> {
    let m = psi.modes();
    let weight: f64 = psi.amplitudes().iter().map(|a| a.norm_sqr()).sum();
    let mut means = vec![0.0; m];
    for (amp, label) in psi.terms() {
        for (mean, a) in means.iter_mut().zip(label) {
            *mean += amp.norm_sqr() * a.norm_sqr() / weight;
        }
    }
    let mut counts: Vec<usize> = means.iter().map(|x| (x.round() as usize).min(cutoff)).collect();
    if let Some(n) = total {
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..n {
            let j = (0..m)
                .max_by(|&a, &b| {
                    let da = means[a] - counts[a] as f64;
                    let db = means[b] - counts[b] as f64;
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("at least one mode");
            counts[j] += 1;
        }
    }
    counts
}

/// Runs chain `stream` for `cfg.steps` steps.
pub fn metropolis_run(psi: &CoherentSuperposition, cfg: &SamplerConfig, stream: u64) -> Result<MetropolisRun> {
    cfg.validate()?;
    let cutoff = chain_space(psi, cfg)?;
    let m = psi.modes();
    let mut rng = cfg.rng(stream);
    let prob = |counts: &[usize]| -> Result<f64> { fock_probability(psi, &FockOutcome::new(counts.to_vec())) };

    let mut current = Vec::new();
    let mut p_current = 0.0;
    for _ in 0..INIT_ATTEMPTS {
        current = random_outcome(&mut rng, m, cfg.total_photons, cutoff);
        p_current = prob(&current)?;
        if p_current > 0.0 {
            break;
        }
    }
    if !(p_current > 0.0) {
        current = mean_photon_guess(psi, cfg.total_photons, cutoff);
        p_current = prob(&current)?;
    }
    if !(p_current > 0.0) {
        return Err(Error::Initialization(format!(
            "no outcome with nonzero probability after {INIT_ATTEMPTS} random starts"
        )));
    }

    let mut accepted = 0usize;
    let mut rejected_run = 0usize;
    for _ in 0..cfg.steps {
        let proposal = propose(&mut rng, &current, cfg.total_photons, cutoff);
        let u: f64 = rng.random();
        let moved = match proposal {
            Some(next) => {
                let p_next = prob(&next)?;
                if p_next >= p_current || u * p_current < p_next {
                    current = next;
                    p_current = p_next;
                    true
                } else {
                    false
                }
            }
            None => false,
        };
        if moved {
            accepted += 1;
            rejected_run = 0;
        } else {
            rejected_run += 1;
            if rejected_run >= RESTART_AFTER {
                let fresh = random_outcome(&mut rng, m, cfg.total_photons, cutoff);
                let p_fresh = prob(&fresh)?;
                if p_fresh > 0.0 {
                    current = fresh;
                    p_current = p_fresh;
                }
                rejected_run = 0;
            }
        }
    }
    Ok(MetropolisRun {
        outcome: FockOutcome::new(current),
        acceptance_rate: accepted as f64 / cfg.steps as f64,
    })
}

pub fn metropolis_sample(psi: &CoherentSuperposition, cfg: &SamplerConfig) -> Result<FockOutcome> {
    Ok(metropolis_run(psi, cfg, 0)?.outcome)
}

/// `count` independent chains, chain `i` on stream `i`.
pub fn metropolis_samples(psi: &CoherentSuperposition, cfg: &SamplerConfig, count: usize) -> Result<Vec<MetropolisRun>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| metropolis_run(psi, cfg, i))
        .collect()
}

/// How conditional probabilities are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    /// Gram sums.
    Exact,
    /// [`estimate_norm_mc`] with the config's radius and step count.
    MonteCarlo,
    /// `sum_i |c_i|^2 |factor_i|^2`; only valid for near-orthogonal terms.
    AssumeOrthogonal,
}

/// Largest `|<alpha_i|alpha_j>|` over distinct term pairs.
pub fn max_term_overlap(psi: &CoherentSuperposition) -> f64 {
    let k = psi.rank();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            worst = worst.max(overlap_slices(psi.label(i), psi.label(j)).norm());
        }
    }
    worst
}

const ORTHOGONAL_TOL: f64 = 1e-6;

fn state_norm<R: Rng>(state: &CoherentSuperposition, method: NormMethod, cfg: &SamplerConfig, rng: &mut R) -> f64 {
    match method {
        NormMethod::Exact => norm_squared(state),
        NormMethod::AssumeOrthogonal => state.amplitudes().iter().map(|a| a.norm_sqr()).sum(),
        NormMethod::MonteCarlo => mc_norm_with(state, cfg.radius, cfg.steps, rng).estimate.max(0.0),
    }
}

/// Draws `n_1`, then `n_2` from the normalized conditional state, and so on.
pub fn conditional_sample(
    psi: &CoherentSuperposition,
    cfg: &SamplerConfig,
    method: NormMethod,
) -> Result<FockOutcome> {
    conditional_draw(psi, cfg, method, 0)
}

/// `count` draws, draw `i` on stream `i`.
pub fn conditional_samples(
    psi: &CoherentSuperposition,
    cfg: &SamplerConfig,
    method: NormMethod,
    count: usize,
) -> Result<Vec<FockOutcome>> {
    if method == NormMethod::AssumeOrthogonal {
        check_orthogonal(psi)?;
    }
    (0..count as u64)
        .into_par_iter()
        .map(|i| conditional_draw(psi, cfg, method, i))
        .collect()
}

fn check_orthogonal(psi: &CoherentSuperposition) -> Result<()> {
    let worst = max_term_overlap(psi);
    if worst >= ORTHOGONAL_TOL {
        return Err(Error::NotOrthogonal { max_overlap: worst });
    }
    Ok(())
}

fn conditional_draw(
    psi: &CoherentSuperposition,
    cfg: &SamplerConfig,
    method: NormMethod,
    stream: u64,
) -> Result<FockOutcome> {
    cfg.validate()?;
    if method == NormMethod::AssumeOrthogonal && stream == 0 {
        check_orthogonal(psi)?;
    }
    let m = psi.modes();
    let mut rng = cfg.rng(stream);
    let mut remaining_photons = cfg.total_photons;
    let mut state = psi.clone();
    let mut norm = state_norm(&state, method, cfg, &mut rng);
    let mut counts = Vec::with_capacity(m);
    for mode in 0..m {
        let last = mode + 1 == m;
        let cap = match (remaining_photons, cfg.cutoff) {
            (Some(n), _) => n,
            (None, Some(cut)) => cut,
            (None, None) => AUTO_CUTOFF_CAP,
        };
        let r: f64 = rng.random();
        let mut probs = Vec::with_capacity(cap + 1);
        let mut projected = Vec::with_capacity(cap + 1);
        let mut cumulative = 0.0;
        for n in 0..=cap {
            let (p, next) = if last && method == NormMethod::AssumeOrthogonal {
                let inv = inverse_sqrt_factorials(&[n]);
                let p = state
                    .terms()
                    .map(|(amp, label)| (amp * fock_factor(label, &[n], &inv)).norm_sqr())
                    .sum::<f64>();
                (p, None)
            } else if last {
                let amp = fock_amplitude(&state, &FockOutcome::new(vec![n]))?;
                (amp.norm_sqr(), None)
            } else {
                let next = project_fock_partial(&state, &[n])?;
                let p = state_norm(&next, method, cfg, &mut rng);
                (p, Some(next))
            };
            let p = p / norm;
            cumulative += p;
            probs.push(p);
            projected.push(next);
            if remaining_photons.is_none() && cfg.cutoff.is_none() && 1.0 - cumulative < TAIL_TARGET {
                break;
            }
        }
        if remaining_photons.is_none() {
            let tail = 1.0 - cumulative;
            if tail > TAIL_LIMIT {
                return Err(Error::CutoffTooSmall { tail });
            }
        }
        // With a fixed photon number the probabilities are renormalized over
        // the admissible counts, which samples the exact photon-number sector.
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate(format!("mode {mode} has no admissible outcome")));
        }
        let threshold = r * total;
        let mut acc = 0.0;
        let mut chosen = probs.len() - 1;
        for (n, p) in probs.iter().enumerate() {
            acc += p;
            if acc > threshold {
                chosen = n;
                break;
            }
        }
        counts.push(chosen);
        if let Some(rem) = remaining_photons.as_mut() {
            *rem -= chosen;
        }
        if !last {
            state = projected.swap_remove(chosen).expect("projection kept for inner modes");
            norm = probs[chosen] * norm;
            if !(norm > 0.0) {
                norm = state_norm(&state, method, cfg, &mut rng);
            }
        }
    }
    Ok(FockOutcome::new(counts))
}

/// Monte-Carlo norm estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloNorm {
    pub estimate: f64,
    pub stderr: f64,
    /// Sample standard deviation of `L^{2m} |<beta|psi>|^2`.
    pub stdev: f64,
}

fn disk_point<R: Rng>(rng: &mut R, radius: f64) -> Complex64 {
    let r = radius * rng.random::<f64>().sqrt();
    Complex64::from_polar(r, 2.0 * std::f64::consts::PI * rng.random::<f64>())
}

fn mc_norm_with<R: Rng>(psi: &CoherentSuperposition, radius: f64, draws: usize, rng: &mut R) -> MonteCarloNorm {
    let m = psi.modes();
    let scale = radius.powi(2 * m as i32);
    let mut beta = vec![c(0.0, 0.0); m];
    let mut values = Vec::with_capacity(draws);
    for _ in 0..draws {
        for b in beta.iter_mut() {
            *b = disk_point(rng, radius);
        }
        let amp: Complex64 = psi.terms().map(|(a, l)| a * overlap_slices(&beta, l)).sum();
        values.push(scale * amp.norm_sqr());
    }
    summarize(&values)
}

fn summarize(values: &[f64]) -> MonteCarloNorm {
    let n = values.len() as f64;
    let mean = pairwise_sum_real(values) / n;
    let sq: Vec<f64> = values.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = if values.len() > 1 { pairwise_sum_real(&sq) / (n - 1.0) } else { 0.0 };
    let stdev = var.sqrt();
    MonteCarloNorm {
        estimate: mean,
        stderr: stdev / n.sqrt(),
        stdev,
    }
}

/// `||psi||^2` from `cfg.steps` uniform draws over the radius-`cfg.radius` polydisk.
///
/// Draws are generated in fixed-size chunks, one generator stream per chunk,
/// so the result does not depend on the thread count.
pub fn estimate_norm_mc(psi: &CoherentSuperposition, cfg: &SamplerConfig) -> Result<MonteCarloNorm> {
    cfg.validate()?;
    if cfg.steps < 2 {
        return Err(Error::InvalidParameter("Monte-Carlo norm needs at least 2 draws".into()));
    }
    let m = psi.modes();
    let scale = cfg.radius.powi(2 * m as i32);
    let chunks = cfg.steps.div_ceil(MC_CHUNK);
    let values: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = cfg.rng(chunk as u64);
            let len = MC_CHUNK.min(cfg.steps - chunk * MC_CHUNK);
            let mut beta = vec![c(0.0, 0.0); m];
            (0..len)
                .map(|_| {
                    for b in beta.iter_mut() {
                        *b = disk_point(&mut rng, cfg.radius);
                    }
                    let amp: Complex64 = psi.terms().map(|(a, l)| a * overlap_slices(&beta, l)).sum();
                    scale * amp.norm_sqr()
                })
                .collect()
        })
        .collect();
    let flat: Vec<f64> = values.into_iter().flatten().collect();
    Ok(summarize(&flat))
}

/// Doubles the radius from 2 until two successive estimates agree within
/// three combined standard errors.
pub fn select_radius(psi: &CoherentSuperposition, cfg: &SamplerConfig) -> Result<(f64, MonteCarloNorm)> {
    let mut radius = 2.0;
    let mut previous = estimate_norm_mc(psi, &SamplerConfig { radius, ..cfg.clone() })?;
    for _ in 0..8 {
        let next_radius = 2.0 * radius;
        let next = estimate_norm_mc(psi, &SamplerConfig { radius: next_radius, ..cfg.clone() })?;
        let combined = (previous.stderr.powi(2) + next.stderr.powi(2)).sqrt();
        if (next.estimate - previous.estimate).abs() < 3.0 * combined {
            return Ok((next_radius, next));
        }
        radius = next_radius;
        previous = next;
    }
    log::warn!("radius selection did not converge; returning L = {radius}");
    Ok((radius, previous))
}

/// One line of sampler output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub outcome: Vec<usize>,
    pub seed: u64,
    pub method: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::{decompose_fock, decompose_fock_product, fidelity};
    use crate::linear_optics::{beamsplitter_matrix, haar_random_transfer};
    use crate::state::{inner_product, normalize};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn coherent(values: &[Complex64]) -> CoherentSuperposition {
        CoherentSuperposition::coherent(CoherentLabel::new(values.to_vec()).unwrap())
    }

    fn out(v: &[usize]) -> FockOutcome {
        FockOutcome::new(v.to_vec())
    }

    #[test]
    fn outcome_enumeration() {
        let all = fixed_photon_outcomes(3, 3);
        assert_eq!(all.len(), 10);
        assert_eq!(all[0], out(&[3, 0, 0]));
        assert!(all.iter().all(|o| o.total() == 3));
        assert_eq!(fixed_photon_outcomes(0, 4), vec![out(&[0, 0, 0, 0])]);
    }

    #[test]
    fn fock_amplitude_examples() {
        let vac = CoherentSuperposition::vacuum(3);
        assert_eq!(fock_amplitude(&vac, &out(&[0, 0, 0])).unwrap(), c(1.0, 0.0));
        let one = coherent(&[c(1.0, 0.0)]);
        assert_relative_eq!(
            fock_amplitude(&one, &out(&[2])).unwrap().re,
            (-0.5f64).exp() / 2f64.sqrt(),
            epsilon = 1e-15
        );
        assert_relative_eq!(fock_amplitude(&one, &out(&[2])).unwrap().re, 0.42888, epsilon = 1e-5);
        assert!(matches!(fock_amplitude(&one, &out(&[171])), Err(Error::Range(_))));
        assert!(fock_amplitude(&one, &out(&[1, 1])).is_err());
    }

    #[test]
    fn hong_ou_mandel() {
        let input = decompose_fock_product(&[1, 1], 0.2).unwrap();
        let bs = beamsplitter_matrix(PI / 2.0, 0.0, 0, 1, 2).unwrap();
        let evolved = apply_transfer(&input, &bs).unwrap();
        assert!(fock_amplitude(&evolved, &out(&[1, 1])).unwrap().norm() < 1e-3);
    }

    #[test]
    fn transition_examples() {
        let u = haar_random_transfer(4, 3).unwrap();
        let zero = transition_amplitude(&out(&[1, 0, 0, 0]), &u, &out(&[1, 1, 0, 0]), 0.2).unwrap();
        assert_eq!(zero.value, c(0.0, 0.0));

        let t = transition_amplitude(&out(&[1, 1, 1, 1]), &u, &out(&[4, 0, 0, 0]), 0.2).unwrap();
        assert_eq!(t.direction, Direction::Reversed);
        assert_eq!(t.rank, 5);
        let fwd = transition_amplitude_directed(&out(&[1, 1, 1, 1]), &u, &out(&[4, 0, 0, 0]), 0.2, Direction::Forward).unwrap();
        assert_eq!(fwd.rank, 16);
        assert!((t.value - fwd.value).norm() <= 10.0 * (t.certified_error + fwd.certified_error));

        let id = TransferMatrix::identity(2);
        let t = transition_amplitude(&out(&[1, 0]), &id, &out(&[1, 0]), 0.2).unwrap();
        assert!((t.value - 1.0).norm() < 1e-12);
    }

    #[test]
    fn coherent_amplitude_examples() {
        let a = coherent(&[c(0.3, 0.1), c(-0.2, 0.5)]);
        let label = CoherentLabel::new(a.label(0).to_vec()).unwrap();
        assert!((coherent_amplitude(&a, &label).unwrap() - 1.0).norm() < 1e-15);
        let vac = CoherentSuperposition::vacuum(1);
        let one = CoherentLabel::new(vec![c(1.0, 0.0)]).unwrap();
        assert_relative_eq!(coherent_amplitude(&vac, &one).unwrap().re, (-0.5f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn projection_examples() {
        let phi = decompose_fock(2, 0.3).unwrap();
        let product = tensor(&CoherentSuperposition::vacuum(2), &phi);
        let projected = project_fock_partial(&product, &[0, 0]).unwrap();
        assert_eq!(projected.labels_flat(), phi.labels_flat());
        assert_eq!(projected.amplitudes(), phi.amplitudes());
        assert!(project_fock_partial(&product, &[0, 0, 0]).is_err());

        let input = decompose_fock_product(&[1, 0], 0.2).unwrap();
        let bs = beamsplitter_matrix(PI / 2.0, 0.0, 0, 1, 2).unwrap();
        let split = apply_transfer(&input, &bs).unwrap();
        let rest = normalize(&project_fock_partial(&split, &[0]).unwrap()).unwrap();
        assert!(fidelity(&rest, &decompose_fock(1, 0.01).unwrap()).unwrap() > 0.999);
    }

    #[test]
    fn projection_completeness() {
        let psi = CoherentSuperposition::from_parts(
            2,
            vec![c(0.6, 0.0), c(0.0, 0.5)],
            vec![c(0.3, 0.1), c(-0.2, 0.2), c(-0.1, 0.0), c(0.4, -0.3)],
        )
        .unwrap();
        let total: f64 = (0..=30)
            .map(|n| projected_norm(&psi, &[n], &ProjectionMethod::Direct).unwrap())
            .sum();
        assert_relative_eq!(total, norm_squared(&psi), epsilon = 1e-6);
    }

    #[test]
    fn projected_norm_full_and_half_two() {
        let psi = decompose_fock_product(&[1, 2], 0.2).unwrap();
        let full = projected_norm(&psi, &[1, 2], &ProjectionMethod::Direct).unwrap();
        assert_eq!(full, fock_probability(&psi, &out(&[1, 2])).unwrap());

        let half = decompose_fock(2, 0.35).unwrap().scale(c(0.5, 0.0));
        let two = tensor(&half, &CoherentSuperposition::vacuum(1));
        let p = projected_norm(&two, &[2], &ProjectionMethod::Direct).unwrap();
        let infidelity = 1.0 - crate::decompose::fock_fidelity(2, 0.35).unwrap();
        assert!((p - 0.25).abs() <= 1e-6 + 0.25 * infidelity, "{p}");
    }

    #[test]
    fn reversed_norm_with_source_is_exact_sector() {
        let u = haar_random_transfer(3, 11).unwrap();
        let input = out(&[1, 1, 0]);
        let raw = fock_product_construction(&input.counts, 0.2).unwrap();
        let psi = apply_transfer(&raw, &u).unwrap();
        let method = ProjectionMethod::Reversed {
            eps: 0.2,
            rank_cap: DEFAULT_RANK_CAP,
            source: Some(ReversedSource { input: input.clone(), transfer: u.clone() }),
        };
        // exact conditional weight from enumerating the two-photon sector
        for n in 0..=2 {
            let exact: f64 = fixed_photon_outcomes(2, 3)
                .iter()
                .filter(|o| o.counts[0] == n)
                .map(|o| transition_amplitude(&input, &u, o, 0.2).unwrap().value.norm_sqr())
                .sum();
            let reversed = projected_norm(&psi, &[n], &method).unwrap();
            assert!((reversed - exact).abs() < 1e-12, "n={n} {reversed} {exact}");
        }
        let capped = ProjectionMethod::Reversed { eps: 0.2, rank_cap: 3, source: None };
        assert!(matches!(projected_norm(&psi, &[1], &capped), Err(Error::ResourceCap(_))));
    }

    #[test]
    fn metropolis_vacuum() {
        let cfg = SamplerConfig { total_photons: Some(0), steps: 50, ..Default::default() };
        let vac = CoherentSuperposition::vacuum(3);
        assert_eq!(metropolis_sample(&vac, &cfg).unwrap(), out(&[0, 0, 0]));
        let loose = SamplerConfig { cutoff: Some(3), steps: 200, ..Default::default() };
        assert_eq!(metropolis_sample(&vac, &loose).unwrap(), out(&[0, 0, 0]));
    }

    #[test]
    fn metropolis_conserves_photons() {
        let psi = apply_transfer(&decompose_fock_product(&[1, 1, 0], 0.2).unwrap(), &haar_random_transfer(3, 5).unwrap()).unwrap();
        let cfg = SamplerConfig { total_photons: Some(2), steps: 300, seed: 9, ..Default::default() };
        for run in metropolis_samples(&psi, &cfg, 50).unwrap() {
            assert_eq!(run.outcome.total(), 2);
        }
        assert_eq!(metropolis_samples(&psi, &cfg, 5).unwrap(), metropolis_samples(&psi, &cfg, 5).unwrap());
    }

    #[test]
    fn proposals_are_symmetric() {
        // Estimate q(a -> b) and q(b -> a) over all 2-mode, 3-photon pairs.
        let states: Vec<Vec<usize>> = (0..=3).map(|k| vec![k, 3 - k]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let trials = 200_000;
        let mut q = [[0usize; 4]; 4];
        for (i, s) in states.iter().enumerate() {
            for _ in 0..trials {
                if let Some(next) = propose(&mut rng, s, Some(3), 3) {
                    q[i][next[0]] += 1;
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    let (a, b) = (q[i][j] as f64 / trials as f64, q[j][i] as f64 / trials as f64);
                    assert!((a - b).abs() < 0.005, "{i}->{j}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn conditional_vacuum_and_splitter() {
        let vac = CoherentSuperposition::vacuum(2);
        let cfg = SamplerConfig { total_photons: Some(0), ..Default::default() };
        assert_eq!(conditional_sample(&vac, &cfg, NormMethod::Exact).unwrap(), out(&[0, 0]));
        let loose = SamplerConfig::default();
        assert_eq!(conditional_sample(&vac, &loose, NormMethod::Exact).unwrap(), out(&[0, 0]));

        let input = decompose_fock_product(&[1, 0], 0.2).unwrap();
        let split = apply_transfer(&input, &beamsplitter_matrix(PI / 2.0, 0.0, 0, 1, 2).unwrap()).unwrap();
        let cfg = SamplerConfig { total_photons: Some(1), seed: 2, ..Default::default() };
        let draws = conditional_samples(&split, &cfg, NormMethod::Exact, 10_000).unwrap();
        let left = draws.iter().filter(|o| o.counts == [1, 0]).count() as f64 / 1e4;
        assert!((left - 0.5).abs() < 0.02, "{left}");
        assert!(draws.iter().all(|o| o.total() == 1));
    }

    #[test]
    fn orthogonal_shortcut_guard() {
        let cat = decompose_fock(1, 0.2).unwrap();
        let cfg = SamplerConfig { cutoff: Some(5), ..Default::default() };
        assert!(matches!(
            conditional_samples(&cat, &cfg, NormMethod::AssumeOrthogonal, 3),
            Err(Error::NotOrthogonal { .. })
        ));
        let far = CoherentSuperposition::from_parts(
            2,
            vec![c(0.6, 0.0), c(0.8, 0.0)],
            vec![c(4.0, 0.0), c(0.0, 0.0), c(-4.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        let cfg = SamplerConfig { cutoff: Some(40), ..Default::default() };
        let draws = conditional_samples(&far, &cfg, NormMethod::AssumeOrthogonal, 200).unwrap();
        assert!(draws.iter().all(|o| o.counts[1] == 0));
    }

    #[test]
    fn cutoff_too_small() {
        let bright = coherent(&[c(3.0, 0.0)]);
        let cfg = SamplerConfig { cutoff: Some(2), ..Default::default() };
        assert!(matches!(conditional_sample(&bright, &cfg, NormMethod::Exact), Err(Error::CutoffTooSmall { .. })));
    }

    #[test]
    fn mc_norm_vacuum() {
        let cfg = SamplerConfig { radius: 3.0, steps: 100_000, seed: 4, ..Default::default() };
        let est = estimate_norm_mc(&CoherentSuperposition::vacuum(1), &cfg).unwrap();
        assert!((est.estimate - 1.0).abs() < 3.0 * est.stderr + (-9.0f64).exp(), "{est:?}");
        assert_eq!(est, estimate_norm_mc(&CoherentSuperposition::vacuum(1), &cfg).unwrap());
    }

    #[test]
    fn mc_norm_z_scores() {
        let psi = decompose_fock(1, 0.3).unwrap().scale(c(0.5, 0.0));
        let exact = norm_squared(&psi);
        for seed in 0..20 {
            let cfg = SamplerConfig { radius: 5.0, steps: 20_000, seed, ..Default::default() };
            let est = estimate_norm_mc(&psi, &cfg).unwrap();
            let z = (est.estimate - exact) / est.stderr;
            assert!(z.abs() < 4.0, "seed {seed}: z = {z}");
        }
    }

    #[test]
    fn radius_selection_converges() {
        let psi = coherent(&[c(0.5, 0.0)]);
        let cfg = SamplerConfig { steps: 20_000, seed: 1, ..Default::default() };
        let (radius, est) = select_radius(&psi, &cfg).unwrap();
        assert!(radius >= 4.0);
        assert!((est.estimate - 1.0).abs() < 4.0 * est.stderr + 1e-3);
    }

    fn arb_state(modes: usize, rank: usize) -> impl Strategy<Value = CoherentSuperposition> {
        let cplx = (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(r, i)| c(r, i));
        (prop::collection::vec(cplx.clone(), rank), prop::collection::vec(cplx, rank * modes))
            .prop_map(move |(a, l)| CoherentSuperposition::from_parts(modes, a, l).unwrap())
    }

    proptest! {
        #[test]
        fn direct_and_reversed_agree(psi in arb_state(2, 4), n in 0usize..2) {
            let direct = projected_norm(&psi, &[n], &ProjectionMethod::Direct).unwrap();
            let reversed = projected_norm(&psi, &[n], &ProjectionMethod::reversed(1e-4)).unwrap();
            prop_assert!((direct - reversed).abs() < 1e-8, "{} vs {}", direct, reversed);
        }

        #[test]
        fn coherent_amplitude_is_linear(a in arb_state(2, 2), b in arb_state(2, 3), beta in (-1.0..1.0f64, -1.0..1.0f64)) {
            let label = CoherentLabel::new(vec![c(beta.0, beta.1), c(beta.1, -beta.0)]).unwrap();
            let (w1, w2) = (c(0.3, -0.7), c(-1.1, 0.2));
            let combo = a.scale(w1).superpose(&b.scale(w2)).unwrap();
            let lhs = coherent_amplitude(&combo, &label).unwrap();
            let rhs = w1 * coherent_amplitude(&a, &label).unwrap() + w2 * coherent_amplitude(&b, &label).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-12);
            let rank1 = CoherentSuperposition::coherent(label.clone());
            prop_assert!((lhs - inner_product(&rank1, &combo).unwrap()).norm() < 1e-12);
        }

        #[test]
        fn evolved_sector_is_complete(seed in any::<u64>(), n in 1usize..4) {
            let mut counts = vec![0; 3];
            counts[0] = n;
            let psi = apply_transfer(&fock_product_construction(&counts, 0.2).unwrap(), &haar_random_transfer(3, seed).unwrap()).unwrap();
            let total: f64 = fixed_photon_outcomes(n, 3).iter().map(|o| fock_probability(&psi, o).unwrap()).sum();
            prop_assert!((total - 1.0).abs() < 1e-6);
        }

        #[test]
        fn transition_directions_agree(seed in any::<u64>(), split in 0usize..4) {
            let u = haar_random_transfer(3, seed).unwrap();
            let input = out(&[1, 1, 1]);
            let outcome = fixed_photon_outcomes(3, 3)[split].clone();
            let f = transition_amplitude_directed(&input, &u, &outcome, 0.2, Direction::Forward).unwrap();
            let r = transition_amplitude_directed(&input, &u, &outcome, 0.2, Direction::Reversed).unwrap();
            prop_assert!((f.value - r.value).norm() <= 10.0 * (f.certified_error + r.certified_error));
        }
    }
}
