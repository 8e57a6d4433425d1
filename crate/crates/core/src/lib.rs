//! Simulation of multi-mode linear-optical circuits on finite superpositions
//! of coherent states.

pub mod decompose;
pub mod error;
pub mod fock_oracle;
pub mod input;
pub mod linear_optics;
pub mod measure;
pub mod special;
pub mod state;
pub mod wigner;

pub use num_complex::Complex64;

pub type C64 = Complex64;

pub use error::{Error, Result};
pub use state::{
    inner_product, norm_squared, normalize, overlap, prune, tensor, term_overlaps, CoherentLabel,
    CoherentSuperposition, Pruned, Term,
};
pub use decompose::{
    apply_creation_polynomial, apply_creation_postselect, decompose_fock, decompose_fock_product,
    decompose_fock_vector, decompose_operator_fock, decompose_squeezed_vacuum, fidelity,
    fock_product_construction,
    FockVector, OperatorKernel, SqueezeParams, DEFAULT_EPSILON,
};
pub use linear_optics::{
    apply_annihilation, apply_circuit, apply_displacement, apply_transfer, beamsplitter_matrix,
    compose_circuit, evolve_partitioned, haar_random_transfer, phase_shift_matrix, Circuit,
    CircuitElement, CircuitSummary, CrossTerm, LocalOp, PartitionedState, TransferMatrix,
};
pub use measure::{
    coherent_amplitude, conditional_sample, conditional_samples, estimate_norm_mc,
    fixed_photon_outcomes, fock_amplitude, fock_probability, metropolis_run, metropolis_sample,
    metropolis_samples, project_fock_partial, projected_norm, select_radius, transition_amplitude,
    transition_amplitude_directed, Direction, FockOutcome, MonteCarloNorm, NormMethod,
    ProjectionMethod, ReversedSource, SamplerConfig, TransitionAmplitude,
};
pub use fock_oracle::{
    evolve_fock_exact, evolve_fock_exact_with_cap, fock_dimension, oracle_amplitude,
    oracle_distribution, FockPolyState,
};
pub use wigner::{
    rank_monotone, wigner_fock, wigner_negativity, wigner_offdiag, wigner_superposition,
    NegativityReport, PhasePoint, QuadratureGrid, WignerSource,
};
pub use input::{InputSpec, ModeSpec, PreparedInput, SqueezedSpec};
