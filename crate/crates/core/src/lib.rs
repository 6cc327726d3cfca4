//! Periodic traveling waves of the Ostrovsky equation
//! `(u_t + u u_x + beta u_xxx)_x = gamma u`, their Whitham modulation
//! matrix, and the Floquet-Bloch spectrum of the linearization near the
//! origin.

// Negated comparisons are how validation rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bloch;
pub mod error;
pub mod evans;
pub mod spectral;
pub mod wave;
pub mod whitham;

pub use bloch::{
    assemble_bloch, kernel_basis, modulation_matrix, pencil_eigs, spectral_curves,
    verify_whitham_link, BlochMatrices, KernelBasis, ModulationMatrix, SpectralCurve,
};
pub use error::{Error, Result};
pub use evans::{monodromy_evans, EvansValue};
pub use spectral::{PeriodicGrid, SpectralField};
pub use wave::{
    continue_family, hamiltonian, modulation_flux, parameter_jet, profile_residual, refine,
    solve_wave, stokes_seed, ModelParams, SolverOptions, StokesExpansion, TravelingWave, WaveJet,
};
pub use whitham::{
    classify, critical_frequency, reduced_whitham_matrix, stokes_lighthill, whitham_matrix,
    Classification, WhithamMatrix,
};
