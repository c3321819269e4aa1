//! Direct and inverse parametric scattering for multi-mode parametric
//! oscillators.
//!
//! A pump waveform made of low-frequency (frequency-conversion) and
//! high-frequency (squeezing) tones defines an equation-of-motion matrix
//! `M` over a comb of modes; its scattering matrix is `S = i M⁻¹ − 1`.
//! The inverse map recovers the tone amplitudes from a target `S` in closed
//! form by projecting `ΔM = M − M_d` onto an orthogonal basis of ±1
//! coupling matrices.

pub mod basis;
pub mod bench;
pub mod designer;
pub mod encoder;
pub mod eom;
pub mod exec;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod ppm;
pub mod pumps;
pub mod scattering;

pub use basis::{basis_matrix_hf, basis_matrix_lf, frobenius_inner, BasisTable, Sign, SparseBasisMatrix};
pub use eom::{build_eom_matrix, EomMatrix};
pub use error::{Error, Result};
pub use grid::ModeGrid;
pub use linalg::{matrix_two_norm, CMatrix, RMatrix};
pub use num_complex::Complex64;
pub use ppm::{eom_from_scattering, project_pumps, solve_inverse, InverseSolution};
pub use pumps::{PumpFile, PumpSet};
pub use scattering::{
    bogoliubov_residual, covariance_from_scattering, direct_problem, from_xp_basis,
    scattering_from_eom, stability_check, to_xp_basis, CovarianceMatrix,
    QuadratureScatteringMatrix, ScatteringFile, ScatteringMatrix, StabilityReport,
};
