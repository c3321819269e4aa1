//! Inverse problem: target scattering matrix to pump amplitudes by
//! projection of `ΔM` onto the orthogonal coupling basis.

use num_complex::Complex64;

use crate::basis::{BasisPair, BasisTable};
use crate::eom::{build_eom_matrix, diagonal_matrix, EomMatrix};
use crate::error::{Error, Result};
use crate::grid::ModeGrid;
use crate::linalg::{self, CMatrix, I};
use crate::pumps::PumpSet;
use crate::scattering::{scattering_from_eom, stability_check, ScatteringMatrix};

/// Raw projections `(ΔM, B+)/‖B+‖²` and `(ΔM, B−)/‖B−‖²` for one pump index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionPair {
    pub index: i64,
    pub plus: Complex64,
    pub minus: Complex64,
}

impl ProjectionPair {
    /// Symmetrized amplitude `(P+ + conj(P−))/2`.
    pub fn amplitude(&self) -> Complex64 {
        (self.plus + self.minus.conj()) * 0.5
    }

    /// `|P+ − conj(P−)|`; zero for a physical `ΔM`.
    pub fn asymmetry(&self) -> f64 {
        (self.plus - self.minus.conj()).norm()
    }
}

/// Unsymmetrized projections of `ΔM` for every LF and HF index.
#[derive(Debug, Clone, PartialEq)]
pub struct Projections {
    pub lf: Vec<ProjectionPair>,
    pub hf: Vec<ProjectionPair>,
}

impl Projections {
    pub fn pumps(&self) -> PumpSet {
        let mut p = PumpSet::new();
        for pr in &self.lf {
            p.set_lf(pr.index, pr.amplitude());
        }
        for pr in &self.hf {
            p.set_hf(pr.index, pr.amplitude());
        }
        p
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.lf
            .iter()
            .chain(&self.hf)
            .map(ProjectionPair::asymmetry)
            .fold(0.0, f64::max)
    }
}

/// Recovered pumps together with reconstruction diagnostics.
#[derive(Debug, Clone)]
pub struct InverseSolution {
    pub pumps: PumpSet,
    pub s_reconstructed: ScatteringMatrix,
    /// `‖S_target − S_rec‖₂ / ‖S_target‖₂`.
    pub relative_residual: f64,
    /// Largest `|P+ − conj(P−)|` over all pump indices.
    pub asymmetry: f64,
    /// Condition estimate of the reconstructed EOM matrix.
    pub condition_estimate: f64,
    /// Largest deviation of `diag(M_target)` from the model diagonal.
    pub diagonal_mismatch: f64,
}

/// `M_target = i (S_target + 1)⁻¹` and `ΔM = M_target − M_d`.
pub fn eom_from_scattering(s_target: &ScatteringMatrix, grid: &ModeGrid) -> Result<(EomMatrix, CMatrix)> {
    crate::scattering::check_dim(s_target.data(), grid)?;
    let d = grid.dim();
    let shifted = s_target.data() + CMatrix::identity(d, d);
    let inv = linalg::lu_inverse(&shifted)?.ok_or(Error::SingularTarget)?;
    let m_target = inv.matrix * I;
    let delta = &m_target - diagonal_matrix(grid);
    Ok((EomMatrix::from_raw(m_target, *grid)?, delta))
}

fn project_pair(delta_m: &CMatrix, pair: &BasisPair) -> ProjectionPair {
    ProjectionPair {
        index: pair.index,
        plus: pair.plus.project(delta_m) / pair.plus.norm_sq() as f64,
        minus: pair.minus.project(delta_m) / pair.minus.norm_sq() as f64,
    }
}

/// Raw projections onto a prebuilt basis table.
pub fn project_raw(delta_m: &CMatrix, table: &BasisTable) -> Result<Projections> {
    crate::scattering::check_dim(delta_m, table.grid())?;
    Ok(Projections {
        lf: table.lf().iter().map(|p| project_pair(delta_m, p)).collect(),
        hf: table.hf().iter().map(|p| project_pair(delta_m, p)).collect(),
    })
}

/// Projects `ΔM` onto the coupling basis of `grid`.
pub fn project_pumps(delta_m: &CMatrix, grid: &ModeGrid) -> Result<PumpSet> {
    Ok(project_raw(delta_m, &BasisTable::new(grid))?.pumps())
}

/// Full pump projection pipeline against a cached basis table.
pub fn solve_inverse_with(s_target: &ScatteringMatrix, table: &BasisTable) -> Result<InverseSolution> {
    let grid = table.grid();
    let (_, delta) = eom_from_scattering(s_target, grid)?;
    let proj = project_raw(&delta, table)?;
    let pumps = proj.pumps();

    let diagonal_mismatch = delta
        .diagonal()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);

    let m_rec = build_eom_matrix(grid, &pumps)?;
    let condition_estimate = stability_check(&m_rec).condition_estimate;
    let s_rec = scattering_from_eom(&m_rec).map_err(|e| match e {
        Error::SingularMatrix => Error::SingularReconstruction,
        other => other,
    })?;

    let target_norm = linalg::matrix_two_norm(s_target.data())?;
    if target_norm == 0.0 {
        return Err(Error::ZeroTarget);
    }
    let relative_residual = linalg::matrix_two_norm(&(s_target.data() - s_rec.data()))? / target_norm;

    Ok(InverseSolution {
        pumps,
        s_reconstructed: s_rec,
        relative_residual,
        asymmetry: proj.max_asymmetry(),
        condition_estimate,
        diagonal_mismatch,
    })
}

/// Target scattering matrix to pump set, with reconstruction.
pub fn solve_inverse(s_target: &ScatteringMatrix, grid: &ModeGrid) -> Result<InverseSolution> {
    solve_inverse_with(s_target, &BasisTable::new(grid))
}
