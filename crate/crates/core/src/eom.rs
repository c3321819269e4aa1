//! Frequency-domain equation-of-motion matrix `M = M_d + ΔM`.

use num_complex::Complex64;

use crate::basis::{basis_matrix_hf, basis_matrix_lf, Sign};
use crate::error::Result;
use crate::grid::ModeGrid;
use crate::linalg::CMatrix;
use crate::pumps::PumpSet;

/// Dense 2N×2N equation-of-motion matrix in the interleaved `(a_m, a_m†)`
/// ordering, normalized by γ.
#[derive(Debug, Clone, PartialEq)]
pub struct EomMatrix {
    data: CMatrix,
    grid: ModeGrid,
}

impl EomMatrix {
    /// Wraps a raw matrix. The dimension must be `grid.dim()`.
    pub fn from_raw(data: CMatrix, grid: ModeGrid) -> Result<Self> {
        crate::scattering::check_dim(&data, &grid)?;
        Ok(Self { data, grid })
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    pub fn into_inner(self) -> CMatrix {
        self.data
    }
}

/// Complex detuning of the annihilation row of mode `m`: `δ_m + i/2`.
pub fn diagonal_element(grid: &ModeGrid, m: i64) -> Complex64 {
    Complex64::new(grid.detuning(m), 0.5)
}

/// The unpumped diagonal `M_d`: `δ_m + i/2` on `a_m` rows and
/// `−conj(δ_m + i/2)` on `a_m†` rows.
pub fn diagonal_matrix(grid: &ModeGrid) -> CMatrix {
    let mut md = CMatrix::zeros(grid.dim(), grid.dim());
    for m in grid.modes() {
        let d = diagonal_element(grid, m);
        md[(grid.ann(m), grid.ann(m))] = d;
        md[(grid.cre(m), grid.cre(m))] = -d.conj();
    }
    md
}

/// Pump-induced coupling `ΔM = Σ_k (l_k L_k+ + l_k* L_k−) + Σ_k' (h_k' H_k'+ + h_k'* H_k'−)`.
pub fn coupling_matrix(grid: &ModeGrid, pumps: &PumpSet) -> Result<CMatrix> {
    pumps.validate(grid)?;
    let mut dm = CMatrix::zeros(grid.dim(), grid.dim());
    for (k, l) in pumps.lf_iter() {
        basis_matrix_lf(grid, k, Sign::Plus)?.accumulate(l, &mut dm);
        basis_matrix_lf(grid, k, Sign::Minus)?.accumulate(l.conj(), &mut dm);
    }
    for (k, h) in pumps.hf_iter() {
        basis_matrix_hf(grid, k, Sign::Plus)?.accumulate(h, &mut dm);
        basis_matrix_hf(grid, k, Sign::Minus)?.accumulate(h.conj(), &mut dm);
    }
    Ok(dm)
}

pub fn build_eom_matrix(grid: &ModeGrid, pumps: &PumpSet) -> Result<EomMatrix> {
    let data = diagonal_matrix(grid) + coupling_matrix(grid, pumps)?;
    Ok(EomMatrix { data, grid: *grid })
}
