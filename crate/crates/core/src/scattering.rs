//! Direct problem `S = i M⁻¹ − 1`, physicality checks and the quadrature
//! (xp) representation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eom::{build_eom_matrix, EomMatrix};
use crate::error::{Error, Result};
use crate::grid::ModeGrid;
use crate::linalg::{self, complexify, CMatrix, RMatrix, I};
use crate::pumps::PumpSet;

/// Condition number above which a successful inversion is logged as
/// ill-conditioned.
pub const ILL_CONDITIONED: f64 = 1e12;

/// Condition number at or above which `stability_check` reports unstable.
pub const STABLE_CONDITION_LIMIT: f64 = 1e5;

/// Scattering matrix in the interleaved `(a_m, a_m†)` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    data: CMatrix,
    grid: ModeGrid,
}

pub(crate) fn check_dim(data: &CMatrix, grid: &ModeGrid) -> Result<()> {
    let d = grid.dim();
    if data.nrows() != d || data.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: format!("{d}x{d}"),
            found: format!("{}x{}", data.nrows(), data.ncols()),
        });
    }
    Ok(())
}

impl ScatteringMatrix {
    pub fn from_raw(data: CMatrix, grid: ModeGrid) -> Result<Self> {
        check_dim(&data, &grid)?;
        Ok(Self { data, grid })
    }

    pub fn identity(grid: &ModeGrid) -> Self {
        Self {
            data: CMatrix::identity(grid.dim(), grid.dim()),
            grid: *grid,
        }
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

    /// Element `S[a_out, a_in]` between annihilation components.
    pub fn element(&self, out_mode: i64, in_mode: i64) -> Complex64 {
        self.data[(self.grid.ann(out_mode), self.grid.ann(in_mode))]
    }

    /// Transposed matrix (reverses every scattering path).
    pub fn transposed(&self) -> Self {
        Self {
            data: self.data.transpose(),
            grid: self.grid,
        }
    }
}

/// Real 2N×2N scattering matrix in the `(x_m, p_m)` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureScatteringMatrix {
    data: RMatrix,
}

impl QuadratureScatteringMatrix {
    pub fn new(data: RMatrix) -> Result<Self> {
        if !data.is_square() || !data.nrows().is_multiple_of(2) {
            return Err(Error::DimensionMismatch {
                expected: "square matrix of even dimension".into(),
                found: format!("{}x{}", data.nrows(), data.ncols()),
            });
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &RMatrix {
        &self.data
    }
}

/// Gaussian-state covariance matrix in the `(x_m, p_m)` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub data: RMatrix,
    pub hbar: f64,
}

/// Condition number and dynamical stability of an EOM matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// 1-norm condition number; infinite for a singular matrix.
    pub condition_estimate: f64,
    /// Smallest `Im(μ)` over eigenvalues `μ` of `M`. Positive means every
    /// mode of the coupled system decays.
    pub min_decay_rate: f64,
    pub stable: bool,
}

/// `S = i M⁻¹ − 1` by LU decomposition with partial pivoting.
pub fn scattering_from_eom(m: &EomMatrix) -> Result<ScatteringMatrix> {
    let inv = linalg::lu_inverse(m.data())?.ok_or(Error::SingularMatrix)?;
    if inv.condition > ILL_CONDITIONED {
        log::warn!(
            "EOM matrix is ill-conditioned (condition {:.3e}); close to parametric threshold",
            inv.condition
        );
    }
    let n = m.data().nrows();
    let data = inv.matrix * I - CMatrix::identity(n, n);
    Ok(ScatteringMatrix {
        data,
        grid: *m.grid(),
    })
}

/// Pump set to scattering matrix.
pub fn direct_problem(grid: &ModeGrid, pumps: &PumpSet) -> Result<ScatteringMatrix> {
    scattering_from_eom(&build_eom_matrix(grid, pumps)?)
}

/// `K = diag(+1, −1, +1, −1, …)`.
pub fn bogoliubov_metric(dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |r, c| {
        if r != c {
            Complex64::default()
        } else if r % 2 == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(-1.0, 0.0)
        }
    })
}

/// `‖S† K S − K‖₂`.
pub fn bogoliubov_residual(s: &ScatteringMatrix) -> f64 {
    let k = bogoliubov_metric(s.data.nrows());
    let r = s.data.adjoint() * &k * &s.data - k;
    linalg::matrix_two_norm(&r).unwrap_or(f64::INFINITY)
}

/// Block-diagonal `U` taking `(a, a†)` to `(x, p)`, with `x = (a + a†)/√2`
/// and `p = −i (a − a†)/√2`.
pub fn quadrature_transform(dim: usize) -> CMatrix {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut u = CMatrix::zeros(dim, dim);
    for j in (0..dim).step_by(2) {
        u[(j, j)] = Complex64::new(r, 0.0);
        u[(j, j + 1)] = Complex64::new(r, 0.0);
        u[(j + 1, j)] = Complex64::new(0.0, -r);
        u[(j + 1, j + 1)] = Complex64::new(0.0, r);
    }
    u
}

/// Imaginary part of `U S U†` measured by its 2-norm.
pub fn xp_imaginary_residue(s: &ScatteringMatrix) -> f64 {
    let u = quadrature_transform(s.data.nrows());
    let xp = &u * &s.data * u.adjoint();
    linalg::real_two_norm(&xp.map(|z| z.im)).unwrap_or(f64::INFINITY)
}

/// Largest imaginary residue accepted by [`to_xp_basis`].
pub const XP_RESIDUE_LIMIT: f64 = 1e-6;

/// `𝒮 = U S U†`, which is real for any matrix with conjugate-pair structure.
pub fn to_xp_basis(s: &ScatteringMatrix) -> Result<QuadratureScatteringMatrix> {
    let u = quadrature_transform(s.data.nrows());
    let xp = &u * &s.data * u.adjoint();
    let residue = linalg::real_two_norm(&xp.map(|z| z.im))?;
    if residue > XP_RESIDUE_LIMIT {
        return Err(Error::NotPhysical { residue });
    }
    Ok(QuadratureScatteringMatrix {
        data: xp.map(|z| z.re),
    })
}

/// `S = U† 𝒮 U`.
pub fn from_xp_basis(s_xp: &QuadratureScatteringMatrix, grid: &ModeGrid) -> Result<ScatteringMatrix> {
    let c = complexify(&s_xp.data);
    check_dim(&c, grid)?;
    let u = quadrature_transform(c.nrows());
    Ok(ScatteringMatrix {
        data: u.adjoint() * c * u,
        grid: *grid,
    })
}

/// Per-mode symplectic form, blocks `[[0, 1], [−1, 0]]`.
pub fn symplectic_form(dim: usize) -> RMatrix {
    let mut w = RMatrix::zeros(dim, dim);
    for j in (0..dim).step_by(2) {
        w[(j, j + 1)] = 1.0;
        w[(j + 1, j)] = -1.0;
    }
    w
}

/// `‖𝒮ᵀ Ω 𝒮 − Ω‖₂`.
pub fn symplectic_residual(s_xp: &QuadratureScatteringMatrix) -> f64 {
    let w = symplectic_form(s_xp.data.nrows());
    let r = s_xp.data.transpose() * &w * &s_xp.data - w;
    linalg::real_two_norm(&r).unwrap_or(f64::INFINITY)
}

/// Output covariance for vacuum input: `V = (ħ/2) 𝒮 𝒮ᵀ`.
pub fn covariance_from_scattering(s_xp: &QuadratureScatteringMatrix, hbar: f64) -> CovarianceMatrix {
    CovarianceMatrix {
        data: &s_xp.data * s_xp.data.transpose() * (hbar / 2.0),
        hbar,
    }
}

impl CovarianceMatrix {
    /// Eigenvalues of the Hermitian `V + i(ħ/2)Ω`; all are non-negative for
    /// a physical state.
    pub fn uncertainty_eigenvalues(&self) -> Vec<f64> {
        let w = complexify(&symplectic_form(self.data.nrows()));
        let h = complexify(&self.data) + w * Complex64::new(0.0, self.hbar / 2.0);
        linalg::hermitian_eigenvalues(&h)
    }

    pub fn determinant(&self) -> f64 {
        self.data.determinant()
    }
}

/// Condition estimate plus eigenvalue-based stability of `M`.
///
/// Stable means every eigenvalue of `M` has positive imaginary part (all
/// modes decay) and the condition estimate is below
/// [`STABLE_CONDITION_LIMIT`].
pub fn stability_check(m: &EomMatrix) -> StabilityReport {
    let condition_estimate = match linalg::lu_inverse(m.data()) {
        Ok(Some(inv)) => inv.condition,
        _ => f64::INFINITY,
    };
    let min_decay_rate = if m.data().iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        linalg::eigenvalues(m.data())
            .iter()
            .map(|z| z.im)
            .fold(f64::INFINITY, f64::min)
    } else {
        f64::NEG_INFINITY
    };
    StabilityReport {
        condition_estimate,
        min_decay_rate,
        stable: min_decay_rate > 0.0 && condition_estimate < STABLE_CONDITION_LIMIT,
    }
}

/// Largest singular value of a 2×2 complex block.
fn block_magnitude(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> f64 {
    let fro2 = a.norm_sqr() + b.norm_sqr() + c.norm_sqr() + d.norm_sqr();
    let det = (a * d - b * c).norm();
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0);
    ((fro2 + disc.sqrt()) / 2.0).sqrt()
}

/// Mode-level magnitudes: each `(out, in)` 2×2 sub-block collapsed to its
/// largest singular value. Row = output mode, column = input mode, both in
/// grid order.
pub fn mode_magnitudes(s: &CMatrix) -> RMatrix {
    let n = s.nrows() / 2;
    RMatrix::from_fn(n, n, |i, j| {
        let (r, c) = (2 * i, 2 * j);
        block_magnitude(s[(r, c)], s[(r, c + 1)], s[(r + 1, c)], s[(r + 1, c + 1)])
    })
}

/// Which basis the rows of a scattering file are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixBasis {
    Aadag,
    Xp,
}

/// A `{re, im}` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexEntry {
    pub re: f64,
    pub im: f64,
}

pub const INDEX_CONVENTION: &str =
    "row/col 2(m - m_lo) = a_m (x_m in xp basis), 2(m - m_lo) + 1 = a_m^dag (p_m in xp basis); row-major";

/// On-disk scattering matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringFile {
    pub n: usize,
    pub m_lo: i64,
    pub basis: MatrixBasis,
    #[serde(default = "default_convention")]
    pub index_convention: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_offset: Option<f64>,
    pub rows: Vec<Vec<ComplexEntry>>,
}

fn default_convention() -> String {
    INDEX_CONVENTION.to_string()
}

impl ScatteringFile {
    /// Serializes `s` in the requested basis.
    pub fn new(s: &ScatteringMatrix, basis: MatrixBasis) -> Result<Self> {
        let data = match basis {
            MatrixBasis::Aadag => s.data.clone(),
            MatrixBasis::Xp => complexify(&to_xp_basis(s)?.data),
        };
        let grid = s.grid;
        Ok(Self {
            n: grid.n_modes(),
            m_lo: grid.m_lo(),
            basis,
            index_convention: default_convention(),
            delta_hz: Some(grid.delta_hz()),
            gamma_hz: Some(grid.gamma_hz()),
            detuning_offset: Some(grid.detuning_offset()),
            rows: data
                .row_iter()
                .map(|r| r.iter().map(|z| ComplexEntry { re: z.re, im: z.im }).collect())
                .collect(),
        })
    }

    /// Grid described by the file, falling back to `fallback` for any
    /// spacing, coupling or detuning not recorded in it.
    pub fn grid(&self, fallback: &ModeGrid) -> Result<ModeGrid> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be >= 1".into()));
        }
        ModeGrid::new(
            self.m_lo,
            self.m_lo + self.n as i64 - 1,
            self.delta_hz.unwrap_or(fallback.delta_hz()),
            self.gamma_hz.unwrap_or(fallback.gamma_hz()),
            self.detuning_offset.unwrap_or(fallback.detuning_offset()),
        )
    }

    /// Rebuilds the matrix in the `(a, a†)` basis on `grid`.
    pub fn decode(&self, grid: &ModeGrid) -> Result<ScatteringMatrix> {
        let d = 2 * self.n;
        if self.rows.len() != d || self.rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: format!("{d}x{d} rows"),
                found: format!(
                    "{} rows of lengths {:?}",
                    self.rows.len(),
                    self.rows.iter().map(Vec::len).collect::<Vec<_>>()
                ),
            });
        }
        let data = CMatrix::from_fn(d, d, |r, c| {
            let e = self.rows[r][c];
            Complex64::new(e.re, e.im)
        });
        match self.basis {
            MatrixBasis::Aadag => ScatteringMatrix::from_raw(data, *grid),
            MatrixBasis::Xp => {
                let real = QuadratureScatteringMatrix::new(data.map(|z| z.re))?;
                from_xp_basis(&real, grid)
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single_mode() -> ModeGrid {
        ModeGrid::new(0, 0, 1.0, 1.0, 0.0).unwrap()
    }

    fn hf_only(h: f64) -> PumpSet {
        let mut p = PumpSet::new();
        p.set_hf(0, c(h, 0.0));
        p
    }

    #[test]
    fn unpumped_is_identity() {
        let s = direct_problem(&single_mode(), &PumpSet::new()).unwrap();
        assert!((s.data() - CMatrix::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn unpumped_detuned_reflection_has_unit_modulus() {
        let g = ModeGrid::new(-3, 2, 1.0, 1.7, 0.3).unwrap();
        let s = direct_problem(&g, &PumpSet::new()).unwrap();
        for j in 0..g.dim() {
            assert!((s.data()[(j, j)].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn three_db_gain_point() {
        let h = (2f64.sqrt() - 1.0) / 2.0;
        let s = direct_problem(&single_mode(), &hf_only(h)).unwrap();
        assert!((s.data()[(0, 0)].norm() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gain_formula_at_h_02() {
        let s = direct_problem(&single_mode(), &hf_only(0.2)).unwrap();
        let expected = (0.25 + 0.04) / (0.25 - 0.04);
        assert!((s.data()[(0, 0)].norm() - expected).abs() < 1e-12);
        assert!((expected - 1.380952380952381).abs() < 1e-12);
    }

    #[test]
    fn threshold_is_singular() {
        let err = direct_problem(&single_mode(), &hf_only(0.5)).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix));
    }

    #[test]
    fn adjacent_lf_coupling_only() {
        let g = ModeGrid::new(-1, 1, 1.0, 1.0, 0.0).unwrap();
        let g = ModeGrid::new(g.m_lo(), g.m_hi(), 1e-9, 1.0, 0.0).unwrap();
        let mut p = PumpSet::new();
        p.set_lf(1, c(0.3, 0.0));
        let s = direct_problem(&g, &p).unwrap();
        let mag = mode_magnitudes(s.data());
        assert!(mag[(0, 1)] > 1e-3 && mag[(1, 2)] > 1e-3);
        // Second-order paths reach (−1, 1) too; only a↔a† blocks stay empty.
        assert!(s.data()[(g.ann(-1), g.cre(1))].norm() < 1e-14);
    }

    #[test]
    fn bogoliubov_residual_examples() {
        let g = ModeGrid::new(-1, 0, 1.0, 1.0, 0.0).unwrap();
        let id = ScatteringMatrix::identity(&g);
        assert_eq!(bogoliubov_residual(&id), 0.0);
        let two = ScatteringMatrix::from_raw(CMatrix::identity(4, 4) * c(2.0, 0.0), g).unwrap();
        assert!((bogoliubov_residual(&two) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn xp_of_identity_and_squeezer() {
        let g = single_mode();
        let xp = to_xp_basis(&ScatteringMatrix::identity(&g)).unwrap();
        assert!((xp.data() - RMatrix::identity(2, 2)).norm() < 1e-15);

        let (cc, ss) = (1.3f64, 0.4f64);
        let s = CMatrix::from_row_slice(2, 2, &[c(cc, 0.0), c(ss, 0.0), c(ss, 0.0), c(cc, 0.0)]);
        let xp = to_xp_basis(&ScatteringMatrix::from_raw(s.clone(), g).unwrap()).unwrap();
        let expected = RMatrix::from_row_slice(2, 2, &[cc + ss, 0.0, 0.0, cc - ss]);
        assert!((xp.data() - expected).norm() < 1e-14);

        let back = from_xp_basis(&xp, &g).unwrap();
        assert!((back.data() - s).norm() < 1e-14);
    }

    #[test]
    fn broken_pairing_is_not_physical() {
        let g = single_mode();
        let mut s = CMatrix::identity(2, 2);
        s[(0, 1)] = c(1.0, 0.0);
        let err = to_xp_basis(&ScatteringMatrix::from_raw(s, g).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NotPhysical { .. }));
    }

    #[test]
    fn covariance_examples() {
        let id = QuadratureScatteringMatrix::new(RMatrix::identity(2, 2)).unwrap();
        let v = covariance_from_scattering(&id, 2.0);
        assert!((&v.data - RMatrix::identity(2, 2)).norm() < 1e-15);

        let r = 2f64.ln();
        let sq = QuadratureScatteringMatrix::new(RMatrix::from_row_slice(2, 2, &[r.exp(), 0.0, 0.0, (-r).exp()])).unwrap();
        let v = covariance_from_scattering(&sq, 2.0);
        let expected = RMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.25]);
        assert!((&v.data - expected).norm() < 1e-12);
        assert!(v.uncertainty_eigenvalues()[0] > -1e-12);
    }

    #[test]
    fn stability_examples() {
        let g = single_mode();
        let unpumped = crate::eom::build_eom_matrix(&g, &PumpSet::new()).unwrap();
        let rep = stability_check(&unpumped);
        assert!((rep.condition_estimate - 1.0).abs() < 1e-12);
        assert!(rep.stable);

        let near = crate::eom::build_eom_matrix(&g, &hf_only(0.499999)).unwrap();
        assert!(!stability_check(&near).stable);

        let weak = crate::eom::build_eom_matrix(&g, &hf_only(0.1)).unwrap();
        assert!(stability_check(&weak).stable);

        // Above threshold M is invertible again but one mode grows.
        let above = crate::eom::build_eom_matrix(&g, &hf_only(2.0)).unwrap();
        let rep = stability_check(&above);
        assert!(rep.condition_estimate.is_finite());
        assert!(rep.min_decay_rate < 0.0);
        assert!(!rep.stable);
    }

    #[test]
    fn block_magnitude_matches_svd() {
        let s = CMatrix::from_row_slice(2, 2, &[c(0.3, 0.1), c(-0.2, 0.5), c(0.7, 0.0), c(0.1, -0.4)]);
        let svd = s.clone().singular_values().max();
        assert!((mode_magnitudes(&s)[(0, 0)] - svd).abs() < 1e-12);
    }

    #[test]
    fn file_round_trip_both_bases() {
        let g = ModeGrid::new(-1, 1, 1e5, 1.12e8, 0.0).unwrap();
        let mut p = PumpSet::new();
        p.set_lf(1, c(0.02, 0.01));
        p.set_hf(-1, c(0.0, 0.03));
        let s = direct_problem(&g, &p).unwrap();
        for basis in [MatrixBasis::Aadag, MatrixBasis::Xp] {
            let text = ScatteringFile::new(&s, basis).unwrap().to_json().unwrap();
            let file = ScatteringFile::from_json(&text).unwrap();
            let g2 = file.grid(&ModeGrid::with_defaults(1).unwrap()).unwrap();
            assert_eq!(g2, g);
            let back = file.decode(&g2).unwrap();
            assert!((back.data() - s.data()).norm() < 1e-13);
        }
    }

    #[test]
    fn file_rejects_ragged_rows() {
        let text = r#"{"n": 1, "m_lo": 0, "basis": "aadag", "rows": [[{"re":1,"im":0}]]}"#;
        let file = ScatteringFile::from_json(text).unwrap();
        assert!(matches!(
            file.decode(&single_mode()),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
