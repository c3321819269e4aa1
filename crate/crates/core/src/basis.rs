//! The ±1 coupling matrices `L_k±`, `H_k'±` and the Frobenius inner product
//! under which they are orthogonal.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::ModeGrid;
use crate::linalg::CMatrix;

/// Selects the `+` (amplitude) or `−` (conjugate amplitude) partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

/// A constant 2N×2N matrix with entries in {−1, 0, +1}, stored as triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBasisMatrix {
    entries: Vec<(usize, usize, i8)>,
    dim: usize,
    norm_sq: usize,
}

impl SparseBasisMatrix {
    fn from_entries(entries: Vec<(usize, usize, i8)>, dim: usize) -> Self {
        let norm_sq = entries.len();
        Self {
            entries,
            dim,
            norm_sq,
        }
    }

    pub fn entries(&self) -> &[(usize, usize, i8)] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Squared Frobenius norm `(A, A)`; equals the number of entries.
    pub fn norm_sq(&self) -> usize {
        self.norm_sq
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            out[(r, c)] = Complex64::new(v as f64, 0.0);
        }
        out
    }

    /// `(A, self)` for a dense `A`, touching only the support of `self`.
    pub fn project(&self, a: &CMatrix) -> Complex64 {
        self.entries
            .iter()
            .map(|&(r, c, v)| a[(r, c)] * v as f64)
            .sum()
    }

    /// Exact integer inner product of two basis matrices.
    pub fn inner(&self, other: &SparseBasisMatrix) -> i64 {
        let mut lhs: Vec<_> = self.entries.clone();
        let mut rhs: Vec<_> = other.entries.clone();
        lhs.sort_unstable();
        rhs.sort_unstable();
        let (mut i, mut j, mut acc) = (0, 0, 0i64);
        while i < lhs.len() && j < rhs.len() {
            let (a, b) = ((lhs[i].0, lhs[i].1), (rhs[j].0, rhs[j].1));
            match a.cmp(&b) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += lhs[i].2 as i64 * rhs[j].2 as i64;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Adds `coeff · self` into `out`.
    pub fn accumulate(&self, coeff: Complex64, out: &mut CMatrix) {
        for &(r, c, v) in &self.entries {
            out[(r, c)] += coeff * v as f64;
        }
    }
}

/// Low-frequency (frequency-conversion) basis matrix `L_k±`.
///
/// `L_k+` has +1 at `(a_m, a_{m+k})` and −1 at `(a_m†, a_{m−k}†)`;
/// `L_k−` has +1 at `(a_m, a_{m−k})` and −1 at `(a_m†, a_{m+k}†)`.
pub fn basis_matrix_lf(grid: &ModeGrid, k: i64, sign: Sign) -> Result<SparseBasisMatrix> {
    grid.check_lf(k)?;
    let shift = match sign {
        Sign::Plus => k,
        Sign::Minus => -k,
    };
    let mut entries = Vec::with_capacity(2 * (grid.n_modes() - k as usize));
    for m in grid.modes() {
        if grid.contains(m + shift) {
            entries.push((grid.ann(m), grid.ann(m + shift), 1));
        }
    }
    for m in grid.modes() {
        if grid.contains(m - shift) {
            entries.push((grid.cre(m), grid.cre(m - shift), -1));
        }
    }
    Ok(SparseBasisMatrix::from_entries(entries, grid.dim()))
}

/// High-frequency (squeezing) basis matrix `H_k'±`.
///
/// `H_k'+` has +1 at `(a_m, a_n†)` and `H_k'−` has −1 at `(a_m†, a_n)` for
/// every ordered pair with `m + n = k'`.
pub fn basis_matrix_hf(grid: &ModeGrid, k_prime: i64, sign: Sign) -> Result<SparseBasisMatrix> {
    grid.check_hf(k_prime)?;
    let entries = grid
        .modes()
        .filter(|&m| grid.contains(k_prime - m))
        .map(|m| {
            let n = k_prime - m;
            match sign {
                Sign::Plus => (grid.ann(m), grid.cre(n), 1),
                Sign::Minus => (grid.cre(m), grid.ann(n), -1),
            }
        })
        .collect();
    Ok(SparseBasisMatrix::from_entries(entries, grid.dim()))
}

/// Frobenius inner product `(A, B) = Tr(A Bᵀ)`, plain transpose.
pub fn frobenius_inner(a: &CMatrix, b: &CMatrix) -> Result<Complex64> {
    if a.shape() != b.shape() || !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: format!("square {}x{}", a.nrows(), a.ncols()),
            found: format!("{}x{}", b.nrows(), b.ncols()),
        });
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x * y).sum())
}

/// One pump index with its `+`/`−` basis pair.
#[derive(Debug, Clone)]
pub struct BasisPair {
    pub index: i64,
    pub plus: SparseBasisMatrix,
    pub minus: SparseBasisMatrix,
}

/// All `2(3N − 2)` basis matrices of a grid, built once.
#[derive(Debug, Clone)]
pub struct BasisTable {
    grid: ModeGrid,
    lf: Vec<BasisPair>,
    hf: Vec<BasisPair>,
}

impl BasisTable {
    pub fn new(grid: &ModeGrid) -> Self {
        let lf = grid
            .lf_indices()
            .map(|k| BasisPair {
                index: k,
                plus: basis_matrix_lf(grid, k, Sign::Plus).expect("k in range"),
                minus: basis_matrix_lf(grid, k, Sign::Minus).expect("k in range"),
            })
            .collect();
        let hf = grid
            .hf_indices()
            .map(|k| BasisPair {
                index: k,
                plus: basis_matrix_hf(grid, k, Sign::Plus).expect("k' in range"),
                minus: basis_matrix_hf(grid, k, Sign::Minus).expect("k' in range"),
            })
            .collect();
        Self {
            grid: *grid,
            lf,
            hf,
        }
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    pub fn lf(&self) -> &[BasisPair] {
        &self.lf
    }

    pub fn hf(&self) -> &[BasisPair] {
        &self.hf
    }

    /// Every basis matrix, flattened: LF pairs then HF pairs, `+` before `−`.
    pub fn all(&self) -> Vec<&SparseBasisMatrix> {
        self.lf
            .iter()
            .chain(self.hf.iter())
            .flat_map(|p| [&p.plus, &p.minus])
            .collect()
    }
}
