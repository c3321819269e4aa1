//! Dense linear algebra helpers over nalgebra.

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest singular value of `a`.
pub fn matrix_two_norm(a: &CMatrix) -> Result<f64> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.clone().singular_values().max())
}

/// Largest singular value of a real matrix.
pub fn real_two_norm(a: &RMatrix) -> Result<f64> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.clone().singular_values().max())
}

/// Induced 1-norm (max column sum).
pub fn one_norm(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Result of an LU-based inversion.
#[derive(Debug, Clone)]
pub struct Inverse {
    pub matrix: CMatrix,
    /// 1-norm condition number `‖A‖₁ ‖A⁻¹‖₁`.
    pub condition: f64,
}

/// Inverts `a` by LU decomposition with partial pivoting.
///
/// Returns `None` when a pivot vanishes relative to the matrix scale.
pub fn lu_inverse(a: &CMatrix) -> Result<Option<Inverse>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let n = a.nrows();
    let norm = one_norm(a);
    if n == 0 {
        return Ok(Some(Inverse {
            matrix: a.clone(),
            condition: 1.0,
        }));
    }
    if norm == 0.0 {
        return Ok(None);
    }
    let lu = a.clone().lu();
    let tiny = n as f64 * f64::EPSILON * norm;
    if lu.u().diagonal().iter().any(|p| p.norm() <= tiny) {
        return Ok(None);
    }
    let Some(inv) = lu.try_inverse() else {
        return Ok(None);
    };
    if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Ok(None);
    }
    let condition = norm * one_norm(&inv);
    Ok(Some(Inverse {
        matrix: inv,
        condition,
    }))
}

/// Eigenvalues of a general complex square matrix (complex Schur form).
pub fn eigenvalues(a: &CMatrix) -> Vec<Complex64> {
    Schur::new(a.clone()).unpack().1.diagonal().iter().copied().collect()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Promotes a real matrix to complex.
pub fn complexify(a: &RMatrix) -> CMatrix {
    a.map(|x| Complex64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_norm_of_identity_and_diagonal() {
        for n in [1, 3, 7] {
            let id = CMatrix::identity(n, n);
            assert!((matrix_two_norm(&id).unwrap() - 1.0).abs() < 1e-12);
        }
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(3.0, 0.0), c(1.0, 0.0)]));
        assert!((matrix_two_norm(&d).unwrap() - 3.0).abs() < 1e-12);
    }

    /// Largest eigenvalue of the Hermitian A†A by Jacobi rotations on its
    /// real 2n×2n embedding; shares no code with the SVD path.
    fn jacobi_largest_eig_of_gram(a: &CMatrix) -> f64 {
        let g = a.adjoint() * a;
        let n = g.nrows();
        let m = 2 * n;
        let mut s = vec![vec![0.0; m]; m];
        for i in 0..n {
            for j in 0..n {
                let z = g[(i, j)];
                s[i][j] = z.re;
                s[i + n][j + n] = z.re;
                s[i][j + n] = -z.im;
                s[i + n][j] = z.im;
            }
        }
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..m {
                for q in (p + 1)..m {
                    off += s[p][q] * s[p][q];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..m {
                for q in (p + 1)..m {
                    if s[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let cs = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * cs;
                    for k in 0..m {
                        let skp = s[k][p];
                        let skq = s[k][q];
                        s[k][p] = cs * skp - sn * skq;
                        s[k][q] = sn * skp + cs * skq;
                    }
                    for k in 0..m {
                        let spk = s[p][k];
                        let sqk = s[q][k];
                        s[p][k] = cs * spk - sn * sqk;
                        s[q][k] = sn * spk + cs * sqk;
                    }
                }
            }
        }
        (0..m).map(|i| s[i][i]).fold(f64::MIN, f64::max)
    }

    #[test]
    fn two_norm_matches_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let a = CMatrix::from_fn(6, 6, |_, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let oracle = jacobi_largest_eig_of_gram(&a).sqrt();
            let got = matrix_two_norm(&a).unwrap();
            assert!((got - oracle).abs() <= 1e-10 * oracle, "{got} vs {oracle}");
        }
    }

    #[test]
    fn two_norm_rejects_nan() {
        let mut a = CMatrix::identity(2, 2);
        a[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(matrix_two_norm(&a), Err(Error::NonFiniteInput)));
    }

    #[test]
    fn lu_inverse_and_condition() {
        let a = CMatrix::identity(4, 4) * c(0.0, 0.5);
        let inv = lu_inverse(&a).unwrap().unwrap();
        assert!((inv.condition - 1.0).abs() < 1e-12);
        assert!((&inv.matrix * &a - CMatrix::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn lu_detects_singular() {
        let a = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.5), c(0.5, 0.0), c(-0.5, 0.0), c(0.0, 0.5)]);
        assert!(lu_inverse(&a).unwrap().is_none());
        assert!(lu_inverse(&CMatrix::zeros(3, 3)).unwrap().is_none());
    }

    #[test]
    fn schur_eigenvalues_of_triangular() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, 1.0), c(2.0, 0.0), c(0.0, 0.0), c(-1.0, 0.5)]);
        let mut ev = eigenvalues(&a);
        ev.sort_by(|x, y| x.re.total_cmp(&y.re));
        assert!((ev[0] - c(-1.0, 0.5)).norm() < 1e-12);
        assert!((ev[1] - c(1.0, 1.0)).norm() < 1e-12);
    }
}
