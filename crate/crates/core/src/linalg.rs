//! Small dense helpers over slices and nalgebra matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{GtvError, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Relative asymmetry tolerance used when validating "symmetric" inputs.
const SYMMETRY_TOL: f64 = 1e-10;

pub fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(GtvError::InvalidArgument(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(GtvError::InvalidArgument(format!(
                    "{what} is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Eigendecomposition `M = V diag(λ) Vᵀ` of a symmetric matrix, used to apply
/// spectral functions such as `(I + cM)⁻¹` without refactorizing per scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn new(m: &DMatrix<f64>) -> Self {
        // Symmetrize first so round-off asymmetry never leaks into the basis.
        let sym = (m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        Self {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `V diag(f(λ)) Vᵀ x`.
    pub fn apply<F: Fn(f64) -> f64>(&self, x: &[f64], f: F) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        let mut coeff = self.vectors.tr_mul(&x);
        for (c, &lam) in coeff.iter_mut().zip(self.values.iter()) {
            *c *= f(lam);
        }
        (&self.vectors * coeff).as_slice().to_vec()
    }

    /// `V diag(f(λ)) Vᵀ` as a matrix.
    pub fn matrix<F: Fn(f64) -> f64>(&self, f: F) -> DMatrix<f64> {
        let scaled = DVector::from_iterator(self.dim(), self.values.iter().map(|&l| f(l)));
        let mut vs = self.vectors.clone();
        for (j, s) in scaled.iter().enumerate() {
            vs.column_mut(j).scale_mut(*s);
        }
        vs * self.vectors.transpose()
    }
}

/// Principal square root of a symmetric positive-semidefinite matrix;
/// eigenvalues below `clamp_tol` in magnitude (or negative) are clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>, clamp_tol: f64) -> DMatrix<f64> {
    let eig = SymEigen::new(m);
    eig.matrix(|l| if l <= clamp_tol { 0.0 } else { l.sqrt() })
}

pub fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(x)).as_slice().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_inverse_matches_direct() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let eig = SymEigen::new(&m);
        let x = [1.0, -2.0, 0.5];
        let inv = eig.apply(&x, |l| 1.0 / (1.0 + 0.7 * l));
        let direct = (DMatrix::identity(3, 3) + &m * 0.7)
            .lu()
            .solve(&DVector::from_column_slice(&x))
            .unwrap();
        for (a, b) in inv.iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let r = psd_sqrt(&m, 1e-12);
        assert!((&r * &r - &m).amax() < 1e-12);
    }

    #[test]
    fn symmetry_check() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(check_symmetric(&m, "m").is_err());
        assert!(check_symmetric(&DMatrix::identity(2, 2), "m").is_ok());
    }
}
