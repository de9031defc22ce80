//! Dense complex linear algebra helpers on top of LAPACK.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, Inverse, LeastSquaresSvd, Solve, SVD, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMatrix = Array2<C64>;
pub type CVector = Array1<C64>;

pub fn zeros(n: usize, m: usize) -> CMatrix {
    Array2::from_elem((n, m), C64::new(0.0, 0.0))
}

pub fn identity(n: usize) -> CMatrix {
    let mut a = zeros(n, n);
    for i in 0..n {
        a[[i, i]] = C64::new(1.0, 0.0);
    }
    a
}

/// Singular values in decreasing order.
pub fn singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    let (_, s, _) = a.svd(false, false)?;
    Ok(s.to_vec())
}

/// Spectral condition number `σ_max / σ_min`.
pub fn cond2(a: &CMatrix) -> Result<f64> {
    let s = singular_values(a)?;
    let smin = *s.last().unwrap_or(&0.0);
    Ok(if smin > 0.0 { s[0] / smin } else { f64::INFINITY })
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    Ok(a.inv()?)
}

pub fn solve(a: &CMatrix, b: &CVector) -> Result<CVector> {
    Ok(a.solve(b)?)
}

/// Minimum-norm least-squares solution of `a x ≈ b`.
pub fn lstsq(a: &CMatrix, b: &CVector) -> Result<CVector> {
    Ok(a.least_squares(b)?.solution)
}

/// Orthonormal basis (columns) of the null space of `a`; singular values
/// below `rtol · σ_max` count as zero. Also returns the numerical rank.
pub fn nullspace(a: &CMatrix, rtol: f64) -> Result<(CMatrix, usize)> {
    let (_, s, vt) = a.svd(false, true)?;
    let vt = vt.ok_or_else(|| Error::Numerical("SVD returned no right vectors".into()))?;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let rank = s.iter().filter(|&&v| v > rtol * smax).count();
    let n = a.ncols();
    let basis = Array2::from_shape_fn((n, n - rank), |(i, j)| vt[[rank + j, i]].conj());
    Ok((basis, rank))
}

/// Eigenvalues (ascending) of a Hermitian matrix.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>> {
    let (w, _) = a.eigh(UPLO::Lower)?;
    Ok(w.to_vec())
}

/// `V diag(λ) V⁻¹` with the conditioning of `V`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: CVector,
    pub vectors: CMatrix,
    pub inverse: CMatrix,
    pub vector_condition: f64,
}

impl EigenDecomposition {
    pub fn new(a: &CMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch("eigendecomposition of a non-square matrix".into()));
        }
        let (values, vectors) = a.eig()?;
        let vector_condition = cond2(&vectors)?;
        let inverse = if vector_condition.is_finite() {
            vectors.inv()?
        } else {
            zeros(a.nrows(), a.ncols())
        };
        Ok(Self {
            values,
            vectors,
            inverse,
            vector_condition,
        })
    }

    /// Modal coordinates `V⁻¹ x`.
    pub fn modal(&self, x: &CVector) -> CVector {
        self.inverse.dot(x)
    }

    /// `V e^{Dt} c` for modal coordinates `c`.
    pub fn evolve_modal(&self, c: &CVector, t: f64) -> CVector {
        let scaled: CVector = c
            .iter()
            .zip(self.values.iter())
            .map(|(ci, li)| ci * (li * t).exp())
            .collect();
        self.vectors.dot(&scaled)
    }
}

pub fn vec_norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Least-squares slope and RMS residual of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigendecomposition_reconstructs() {
        let a = Array2::from_shape_fn((4, 4), |(i, j)| C64::new((i + 2 * j) as f64 * 0.1, (i as f64 - j as f64) * 0.2));
        let e = EigenDecomposition::new(&a).unwrap();
        let x: CVector = (0..4).map(|i| C64::new(1.0, i as f64)).collect();
        let c = e.modal(&x);
        let back = e.evolve_modal(&c, 0.0);
        for i in 0..4 {
            assert!((back[i] - x[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn nullspace_is_annihilated() {
        let a = Array2::from_shape_fn((2, 5), |(i, j)| C64::new(((i + 1) as f64).powi(j as i32), (i * j) as f64));
        let (n, r) = nullspace(&a, 1e-12).unwrap();
        assert_eq!((r, n.ncols()), (2, 3));
        assert!(a.dot(&n).iter().all(|v| v.norm() < 1e-12));
        // second row is (1 - i) times the first
        let b = Array2::from_shape_fn((2, 5), |(i, j)| C64::new((i * j) as f64 + 1.0, j as f64 - i as f64));
        let (n, r) = nullspace(&b, 1e-12).unwrap();
        assert_eq!((r, n.ncols()), (1, 4));
        assert!(b.dot(&n).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn fit_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (s, b, r) = linear_fit(&x, &y);
        assert!((s - 2.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14 && r < 1e-14);
    }
}
