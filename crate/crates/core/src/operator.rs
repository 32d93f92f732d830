//! Dense Hermitian operators with a cached, ascending eigendecomposition.

use nalgebra::SymmetricEigen;
use num_complex::Complex;

use crate::error::{domain, validation, Error, Result};
use crate::scalar::{frobenius, phase, CMatrix, CVector, Real};
use crate::state::StateVector;

/// Default cap on the dense dimension (14 qubits).
pub const DEFAULT_MAX_DIM: usize = 1 << 14;

/// Dense Hermitian matrix together with its spectrum.
///
/// Immutable after construction. `shift_applied` accumulates every constant
/// added through [`HermitianOperator::shift`].
#[derive(Debug, Clone)]
pub struct HermitianOperator<T: Real> {
    matrix: CMatrix<T>,
    base_eigenvalues: Vec<T>,
    eigenvalues: Vec<T>,
    eigenvectors: CMatrix<T>,
    shift_applied: T,
}

impl<T: Real> HermitianOperator<T> {
    /// Validates Hermiticity and diagonalizes.
    pub fn from_matrix(matrix: CMatrix<T>) -> Result<Self> {
        Self::from_matrix_capped(matrix, DEFAULT_MAX_DIM)
    }

    pub fn from_matrix_capped(matrix: CMatrix<T>, max_dim: usize) -> Result<Self> {
        let dim = matrix.nrows();
        if dim != matrix.ncols() {
            return Err(validation(format!(
                "operator matrix is {}x{}, expected square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if dim == 0 {
            return Err(validation("operator has zero dimension"));
        }
        if dim > max_dim {
            return Err(Error::Resource(format!(
                "dimension {dim} exceeds the dense cap {max_dim}"
            )));
        }
        let scale = frobenius(&matrix);
        let skew = frobenius(&(&matrix - matrix.adjoint()));
        if skew > T::structural_tol() * scale.max(T::one()) {
            return Err(validation(format!("matrix is not Hermitian (||M - M^H|| = {skew:e})")));
        }
        // Symmetrize away roundoff before diagonalizing.
        let half = Complex::new(T::from_f64(0.5).unwrap(), T::zero());
        let matrix = (&matrix + matrix.adjoint()) * half;

        let eig = SymmetricEigen::new(matrix.clone());
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let eigenvalues: Vec<T> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = CMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Self {
            matrix,
            base_eigenvalues: eigenvalues.clone(),
            eigenvalues,
            eigenvectors,
            shift_applied: T::zero(),
        })
    }

    /// Real symmetric input convenience.
    pub fn from_real(matrix: &nalgebra::DMatrix<T>) -> Result<Self> {
        Self::from_matrix(matrix.map(|x| Complex::new(x, T::zero())))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim),
            base_eigenvalues: vec![T::one(); dim],
            eigenvalues: vec![T::one(); dim],
            eigenvectors: CMatrix::identity(dim, dim),
            shift_applied: T::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Unitary whose columns are the eigenvectors, ordered like `eigenvalues`.
    pub fn eigenvectors(&self) -> &CMatrix<T> {
        &self.eigenvectors
    }

    pub fn shift_applied(&self) -> T {
        self.shift_applied
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> T {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Normalized ground state (lowest eigenvector).
    pub fn ground_state(&self) -> StateVector<T> {
        StateVector::new(self.eigenvectors.column(0).into_owned()).expect("eigenvector columns are unit vectors")
    }

    /// `op + e0 * I`. Eigenvectors are reused unchanged.
    ///
    /// Eigenvalues are rebuilt from the unshifted spectrum plus the total
    /// shift, so `shift(a).shift(b)` and `shift(a + b)` agree bit for bit.
    pub fn shift(&self, e0: T) -> Self {
        let dim = self.dim();
        let mut matrix = self.matrix.clone();
        for i in 0..dim {
            matrix[(i, i)] += Complex::new(e0, T::zero());
        }
        let total = self.shift_applied + e0;
        Self {
            matrix,
            base_eigenvalues: self.base_eigenvalues.clone(),
            eigenvalues: self.base_eigenvalues.iter().map(|&l| l + total).collect(),
            eigenvectors: self.eigenvectors.clone(),
            shift_applied: total,
        }
    }

    /// `lambda_max / lambda_min` of a positive spectrum.
    pub fn condition_number(&self) -> Result<T> {
        let lo = self.min_eigenvalue();
        if lo <= T::zero() {
            return Err(domain(format!(
                "condition number needs a positive spectrum (lowest eigenvalue {lo:e}); shift the operator first"
            )));
        }
        Ok(self.max_eigenvalue() / lo)
    }

    /// Amplitudes of `v` in the eigenbasis, `V^H v`.
    pub fn to_eigenbasis(&self, v: &CVector<T>) -> CVector<T> {
        self.eigenvectors.ad_mul(v)
    }

    pub fn from_eigenbasis(&self, a: &CVector<T>) -> CVector<T> {
        &self.eigenvectors * a
    }

    /// `f(H) v` for a scalar function of the eigenvalues.
    pub fn apply_function<F>(&self, v: &CVector<T>, f: F) -> CVector<T>
    where
        F: Fn(T) -> Complex<T>,
    {
        let mut a = self.to_eigenbasis(v);
        for (amp, &l) in a.iter_mut().zip(&self.eigenvalues) {
            *amp *= f(l);
        }
        self.from_eigenbasis(&a)
    }

    /// Dense `f(H) = V diag(f(lambda)) V^H`.
    pub fn function_matrix<F>(&self, f: F) -> CMatrix<T>
    where
        F: Fn(T) -> Complex<T>,
    {
        let mut scaled = self.eigenvectors.clone();
        for (mut col, &l) in scaled.column_iter_mut().zip(&self.eigenvalues) {
            col *= f(l);
        }
        scaled * self.eigenvectors.adjoint()
    }

    /// `e^{-i phi H} v` through the eigenbasis.
    pub fn evolve_vector(&self, phi: T, v: &CVector<T>) -> CVector<T> {
        self.apply_function(v, |l| phase(phi * l))
    }

    pub fn apply(&self, v: &CVector<T>) -> CVector<T> {
        &self.matrix * v
    }

    /// `<psi|H|psi>` for a normalized state.
    pub fn expectation(&self, psi: &CVector<T>) -> T {
        crate::scalar::inner(psi, &self.apply(psi)).re
    }
}
