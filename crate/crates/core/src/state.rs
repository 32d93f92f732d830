use std::ops::Deref;

use num_complex::Complex;
use rand::{Rng, RngExt};

use crate::error::{domain, Result};
use crate::scalar::{lit, norm, CVector, Real};

/// Normalized complex amplitude vector over a computational or Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    amplitudes: CVector<T>,
}

impl<T: Real> StateVector<T> {
    /// Normalizes `amplitudes`; fails on a zero vector.
    pub fn new(amplitudes: CVector<T>) -> Result<Self> {
        let n = norm(&amplitudes);
        if !(n > T::zero()) || !n.is_finite() {
            return Err(domain("cannot normalize a zero or non-finite vector"));
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(n),
        })
    }

    /// Computational basis state `|index>`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(domain(format!("basis index {index} outside dimension {dim}")));
        }
        let mut v = CVector::zeros(dim);
        v[index] = Complex::new(T::one(), T::zero());
        Ok(Self { amplitudes: v })
    }

    /// Product state of qubits given as `(bit of qubit 0, bit of qubit 1, ...)`.
    ///
    /// Qubit 0 is the least-significant bit of the basis index.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut index = 0usize;
        for (q, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => index |= 1 << q,
                other => return Err(domain(format!("qubit {q}: bit value {other} is not 0 or 1"))),
            }
        }
        Self::basis(1 << bits.len(), index)
    }

    /// Haar-like random state from normally distributed amplitudes.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let v = CVector::from_fn(dim, |_, _| Complex::new(lit(gaussian(rng)), lit(gaussian(rng))));
        Self::new(v).expect("random gaussian vector is nonzero")
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector<T> {
        &self.amplitudes
    }

    pub fn into_inner(self) -> CVector<T> {
        self.amplitudes
    }

    /// Multiplies by a global phase `e^{i theta}`.
    pub fn with_global_phase(&self, theta: T) -> Self {
        let p = Complex::new(theta.cos(), theta.sin());
        Self {
            amplitudes: self.amplitudes.map(|a| a * p),
        }
    }
}

impl<T: Real> Deref for StateVector<T> {
    type Target = CVector<T>;

    fn deref(&self) -> &CVector<T> {
        &self.amplitudes
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
