//! Exact and second-order Trotterized evolution `e^{-i phi H}`.
//!
//! Phases are dimensionless: energy in units of J times time in units of 1/J.

use crate::error::{domain, validation, Result};
use crate::operator::HermitianOperator;
use crate::pauli::{PauliSum, PauliTerm};
use crate::scalar::{frobenius, from_usize, lit, CVector, Real};
use crate::state::StateVector;

/// `V e^{-i phi Lambda} V^H psi`.
pub fn exact_evolve<T: Real>(op: &HermitianOperator<T>, phi: T, psi: &StateVector<T>) -> Result<StateVector<T>> {
    check_dim(op.dim(), psi.dim())?;
    StateVector::new(op.evolve_vector(phi, psi))
}

fn check_dim(op_dim: usize, state_dim: usize) -> Result<()> {
    if op_dim != state_dim {
        return Err(domain(format!(
            "operator dimension {op_dim} does not match state dimension {state_dim}"
        )));
    }
    Ok(())
}

/// Greedy partition into groups of mutually commuting terms.
///
/// Diagonal terms (identity and Z strings) go first; they always commute with
/// each other and therefore land in a single leading group. Remaining terms
/// follow the canonical order.
pub fn partition_commuting<T: Real>(h: &PauliSum<T>) -> Vec<PauliSum<T>> {
    let (diag, rest): (Vec<_>, Vec<_>) = h.terms().iter().cloned().partition(|t| t.is_diagonal());
    let mut groups: Vec<Vec<PauliTerm<T>>> = Vec::new();
    for term in diag.into_iter().chain(rest) {
        match groups.iter_mut().find(|g| g.iter().all(|m| m.commutes_with(&term))) {
            Some(g) => g.push(term),
            None => groups.push(vec![term]),
        }
    }
    groups.into_iter().map(|g| h.subset(g)).collect()
}

/// Symmetric second-order product formula over exactly diagonalized groups.
#[derive(Debug, Clone)]
pub struct TrotterBackend<T: Real> {
    n_steps: usize,
    groups: Vec<HermitianOperator<T>>,
}

impl<T: Real> TrotterBackend<T> {
    /// Checks that the groups sum to `full` before accepting them.
    pub fn new(full: &HermitianOperator<T>, groups: Vec<HermitianOperator<T>>, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(validation("Trotter backend needs at least one step"));
        }
        if groups.is_empty() {
            return Err(validation("Trotter backend needs at least one group"));
        }
        let mut sum = groups[0].matrix().clone();
        for g in &groups[1..] {
            if g.dim() != full.dim() {
                return Err(validation("Trotter group dimension mismatch"));
            }
            sum += g.matrix();
        }
        let gap = frobenius(&(sum - full.matrix()));
        if gap > T::structural_tol() * frobenius(full.matrix()).max(T::one()) {
            return Err(validation(format!(
                "Trotter groups do not sum to the Hamiltonian (residual {gap:e})"
            )));
        }
        Ok(Self { n_steps, groups })
    }

    /// Groups from a commuting partition; a shift carried by `full` is added to the first group.
    pub fn from_pauli(h: &PauliSum<T>, full: &HermitianOperator<T>, n_steps: usize) -> Result<Self> {
        let mut groups = partition_commuting(h)
            .iter()
            .map(|g| g.to_dense())
            .collect::<Result<Vec<_>>>()?;
        let shift = full.shift_applied();
        if shift != T::zero() {
            groups[0] = groups[0].shift(shift);
        }
        Self::new(full, groups, n_steps)
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn groups(&self) -> &[HermitianOperator<T>] {
        &self.groups
    }

    /// `[prod_{m=1..M} e^{-i tau H_m} prod_{m=M..1} e^{-i tau H_m}]^n v` with `tau = phi/(2n)`.
    pub fn evolve_vector(&self, phi: T, v: &CVector<T>) -> CVector<T> {
        let tau = phi / (lit::<T>(2.0) * from_usize::<T>(self.n_steps));
        let mut out = v.clone();
        for _ in 0..self.n_steps {
            // Rightmost factor acts first.
            for g in self.groups.iter() {
                out = g.evolve_vector(tau, &out);
            }
            for g in self.groups.iter().rev() {
                out = g.evolve_vector(tau, &out);
            }
        }
        out
    }
}

/// Apply a Trotterized evolution to a normalized state.
pub fn trotter_evolve<T: Real>(backend: &TrotterBackend<T>, phi: T, psi: &StateVector<T>) -> Result<StateVector<T>> {
    check_dim(backend.groups[0].dim(), psi.dim())?;
    StateVector::new(backend.evolve_vector(phi, psi))
}

/// Evolution engine used by the series, the estimators and the protocols.
#[derive(Debug, Clone)]
pub enum EvolutionBackend<T: Real> {
    Exact(HermitianOperator<T>),
    Trotter {
        full: HermitianOperator<T>,
        trotter: TrotterBackend<T>,
    },
}

impl<T: Real> EvolutionBackend<T> {
    pub fn exact(op: HermitianOperator<T>) -> Self {
        Self::Exact(op)
    }

    pub fn trotter(full: HermitianOperator<T>, trotter: TrotterBackend<T>) -> Self {
        Self::Trotter { full, trotter }
    }

    /// The Hamiltonian being evolved.
    pub fn operator(&self) -> &HermitianOperator<T> {
        match self {
            Self::Exact(op) => op,
            Self::Trotter { full, .. } => full,
        }
    }

    pub fn dim(&self) -> usize {
        self.operator().dim()
    }

    /// `U(phi) v` for an arbitrary (possibly unnormalized) vector.
    pub fn evolve_vector(&self, phi: T, v: &CVector<T>) -> CVector<T> {
        match self {
            Self::Exact(op) => op.evolve_vector(phi, v),
            Self::Trotter { trotter, .. } => trotter.evolve_vector(phi, v),
        }
    }

    pub fn evolve(&self, phi: T, psi: &StateVector<T>) -> Result<StateVector<T>> {
        check_dim(self.dim(), psi.dim())?;
        StateVector::new(self.evolve_vector(phi, psi))
    }
}
