//! One-dimensional Bose-Hubbard chain on a truncated Fock basis.

use std::collections::HashMap;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::operator::HermitianOperator;
use crate::scalar::{from_usize, lit, CMatrix, Real};
use crate::state::StateVector;

/// Default cap on the Fock-space dimension.
pub const DEFAULT_MAX_FOCK_DIM: usize = 1 << 14;

/// Lexicographically ordered occupation-number basis.
#[derive(Debug, Clone)]
pub struct FockBasis {
    n_sites: usize,
    n_max: usize,
    total_n: Option<usize>,
    states: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

impl FockBasis {
    pub fn new(n_sites: usize, n_max: usize, total_n: Option<usize>) -> Result<Self> {
        Self::with_cap(n_sites, n_max, total_n, DEFAULT_MAX_FOCK_DIM)
    }

    pub fn with_cap(n_sites: usize, n_max: usize, total_n: Option<usize>, max_dim: usize) -> Result<Self> {
        if n_sites == 0 || n_max == 0 {
            return Err(domain("Fock basis needs n_sites >= 1 and n_max >= 1"));
        }
        let mut states = Vec::new();
        let mut current = vec![0usize; n_sites];
        enumerate(0, 0, n_max, total_n, &mut current, &mut states, max_dim)?;
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(Self {
            n_sites,
            n_max,
            total_n,
            states,
            index,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn total_n(&self) -> Option<usize> {
        self.total_n
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Vec<usize>] {
        &self.states
    }

    pub fn index_of(&self, occupation: &[usize]) -> Option<usize> {
        self.index.get(occupation).copied()
    }
}

fn enumerate(
    site: usize,
    used: usize,
    n_max: usize,
    total_n: Option<usize>,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
    max_dim: usize,
) -> Result<()> {
    let n_sites = current.len();
    if site == n_sites {
        if total_n.is_none_or(|n| n == used) {
            if out.len() == max_dim {
                return Err(Error::Resource(format!(
                    "Fock basis exceeds the dimension cap {max_dim}"
                )));
            }
            out.push(current.clone());
        }
        return Ok(());
    }
    let budget = total_n.map_or(n_max, |n| n_max.min(n.saturating_sub(used)));
    for occ in 0..=budget {
        current[site] = occ;
        enumerate(site + 1, used + occ, n_max, total_n, current, out, max_dim)?;
    }
    current[site] = 0;
    Ok(())
}

/// Boundary condition of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

/// Tunneling `j`, on-site interaction `u`, chemical potential `mu`, spectral shift `e0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoseHubbardParams<T: Real> {
    pub j: T,
    pub u: T,
    pub mu: T,
    pub e0: T,
}

impl<T: Real> BoseHubbardParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.u > T::zero()) {
            return Err(domain("Bose-Hubbard interaction U must be positive"));
        }
        if self.j < T::zero() {
            return Err(domain("Bose-Hubbard tunneling J must be non-negative"));
        }
        Ok(())
    }
}

fn bonds(n_sites: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    let mut b: Vec<_> = (0..n_sites.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    if boundary == Boundary::Periodic && n_sites > 2 {
        b.push((n_sites - 1, 0));
    }
    b
}

/// `a_to^dagger a_from` applied to an occupation; `None` when it vanishes or leaves the basis.
fn hop(basis: &FockBasis, occ: &[usize], from: usize, to: usize) -> Option<(usize, f64)> {
    if occ[from] == 0 {
        return None;
    }
    let mut next = occ.to_vec();
    let mut amp = (next[from] as f64).sqrt();
    next[from] -= 1;
    amp *= ((next[to] + 1) as f64).sqrt();
    next[to] += 1;
    if next[to] > basis.n_max {
        return None;
    }
    basis.index_of(&next).map(|i| (i, amp))
}

/// Dense Bose-Hubbard Hamiltonian.
///
/// `-J sum_<ij> (a_i^+ a_j + h.c.) + U/2 sum_i n_i (n_i - 1) - mu sum_i n_i + e0`.
/// Hops that would exceed `n_max` are dropped.
pub fn build_bose_hubbard<T: Real>(
    basis: &FockBasis,
    p: &BoseHubbardParams<T>,
    boundary: Boundary,
) -> Result<HermitianOperator<T>> {
    p.validate()?;
    let dim = basis.dim();
    if dim == 0 {
        return Err(domain("empty Fock basis"));
    }
    let mut m = CMatrix::<T>::zeros(dim, dim);
    let half = lit::<T>(0.5);
    for (col, occ) in basis.states.iter().enumerate() {
        let mut diag = p.e0;
        for &n in occ {
            let n_t: T = from_usize(n);
            diag += half * p.u * n_t * (n_t - T::one()) - p.mu * n_t;
        }
        m[(col, col)] += Complex::new(diag, T::zero());
        for (a, b) in bonds(basis.n_sites, boundary) {
            for (from, to) in [(a, b), (b, a)] {
                if let Some((row, amp)) = hop(basis, occ, from, to) {
                    m[(row, col)] -= Complex::new(p.j * lit::<T>(amp), T::zero());
                }
            }
        }
    }
    HermitianOperator::from_matrix_capped(m, dim)
}

/// Default margin `delta / U` used by callers of [`positive_shift`].
pub const DEFAULT_SHIFT_MARGIN: f64 = 0.5;

/// Shift `-lambda_min + delta` that makes the Bose-Hubbard spectrum positive.
pub fn positive_shift<T: Real>(basis: &FockBasis, p: &BoseHubbardParams<T>, boundary: Boundary, delta: T) -> Result<T> {
    let unshifted = BoseHubbardParams { e0: T::zero(), ..*p };
    let op = build_bose_hubbard(basis, &unshifted, boundary)?;
    Ok(-op.min_eigenvalue() + delta)
}

/// One boson per site.
pub fn mott_state<T: Real>(basis: &FockBasis) -> Result<StateVector<T>> {
    let ones = vec![1usize; basis.n_sites];
    let i = basis
        .index_of(&ones)
        .ok_or_else(|| domain("Fock basis does not contain the unit-filling occupation"))?;
    StateVector::basis(basis.dim(), i)
}

/// Total particle number operator (diagonal).
pub fn number_operator<T: Real>(basis: &FockBasis) -> CMatrix<T> {
    let dim = basis.dim();
    let mut m = CMatrix::zeros(dim, dim);
    for (i, occ) in basis.states.iter().enumerate() {
        m[(i, i)] = Complex::new(from_usize(occ.iter().sum()), T::zero());
    }
    m
}

/// Dense `a_{c+r}^dagger a_c`; `r = 0` gives the site density `n_c`.
pub fn correlation_operator<T: Real>(basis: &FockBasis, c: usize, r: i64) -> Result<CMatrix<T>> {
    let target = c as i64 + r;
    if c >= basis.n_sites || target < 0 || target >= basis.n_sites as i64 {
        return Err(domain(format!(
            "sites {c} and {target} must lie within the chain of {} sites",
            basis.n_sites
        )));
    }
    let to = target as usize;
    let dim = basis.dim();
    let mut m = CMatrix::zeros(dim, dim);
    for (col, occ) in basis.states.iter().enumerate() {
        if to == c {
            m[(col, col)] = Complex::new(from_usize(occ[c]), T::zero());
        } else if let Some((row, amp)) = hop(basis, occ, c, to) {
            m[(row, col)] += Complex::new(lit(amp), T::zero());
        }
    }
    Ok(m)
}
