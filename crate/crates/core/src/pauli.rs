//! Qubit Hamiltonians written as weighted sums of Pauli strings.
//!
//! Basis convention: qubit 0 is the least-significant bit of the basis index,
//! `Z|0> = |0>` and `Z|1> = -|1>`. A spin-down qubit is the `Z = -1`
//! eigenstate, i.e. bit 1.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::operator::{HermitianOperator, DEFAULT_MAX_DIM};
use crate::scalar::{lit, to_f64, CMatrix, Real};

/// Default cap on the number of qubits materialized densely.
pub const DEFAULT_MAX_QUBITS: usize = 14;

/// Single-qubit Pauli axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

/// `coefficient * P_{q0} P_{q1} ...`; an empty factor list is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm<T: Real> {
    pub coefficient: T,
    factors: Vec<(usize, PauliAxis)>,
}

impl<T: Real> PauliTerm<T> {
    /// Sorts factors by qubit; repeated qubits are rejected.
    pub fn new(coefficient: T, factors: impl IntoIterator<Item = (usize, PauliAxis)>) -> Result<Self> {
        let mut factors: Vec<_> = factors.into_iter().collect();
        factors.sort();
        if factors.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(validation("qubit index repeated within a Pauli term"));
        }
        if !coefficient.is_finite() {
            return Err(validation("Pauli coefficient is not finite"));
        }
        Ok(Self { coefficient, factors })
    }

    pub fn identity(coefficient: T) -> Self {
        Self {
            coefficient,
            factors: Vec::new(),
        }
    }

    pub fn factors(&self) -> &[(usize, PauliAxis)] {
        &self.factors
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    /// Only `Z` factors (identity included): diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        self.factors.iter().all(|&(_, a)| a == PauliAxis::Z)
    }

    /// Whether the two strings commute as operators.
    pub fn commutes_with(&self, other: &Self) -> bool {
        let mut clashes = 0usize;
        let (mut i, mut j) = (0, 0);
        while i < self.factors.len() && j < other.factors.len() {
            let (qa, aa) = self.factors[i];
            let (qb, ab) = other.factors[j];
            match qa.cmp(&qb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    if aa != ab {
                        clashes += 1;
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        clashes.is_multiple_of(2)
    }

    fn max_qubit(&self) -> Option<usize> {
        self.factors.last().map(|&(q, _)| q)
    }

    /// Adds this string's matrix elements into `m`.
    fn accumulate(&self, m: &mut CMatrix<T>) {
        let dim = m.nrows();
        let mut flip = 0usize;
        for &(q, a) in &self.factors {
            if a != PauliAxis::Z {
                flip |= 1 << q;
            }
        }
        for col in 0..dim {
            // P|col> = amp |col ^ flip>
            let mut amp = Complex::new(T::one(), T::zero());
            for &(q, a) in &self.factors {
                let bit = (col >> q) & 1;
                amp *= match (a, bit) {
                    (PauliAxis::X, _) => Complex::new(T::one(), T::zero()),
                    (PauliAxis::Y, 0) => Complex::new(T::zero(), T::one()),
                    (PauliAxis::Y, _) => Complex::new(T::zero(), -T::one()),
                    (PauliAxis::Z, 0) => Complex::new(T::one(), T::zero()),
                    (PauliAxis::Z, _) => Complex::new(-T::one(), T::zero()),
                };
            }
            m[(col ^ flip, col)] += amp * self.coefficient;
        }
    }
}

impl<T: Real> fmt::Display for PauliTerm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+.6}", self.coefficient)?;
        if self.factors.is_empty() {
            return write!(f, " I");
        }
        for (q, a) in &self.factors {
            write!(f, " {a:?}{q}")?;
        }
        Ok(())
    }
}

/// Weighted Pauli-string operator on `n_qubits`.
///
/// Terms are merged by factor set and kept in canonical order (by qubit, then
/// axis), so two sums describing the same operator compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum<T: Real> {
    n_qubits: usize,
    terms: Vec<PauliTerm<T>>,
    energy_unit: String,
}

impl<T: Real> PauliSum<T> {
    pub fn new(n_qubits: usize, terms: Vec<PauliTerm<T>>, energy_unit: impl Into<String>) -> Result<Self> {
        let mut merged: BTreeMap<Vec<(usize, PauliAxis)>, T> = BTreeMap::new();
        for term in terms {
            if let Some(q) = term.max_qubit() {
                if q >= n_qubits {
                    return Err(validation(format!(
                        "qubit index {q} out of range for {n_qubits} qubits"
                    )));
                }
            }
            *merged.entry(term.factors).or_insert_with(T::zero) += term.coefficient;
        }
        let terms = merged
            .into_iter()
            .map(|(factors, coefficient)| PauliTerm { coefficient, factors })
            .collect();
        Ok(Self {
            n_qubits,
            terms,
            energy_unit: energy_unit.into(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm<T>] {
        &self.terms
    }

    pub fn energy_unit(&self) -> &str {
        &self.energy_unit
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Subset of terms as a new sum on the same register.
    pub fn subset(&self, terms: Vec<PauliTerm<T>>) -> Self {
        Self::new(self.n_qubits, terms, self.energy_unit.clone()).expect("terms taken from a validated sum")
    }

    /// Dense matrix without diagonalization.
    pub fn dense_matrix(&self) -> Result<CMatrix<T>> {
        self.check_cap(DEFAULT_MAX_QUBITS)?;
        let dim = self.dim();
        let mut m = CMatrix::zeros(dim, dim);
        for term in &self.terms {
            term.accumulate(&mut m);
        }
        Ok(m)
    }

    fn check_cap(&self, max_qubits: usize) -> Result<()> {
        if self.n_qubits > max_qubits {
            return Err(Error::Resource(format!(
                "{} qubits exceed the dense cap of {max_qubits}",
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// Materializes and diagonalizes; `shift_applied` starts at zero.
    pub fn to_dense(&self) -> Result<HermitianOperator<T>> {
        self.to_dense_capped(DEFAULT_MAX_QUBITS)
    }

    pub fn to_dense_capped(&self, max_qubits: usize) -> Result<HermitianOperator<T>> {
        self.check_cap(max_qubits)?;
        let dim = self.dim();
        let mut m = CMatrix::zeros(dim, dim);
        for term in &self.terms {
            term.accumulate(&mut m);
        }
        HermitianOperator::from_matrix_capped(m, DEFAULT_MAX_DIM.max(dim))
    }

    /// Parses the Pauli-sum JSON exchange format.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawPauliSum = serde_json::from_str(text)?;
        let mut terms = Vec::with_capacity(raw.terms.len());
        for (i, t) in raw.terms.into_iter().enumerate() {
            let coeff = match t.coeff {
                serde_json::Value::Number(n) => n
                    .as_f64()
                    .ok_or_else(|| validation(format!("term {i}: coefficient not representable")))?,
                other => {
                    return Err(validation(format!(
                        "term {i}: coefficient must be a real number, got {other}"
                    )))
                }
            };
            let factors = t.paulis.into_iter().map(|p| (p.q, p.axis));
            terms.push(PauliTerm::new(lit::<T>(coeff), factors).map_err(|e| validation(format!("term {i}: {e}")))?);
        }
        Self::new(raw.n_qubits, terms, raw.energy_unit)
    }

    /// Serializes to the JSON exchange format.
    pub fn to_json_string(&self) -> String {
        let raw = RawPauliSum {
            n_qubits: self.n_qubits,
            energy_unit: self.energy_unit.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| RawTerm {
                    coeff: serde_json::Value::from(to_f64(t.coefficient)),
                    paulis: t.factors.iter().map(|&(q, axis)| RawFactor { q, axis }).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("pauli sum serializes")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPauliSum {
    n_qubits: usize,
    #[serde(default = "default_unit")]
    energy_unit: String,
    terms: Vec<RawTerm>,
}

#[derive(Serialize, Deserialize)]
struct RawTerm {
    coeff: serde_json::Value,
    #[serde(default)]
    paulis: Vec<RawFactor>,
}

#[derive(Serialize, Deserialize)]
struct RawFactor {
    q: usize,
    axis: PauliAxis,
}

fn default_unit() -> String {
    "Hartree".to_string()
}

/// Reads a Pauli-sum JSON file.
pub fn load_pauli_sum<T: Real>(path: impl AsRef<Path>) -> Result<PauliSum<T>> {
    let text = std::fs::read_to_string(path)?;
    PauliSum::from_json_str(&text)
}

/// H2 interaction constants `xi_0 .. xi_7` in units of J (Hartree).
pub const H2_XI: [f64; 8] = [
    -0.098864, 0.171198, 0.222786, 0.168622, 0.120545, 0.165867, 0.174348, 0.045322,
];

/// Spectral shift that makes the H2 spectrum positive.
pub const H2_SHIFT: f64 = 2.0;

/// Hartree-Fock occupation (down, down, up, up) as bits per qubit.
pub const H2_HF_BITS: [u8; 4] = [1, 1, 0, 0];

/// Quoted average interaction constant, used only for reporting `gamma / xi_bar`.
pub const H2_XI_BAR: f64 = 0.1224;

/// Four-qubit H2 Hamiltonian (STO-3G, Jordan-Wigner), unshifted.
pub fn build_h2<T: Real>() -> PauliSum<T> {
    use PauliAxis::{X, Y, Z};
    let xi = |i: usize| lit::<T>(H2_XI[i]);
    let t = |c: T, f: &[(usize, PauliAxis)]| PauliTerm::new(c, f.iter().copied()).unwrap();
    let terms = vec![
        PauliTerm::identity(xi(0)),
        t(xi(1), &[(0, Z)]),
        t(xi(1), &[(1, Z)]),
        t(-xi(2), &[(2, Z)]),
        t(-xi(2), &[(3, Z)]),
        t(xi(3), &[(0, Z), (1, Z)]),
        t(xi(4), &[(0, Z), (2, Z)]),
        t(xi(4), &[(1, Z), (3, Z)]),
        t(xi(5), &[(0, Z), (3, Z)]),
        t(xi(5), &[(1, Z), (2, Z)]),
        t(xi(6), &[(2, Z), (3, Z)]),
        t(-xi(7), &[(0, X), (1, X), (2, Y), (3, Y)]),
        t(xi(7), &[(0, X), (1, Y), (2, Y), (3, X)]),
        t(xi(7), &[(0, Y), (1, X), (2, X), (3, Y)]),
        t(-xi(7), &[(0, Y), (1, Y), (2, X), (3, X)]),
    ];
    PauliSum::new(4, terms, "Hartree").expect("H2 terms are valid")
}
