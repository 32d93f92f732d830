//! Ideal inverse iteration, overlap-based energy and observable estimates,
//! and the iteration-count predictor.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::operator::HermitianOperator;
use crate::propagator::EvolutionBackend;
use crate::scalar::{inner, lit, to_f64, CMatrix, CVector, Real};
use crate::series::{LedgerRow, PhaseLedger};
use crate::state::StateVector;

/// Default floor on `|denominator|` of the estimator.
pub const DEFAULT_DENOMINATOR_FLOOR: f64 = 1e-10;

/// Ground-state overlaps below this value trigger a convergence warning.
pub const OVERLAP_WARNING: f64 = 1e-8;

/// Which overlap an [`OverlapProvider`] is asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OverlapKind {
    /// `<psi0| U(δφ) |psi0>`.
    Norm,
    /// `<psi0| U(δφ) H |psi0>`.
    Energy,
}

/// Source of the overlaps entering the estimator sums.
pub trait OverlapProvider<T: Real>: Sync {
    fn dim(&self) -> usize;

    fn overlap(&self, delta_phi: T, kind: OverlapKind) -> Result<Complex<T>>;

    /// Unnormalized `<psi_k|A|psi_k>` for a Hermitian `A`.
    ///
    /// Unless `A` commutes with `H` this needs overlaps between states evolved
    /// by two different phases, so it is not available from phase-difference
    /// overlaps alone.
    fn observable_numerator(&self, _a_sym: &CMatrix<T>, _ledger: &PhaseLedger<T>) -> Result<Complex<T>> {
        Err(Error::Unsupported(
            "this overlap provider cannot evaluate general observables".into(),
        ))
    }
}

/// Exact inner products on the simulated state vector.
#[derive(Debug, Clone)]
pub struct ExactOverlaps<T: Real> {
    backend: EvolutionBackend<T>,
    psi0: StateVector<T>,
    h_psi0: CVector<T>,
}

impl<T: Real> ExactOverlaps<T> {
    pub fn new(backend: EvolutionBackend<T>, psi0: StateVector<T>) -> Result<Self> {
        if backend.dim() != psi0.dim() {
            return Err(domain(format!(
                "backend dimension {} does not match state dimension {}",
                backend.dim(),
                psi0.dim()
            )));
        }
        let h_psi0 = backend.operator().apply(&psi0);
        Ok(Self { backend, psi0, h_psi0 })
    }

    pub fn backend(&self) -> &EvolutionBackend<T> {
        &self.backend
    }

    /// `sum_n C_n U(phi_n) psi0` over the merged series terms of the ledger.
    pub fn propagated(&self, ledger: &PhaseLedger<T>) -> CVector<T> {
        let mut v = CVector::zeros(self.psi0.dim());
        for &(key, c) in &ledger.terms {
            if c.re == T::zero() && c.im == T::zero() {
                continue;
            }
            let evolved = self.backend.evolve_vector(ledger.term_phase(key), &self.psi0);
            v.axpy(c, &evolved, Complex::new(T::one(), T::zero()));
        }
        v
    }
}

impl<T: Real> OverlapProvider<T> for ExactOverlaps<T> {
    fn dim(&self) -> usize {
        self.psi0.dim()
    }

    fn overlap(&self, delta_phi: T, kind: OverlapKind) -> Result<Complex<T>> {
        let ket = match kind {
            OverlapKind::Norm => self.psi0.amplitudes(),
            OverlapKind::Energy => &self.h_psi0,
        };
        Ok(inner(&self.psi0, &self.backend.evolve_vector(delta_phi, ket)))
    }

    fn observable_numerator(&self, a_sym: &CMatrix<T>, ledger: &PhaseLedger<T>) -> Result<Complex<T>> {
        if a_sym.nrows() != self.dim() || a_sym.ncols() != self.dim() {
            return Err(domain("observable dimension does not match the state"));
        }
        let v = self.propagated(ledger);
        Ok(inner(&v, &(a_sym * &v)))
    }
}

/// Overlaps given as a table of `(|δφ|, <psi0|U|psi0>, <psi0|U H|psi0>)`.
///
/// Lookups match `δφ` up to a relative tolerance of `1e-9`.
#[derive(Debug, Clone)]
pub struct TabulatedOverlaps<T: Real> {
    dim: usize,
    rows: Vec<(T, Complex<T>, Complex<T>)>,
}

impl<T: Real> TabulatedOverlaps<T> {
    pub fn new(dim: usize, mut rows: Vec<(T, Complex<T>, Complex<T>)>) -> Self {
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        Self { dim, rows }
    }

    pub fn rows(&self) -> &[(T, Complex<T>, Complex<T>)] {
        &self.rows
    }

    fn lookup(&self, delta_phi: T) -> Option<&(T, Complex<T>, Complex<T>)> {
        let target = delta_phi.abs();
        let tol = lit::<T>(1e-9) * target.max(T::one());
        let i = self.rows.partition_point(|r| r.0 < target - tol);
        self.rows.get(i).filter(|r| (r.0 - target).abs() <= tol)
    }
}

impl<T: Real> OverlapProvider<T> for TabulatedOverlaps<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn overlap(&self, delta_phi: T, kind: OverlapKind) -> Result<Complex<T>> {
        let row = self
            .lookup(delta_phi)
            .ok_or_else(|| domain(format!("no tabulated overlap at phase difference {delta_phi}")))?;
        let value = match kind {
            OverlapKind::Norm => row.1,
            OverlapKind::Energy => row.2,
        };
        // The table stores +|δφ|; negative phases are the complex conjugate.
        Ok(if delta_phi < T::zero() { value.conj() } else { value })
    }
}

/// One estimator result.
#[derive(Debug, Clone, Serialize)]
pub struct IterationReport {
    pub k: u32,
    pub lambda_est: f64,
    pub lambda_ideal: Option<f64>,
    /// `lambda_est - lambda_gs`.
    pub delta_lambda: f64,
    /// Denominator of the estimator, `<psi_k|psi_k>`.
    pub norm_value: f64,
    pub imag_residue: f64,
    #[serde(skip)]
    pub numerator: f64,
    #[serde(skip)]
    pub warning: Option<String>,
}

impl IterationReport {
    pub const CSV_HEADER: [&'static str; 6] = [
        "k",
        "lambda_est",
        "lambda_ideal",
        "delta_lambda",
        "norm_value",
        "imag_residue",
    ];

    pub fn csv_record(&self) -> [String; 6] {
        [
            self.k.to_string(),
            format!("{:.12e}", self.lambda_est),
            self.lambda_ideal.map_or_else(String::new, |v| format!("{v:.12e}")),
            format!("{:.12e}", self.delta_lambda),
            format!("{:.12e}", self.norm_value),
            format!("{:.6e}", self.imag_residue),
        ]
    }
}

/// Tunables of the overlap-based estimators.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorOptions {
    pub denominator_floor: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            denominator_floor: DEFAULT_DENOMINATOR_FLOOR,
        }
    }
}

/// Result of the ideal iteration `psi_k = H^{-k} psi0 / ||...||`.
#[derive(Debug, Clone)]
pub struct IdealIteration<T: Real> {
    pub state: StateVector<T>,
    pub energy: T,
    /// `|<psi_gs|psi0>|`.
    pub ground_overlap: T,
    pub warning: Option<String>,
}

/// Exact inverse iteration through the eigenbasis.
pub fn ideal_iterate<T: Real>(op: &HermitianOperator<T>, psi0: &StateVector<T>, k: u32) -> Result<IdealIteration<T>> {
    if op.dim() != psi0.dim() {
        return Err(domain("operator and state dimensions differ"));
    }
    if op.min_eigenvalue() <= T::zero() {
        return Err(domain(format!(
            "inverse iteration needs a positive spectrum (lowest eigenvalue {:e})",
            op.min_eigenvalue()
        )));
    }
    let ground_overlap = inner(&op.ground_state(), psi0).norm_sqr().sqrt();
    let warning = (to_f64(ground_overlap) < OVERLAP_WARNING).then(|| {
        format!("initial state has overlap {ground_overlap:e} with the ground state; iteration will not converge to it")
    });
    let raw = op.apply_function(psi0, |l| Complex::new(l.powi(-(k as i32)), T::zero()));
    let state = StateVector::new(raw)?;
    let energy = op.expectation(&state);
    Ok(IdealIteration {
        state,
        energy,
        ground_overlap,
        warning,
    })
}

struct Sums {
    real: f64,
    imag: f64,
}

fn ledger_sum<T: Real, P: OverlapProvider<T> + ?Sized>(
    ledger: &PhaseLedger<T>,
    provider: &P,
    kind: OverlapKind,
) -> Result<Sums> {
    let rows: Vec<&LedgerRow<T>> = ledger.all_rows().collect();
    let terms = rows
        .par_iter()
        .map(|r| {
            if r.p == T::zero() && r.abs_weight == T::zero() {
                return Ok((0.0, 0.0));
            }
            let o = provider.overlap(r.delta_phi, kind)?;
            let p = to_f64(r.p);
            let p_asym = to_f64(r.p_forward) - (p - to_f64(r.p_forward));
            Ok((p * to_f64(o.re), p_asym * to_f64(o.im)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sums = Sums { real: 0.0, imag: 0.0 };
    for (re, im) in terms {
        sums.real += re;
        sums.imag += im;
    }
    Ok(sums)
}

fn check_floor(denominator: f64, options: &EstimatorOptions) -> Result<()> {
    if !(denominator.abs() >= options.denominator_floor) {
        return Err(Error::IllConditioned {
            denominator,
            floor: options.denominator_floor,
        });
    }
    Ok(())
}

/// `lambda_k = sum_q p_q Re<psi0|U(δφ_q) H|psi0> / sum_q p_q Re<psi0|U(δφ_q)|psi0>`.
pub fn estimate_energy<T: Real, P: OverlapProvider<T> + ?Sized>(
    op: &HermitianOperator<T>,
    ledger: &PhaseLedger<T>,
    provider: &P,
) -> Result<IterationReport> {
    estimate_energy_with(op, ledger, provider, &EstimatorOptions::default())
}

pub fn estimate_energy_with<T: Real, P: OverlapProvider<T> + ?Sized>(
    op: &HermitianOperator<T>,
    ledger: &PhaseLedger<T>,
    provider: &P,
    options: &EstimatorOptions,
) -> Result<IterationReport> {
    if op.dim() != provider.dim() {
        return Err(domain("operator and overlap provider dimensions differ"));
    }
    let den = ledger_sum(ledger, provider, OverlapKind::Norm)?;
    let num = ledger_sum(ledger, provider, OverlapKind::Energy)?;
    check_floor(den.real, options)?;
    let lambda_est = num.real / den.real;
    Ok(IterationReport {
        k: ledger.k,
        lambda_est,
        lambda_ideal: None,
        delta_lambda: lambda_est - to_f64(op.min_eigenvalue()),
        norm_value: den.real,
        imag_residue: num.imag.abs().max(den.imag.abs()),
        numerator: num.real,
        warning: None,
    })
}

/// `(A + A^H) / 2`.
pub fn symmetrize<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    (a + a.adjoint()) * Complex::new(lit::<T>(0.5), T::zero())
}

/// Real part of `<psi_k|A|psi_k> / <psi_k|psi_k>` with `A` symmetrized.
pub fn estimate_observable<T: Real, P: OverlapProvider<T> + ?Sized>(
    a_op: &CMatrix<T>,
    ledger: &PhaseLedger<T>,
    provider: &P,
) -> Result<f64> {
    estimate_observable_with(a_op, ledger, provider, &EstimatorOptions::default())
}

pub fn estimate_observable_with<T: Real, P: OverlapProvider<T> + ?Sized>(
    a_op: &CMatrix<T>,
    ledger: &PhaseLedger<T>,
    provider: &P,
    options: &EstimatorOptions,
) -> Result<f64> {
    if a_op.nrows() != provider.dim() || a_op.ncols() != provider.dim() {
        return Err(domain("observable dimension does not match the overlap provider"));
    }
    let den = ledger_sum(ledger, provider, OverlapKind::Norm)?;
    check_floor(den.real, options)?;
    let num = provider.observable_numerator(&symmetrize(a_op), ledger)?;
    Ok(to_f64(num.re) / den.real)
}

/// Spectral data of `H^{-1}` entering the iteration-count estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralGapInfo {
    /// Dominant eigenvalue of `H^{-1}`, `1/E_0`.
    pub lambda1: f64,
    /// Sub-dominant eigenvalue, `1/E_1`.
    pub lambda2: f64,
    /// Smallest eigenvalue, `1/E_max`.
    pub lambda_n: f64,
    /// `sin^2 theta0 = |<psi0|psi_gs>|^2`.
    pub theta0: f64,
}

impl SpectralGapInfo {
    pub fn from_operator<T: Real>(op: &HermitianOperator<T>, psi0: &StateVector<T>) -> Result<Self> {
        if op.min_eigenvalue() <= T::zero() {
            return Err(domain("spectral gap info needs a positive spectrum"));
        }
        if op.dim() < 2 {
            return Err(domain("spectral gap info needs at least two levels"));
        }
        let ev = op.eigenvalues();
        let overlap = to_f64(inner(&op.ground_state(), psi0).norm_sqr()).min(1.0);
        Ok(Self {
            lambda1: 1.0 / to_f64(ev[0]),
            lambda2: 1.0 / to_f64(ev[1]),
            lambda_n: 1.0 / to_f64(ev[ev.len() - 1]),
            theta0: overlap.sqrt().asin(),
        })
    }
}

/// `K = log[ε sin^{-2}θ0 / (λ1 - λn)] / [2 log(λ2/λ1)]`.
pub fn predicted_iterations(info: &SpectralGapInfo, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(domain("accuracy must be positive"));
    }
    let ratio = info.lambda2 / info.lambda1;
    if !(ratio < 1.0 - 1e-12) {
        return Err(Error::DegenerateGap(info.lambda1));
    }
    let s2 = info.theta0.sin().powi(2);
    if !(s2 > 0.0) {
        return Err(domain("initial state is orthogonal to the ground state"));
    }
    Ok((eps / s2 / (info.lambda1 - info.lambda_n)).ln() / (2.0 * ratio.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{build_h2, H2_HF_BITS, H2_SHIFT};
    use crate::series::{build_series, dedup_phases, GridParams};

    fn setup() -> (HermitianOperator<f64>, StateVector<f64>) {
        let op = build_h2::<f64>().to_dense().unwrap().shift(H2_SHIFT);
        (op, StateVector::from_bits(&H2_HF_BITS).unwrap())
    }

    #[test]
    fn k0_ledger_gives_rayleigh_quotient() {
        let (op, psi) = setup();
        let prov = ExactOverlaps::new(EvolutionBackend::exact(op.clone()), psi.clone()).unwrap();
        let r = estimate_energy(&op, &PhaseLedger::identity(), &prov).unwrap();
        assert!((r.lambda_est - op.expectation(&psi)).abs() < 1e-14);
        assert!((r.lambda_est - 0.883316).abs() < 5e-6);
    }

    #[test]
    fn ideal_k0_is_hf_energy() {
        let (op, psi) = setup();
        let it = ideal_iterate(&op, &psi, 0).unwrap();
        assert!((it.energy - 0.883316).abs() < 5e-6);
        assert!(it.warning.is_none());
    }

    #[test]
    fn identity_observable_is_one() {
        let (op, psi) = setup();
        let prov = ExactOverlaps::new(EvolutionBackend::exact(op), psi).unwrap();
        let g = GridParams::from_phi_max(2, 8, 8, 0.7, 1.0).unwrap();
        let ledger = dedup_phases(&build_series(&g).unwrap());
        let v = estimate_observable(&CMatrix::identity(16, 16), &ledger, &prov).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn hamiltonian_observable_matches_energy() {
        let (op, psi) = setup();
        let prov = ExactOverlaps::new(EvolutionBackend::exact(op.clone()), psi).unwrap();
        let g = GridParams::from_phi_max(3, 10, 10, 0.9, 1.0).unwrap();
        let ledger = dedup_phases(&build_series(&g).unwrap());
        let e = estimate_energy(&op, &ledger, &prov).unwrap();
        let o = estimate_observable(op.matrix(), &ledger, &prov).unwrap();
        assert!((e.lambda_est - o).abs() < 1e-10);
    }

    #[test]
    fn floor_raises_ill_conditioned() {
        let (op, psi) = setup();
        let prov = ExactOverlaps::new(EvolutionBackend::exact(op.clone()), psi).unwrap();
        let opts = EstimatorOptions {
            denominator_floor: 10.0,
        };
        let err = estimate_energy_with(&op, &PhaseLedger::identity(), &prov, &opts).unwrap_err();
        assert!(matches!(err, Error::IllConditioned { .. }));
    }

    #[test]
    fn tabulated_lookup_and_conjugation() {
        let t = TabulatedOverlaps::new(
            1,
            vec![
                (0.5, Complex::new(0.1, 0.2), Complex::new(0.3, 0.4)),
                (0.0, Complex::new(1.0, 0.0), Complex::new(2.0, 0.0)),
            ],
        );
        assert_eq!(t.overlap(0.5, OverlapKind::Norm).unwrap(), Complex::new(0.1, 0.2));
        assert_eq!(t.overlap(-0.5, OverlapKind::Energy).unwrap(), Complex::new(0.3, -0.4));
        assert!(t.overlap(0.25, OverlapKind::Norm).is_err());
        assert!(t
            .observable_numerator(&CMatrix::identity(1, 1), &PhaseLedger::identity())
            .is_err());
    }

    #[test]
    fn degenerate_gap_is_an_error() {
        let info = SpectralGapInfo {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda_n: 0.1,
            theta0: 1.0,
        };
        assert!(matches!(
            predicted_iterations(&info, 1e-3),
            Err(Error::DegenerateGap(_))
        ));
    }

    #[test]
    fn csv_record_leaves_missing_ideal_blank() {
        let r = IterationReport {
            k: 2,
            lambda_est: 1.0,
            lambda_ideal: None,
            delta_lambda: 0.0,
            norm_value: 1.0,
            imag_residue: 0.0,
            numerator: 1.0,
            warning: None,
        };
        assert_eq!(r.csv_record()[2], "");
        assert_eq!(IterationReport::CSV_HEADER.len(), r.csv_record().len());
    }
}
