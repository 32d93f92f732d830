//! Fourier-series approximation of inverse Hamiltonian powers.
//!
//! `H^{-k}` is written as the double integral
//!
//! ```text
//! H^{-k} = i N_k / sqrt(2 pi) ∫_0^∞ dy ∫_{-∞}^{∞} dz  z y^{k-1} e^{-z^2/2} e^{-i y z H}
//! ```
//!
//! and discretized on `j_y ∈ {0..My-1}`, `j_z ∈ {-Mz..Mz}` into
//! `sum_l c_l e^{-i phi_l H}` with `phi_l = (j_y Δy)(j_z Δz)`.
//! Every grid phase is an integer multiple of `Δy Δz`, which is used as an
//! exact key when phases and phase differences are deduplicated.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::operator::{HermitianOperator, DEFAULT_MAX_DIM};
use crate::propagator::EvolutionBackend;
use crate::scalar::{from_i64, from_usize, lit, norm, CMatrix, CVector, Real};
use crate::state::StateVector;

/// Discretization of the double integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams<T> {
    pub k: u32,
    pub my: usize,
    pub mz: usize,
    /// Step of the `y` variable, in units of inverse energy.
    pub dy: T,
    /// Step of the dimensionless `z` variable.
    pub dz: T,
}

impl<T: Real> GridParams<T> {
    pub fn new(k: u32, my: usize, mz: usize, dy: T, dz: T) -> Result<Self> {
        let g = Self { k, my, mz, dy, dz };
        g.validate()?;
        Ok(g)
    }

    /// Grid with a prescribed `phi_max / 2 pi` and skew `Δy / Δz`.
    pub fn from_phi_max(k: u32, my: usize, mz: usize, phi_max_over_2pi: T, skew: T) -> Result<Self> {
        if !(phi_max_over_2pi > T::zero()) || !(skew > T::zero()) {
            return Err(domain("phi_max and skew must be positive"));
        }
        if my == 0 || mz == 0 {
            return Err(domain("My and Mz must be at least 1"));
        }
        let phi_max = phi_max_over_2pi * T::two_pi();
        let dz = (phi_max / (from_usize::<T>(my) * from_usize::<T>(mz) * skew)).sqrt();
        Self::new(k, my, mz, skew * dz, dz)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(domain("inverse power k must be at least 1"));
        }
        if self.my == 0 || self.mz == 0 {
            return Err(domain("My and Mz must be at least 1"));
        }
        if !(self.dy > T::zero()) || !(self.dz > T::zero()) {
            return Err(domain("grid steps must be positive"));
        }
        Ok(())
    }

    /// `(My Δy)(Mz Δz)`.
    pub fn phi_max(&self) -> T {
        from_usize::<T>(self.my) * self.dy * from_usize::<T>(self.mz) * self.dz
    }

    /// `Δy / Δz` (with energies in units of J).
    pub fn skew(&self) -> T {
        self.dy / self.dz
    }

    pub fn with_k(&self, k: u32) -> Self {
        Self { k, ..*self }
    }

    /// Number of series terms `My (2 Mz + 1)`.
    pub fn len(&self) -> usize {
        self.my * (2 * self.mz + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `N_k = 1 / (2^{(k-1)/2} Γ((k+1)/2))`, the constant making the integral
/// representation exact for scalar `x > 0`.
pub fn normalization_constant<T: Real>(k: u32) -> Result<T> {
    if k < 1 {
        return Err(domain("normalization constant needs k >= 1"));
    }
    let kf = f64::from(k);
    let n = 1.0 / (2f64.powf((kf - 1.0) / 2.0) * libm::tgamma((kf + 1.0) / 2.0));
    Ok(lit(n))
}

/// One term `c e^{-i phi H}` of the series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEntry<T: Real> {
    pub coeff: Complex<T>,
    pub phase: T,
    pub jy: usize,
    pub jz: i64,
}

impl<T: Real> SeriesEntry<T> {
    /// Phase in units of `Δy Δz`.
    pub fn key(&self) -> i64 {
        self.jy as i64 * self.jz
    }
}

/// Coefficients and phases approximating `H^{-k}`.
#[derive(Debug, Clone)]
pub struct ExpansionSeries<T: Real> {
    grid: GridParams<T>,
    norm_const: T,
    entries: Vec<SeriesEntry<T>>,
}

impl<T: Real> ExpansionSeries<T> {
    pub fn k(&self) -> u32 {
        self.grid.k
    }

    pub fn grid(&self) -> &GridParams<T> {
        &self.grid
    }

    pub fn norm_const(&self) -> T {
        self.norm_const
    }

    pub fn entries(&self) -> &[SeriesEntry<T>] {
        &self.entries
    }

    /// `L_k = My (2 Mz + 1)`.
    pub fn l_k(&self) -> usize {
        self.entries.len()
    }

    /// Grid spacing of all phases, `Δy Δz`.
    pub fn phase_unit(&self) -> T {
        self.grid.dy * self.grid.dz
    }

    /// Largest `|phi_l|` appearing in the series.
    pub fn max_phase(&self) -> T {
        self.entries
            .iter()
            .map(|e| e.phase.abs())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Scalar evaluation `sum_l c_l e^{-i phi_l x}`.
    pub fn evaluate_scalar(&self, x: T) -> Complex<T> {
        self.entries.iter().fold(Complex::new(T::zero(), T::zero()), |acc, e| {
            acc + e.coeff * crate::scalar::phase(e.phase * x)
        })
    }

    /// Entries with equal phase merged: `(key, summed coefficient, summed |c|)`, sorted by key.
    pub fn grouped_by_phase(&self) -> Vec<(i64, Complex<T>, T)> {
        let mut sorted: Vec<_> = self.entries.iter().map(|e| (e.key(), e.coeff)).collect();
        sorted.sort_by_key(|&(k, _)| k);
        let mut out: Vec<(i64, Complex<T>, T)> = Vec::new();
        for (key, c) in sorted {
            match out.last_mut() {
                Some(last) if last.0 == key => {
                    last.1 += c;
                    last.2 += (c.re * c.re + c.im * c.im).sqrt();
                }
                _ => out.push((key, c, (c.re * c.re + c.im * c.im).sqrt())),
            }
        }
        out
    }
}

/// Builds the discretized series for `grid.k`.
pub fn build_series<T: Real>(grid: &GridParams<T>) -> Result<ExpansionSeries<T>> {
    grid.validate()?;
    let norm_const = normalization_constant::<T>(grid.k)?;
    let prefactor = norm_const / T::two_pi().sqrt();
    let half = lit::<T>(0.5);
    let mz = grid.mz as i64;
    let mut entries = Vec::with_capacity(grid.len());
    for jy in 0..grid.my {
        let y = from_usize::<T>(jy) * grid.dy;
        let y_weight = grid.dy * y.powi(grid.k as i32 - 1);
        for jz in -mz..=mz {
            let z = from_i64::<T>(jz) * grid.dz;
            let magnitude = prefactor * y_weight * grid.dz * z * (-half * z * z).exp();
            entries.push(SeriesEntry {
                coeff: Complex::new(T::zero(), magnitude),
                phase: y * z,
                jy,
                jz,
            });
        }
    }
    Ok(ExpansionSeries {
        grid: *grid,
        norm_const,
        entries,
    })
}

/// Result of applying the series to a state.
#[derive(Debug, Clone)]
pub struct SeriesApplication<T: Real> {
    /// Unnormalized `H_a^{-k} psi`.
    pub vector: CVector<T>,
    pub norm: T,
    /// Set when the spectrum is not strictly positive.
    pub warning: Option<String>,
}

impl<T: Real> SeriesApplication<T> {
    pub fn normalized(&self) -> Result<StateVector<T>> {
        StateVector::new(self.vector.clone())
    }
}

const APPLY_CHUNK: usize = 32;

/// `sum_l c_l U(phi_l) psi` through the chosen backend.
///
/// Terms sharing a phase are merged before evolving. Chunks are evaluated in
/// parallel and reduced in index order, so the result does not depend on the
/// thread count.
pub fn apply_series<T: Real>(
    series: &ExpansionSeries<T>,
    backend: &EvolutionBackend<T>,
    psi: &StateVector<T>,
) -> Result<SeriesApplication<T>> {
    if backend.dim() != psi.dim() {
        return Err(domain(format!(
            "backend dimension {} does not match state dimension {}",
            backend.dim(),
            psi.dim()
        )));
    }
    let warning = (backend.operator().min_eigenvalue() <= T::zero()).then(|| {
        format!(
            "spectrum not strictly positive (lowest eigenvalue {:e}); the series does not approximate an inverse",
            backend.operator().min_eigenvalue()
        )
    });
    let unit = series.phase_unit();
    let groups = series.grouped_by_phase();
    let partials: Vec<CVector<T>> = groups
        .par_chunks(APPLY_CHUNK)
        .map(|chunk| {
            let mut acc = CVector::zeros(psi.dim());
            for &(key, c, _) in chunk {
                if c.re == T::zero() && c.im == T::zero() {
                    continue;
                }
                let evolved = backend.evolve_vector(from_i64::<T>(key) * unit, psi);
                acc.axpy(c, &evolved, Complex::new(T::one(), T::zero()));
            }
            acc
        })
        .collect();
    let mut vector = CVector::zeros(psi.dim());
    for p in &partials {
        vector += p;
    }
    let norm = norm(&vector);
    Ok(SeriesApplication { vector, norm, warning })
}

/// Dense `H_a^{-k} = sum_l c_l e^{-i phi_l H}` built from the spectrum.
pub fn materialize_inverse<T: Real>(series: &ExpansionSeries<T>, op: &HermitianOperator<T>) -> Result<CMatrix<T>> {
    if op.dim() > DEFAULT_MAX_DIM {
        return Err(Error::Resource(format!(
            "dimension {} exceeds the dense cap {DEFAULT_MAX_DIM}",
            op.dim()
        )));
    }
    let unit = series.phase_unit();
    let groups = series.grouped_by_phase();
    let values: Vec<Complex<T>> = op
        .eigenvalues()
        .iter()
        .map(|&l| {
            groups
                .iter()
                .fold(Complex::new(T::zero(), T::zero()), |acc, &(key, c, _)| {
                    acc + c * crate::scalar::phase(from_i64::<T>(key) * unit * l)
                })
        })
        .collect();
    let mut scaled = op.eigenvectors().clone();
    for (mut col, v) in scaled.column_iter_mut().zip(values) {
        col *= v;
    }
    Ok(scaled * op.eigenvectors().adjoint())
}

/// Dense `sum_l c_l U(phi_l)` with the backend's propagator, column by column.
pub fn materialize_with_backend<T: Real>(
    series: &ExpansionSeries<T>,
    backend: &EvolutionBackend<T>,
) -> Result<CMatrix<T>> {
    let dim = backend.dim();
    if dim > DEFAULT_MAX_DIM {
        return Err(Error::Resource(format!(
            "dimension {dim} exceeds the dense cap {DEFAULT_MAX_DIM}"
        )));
    }
    let mut out = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        let e = StateVector::basis(dim, i)?;
        out.set_column(i, &apply_series(series, backend, &e)?.vector);
    }
    Ok(out)
}

/// Exact dense `H^{-k}` for a positive spectrum.
pub fn exact_inverse_power<T: Real>(op: &HermitianOperator<T>, k: u32) -> Result<CMatrix<T>> {
    if op.min_eigenvalue() <= T::zero() {
        return Err(domain("inverse power needs a positive spectrum"));
    }
    Ok(op.function_matrix(|l| Complex::new(l.powi(-(k as i32)), T::zero())))
}

/// Half the trace norm of `a - b`.
pub fn trace_distance<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Result<T> {
    if a.shape() != b.shape() {
        return Err(domain(format!(
            "trace distance of {:?} and {:?} matrices",
            a.shape(),
            b.shape()
        )));
    }
    let svd = nalgebra::SVD::new(a - b, false, false);
    Ok(svd.singular_values.iter().fold(T::zero(), |acc, &s| acc + s) * lit(0.5))
}

/// One deduplicated phase difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerRow<T: Real> {
    /// `|δφ|` in units of `Δy Δz`.
    pub key: u64,
    pub delta_phi: T,
    /// Accumulated `Re(c*_{l'} c_l)` over all pairs with this `|δφ|`.
    pub p: T,
    /// Share of `p` from pairs with `φ_l > φ_{l'}`; the rest has the opposite sign of `δφ`.
    pub p_forward: T,
    /// Accumulated `|c*_{l'} c_l|`.
    pub abs_weight: T,
}

/// Deduplicated phase-difference table for one series.
///
/// The zero phase difference is kept separately in `zero`.
#[derive(Debug, Clone)]
pub struct PhaseLedger<T: Real> {
    pub k: u32,
    pub phase_unit: T,
    pub zero: LedgerRow<T>,
    pub rows: Vec<LedgerRow<T>>,
    /// Series coefficients merged by phase, `(phase key, coefficient)`, sorted by key.
    pub terms: Vec<(i64, Complex<T>)>,
}

impl<T: Real> PhaseLedger<T> {
    /// Ledger of the trivial `k = 0` iteration: a single zero-phase row.
    pub fn identity() -> Self {
        Self {
            k: 0,
            phase_unit: T::one(),
            zero: LedgerRow {
                key: 0,
                delta_phi: T::zero(),
                p: T::one(),
                p_forward: T::zero(),
                abs_weight: T::one(),
            },
            rows: Vec::new(),
            terms: vec![(0, Complex::new(T::one(), T::zero()))],
        }
    }

    /// Number of nonzero phase differences.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Zero row followed by the nonzero rows.
    pub fn all_rows(&self) -> impl Iterator<Item = &LedgerRow<T>> {
        std::iter::once(&self.zero).chain(self.rows.iter())
    }

    /// Phase of a merged series term.
    pub fn term_phase(&self, key: i64) -> T {
        from_i64::<T>(key) * self.phase_unit
    }

    pub fn max_delta_phi(&self) -> T {
        self.rows.last().map_or(T::zero(), |r| r.delta_phi)
    }
}

#[derive(Clone, Copy)]
struct Accum {
    fwd: f64,
    bwd: f64,
    abs: f64,
    seen: bool,
}

/// Folds all pairs `(l, l')` to unique `|φ_l - φ_l'|` with accumulated weights.
///
/// `±δφ` are folded together: for a Hermitian `H` the overlaps at `-δφ` are
/// the complex conjugates of those at `+δφ`, so only real parts survive in the
/// estimator sums.
pub fn dedup_phases<T: Real>(series: &ExpansionSeries<T>) -> PhaseLedger<T> {
    let groups = series.grouped_by_phase();
    let (lo, hi) = match (groups.first(), groups.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => (0, 0),
    };
    let span = (hi - lo) as usize;
    let mut acc = vec![
        Accum {
            fwd: 0.0,
            bwd: 0.0,
            abs: 0.0,
            seen: false,
        };
        span + 1
    ];
    // Accumulate in f64: the table is summed over up to ~10^7 pairs.
    let g64: Vec<(i64, Complex<f64>, f64)> = groups
        .iter()
        .map(|&(k, c, a)| {
            (
                k,
                Complex::new(crate::scalar::to_f64(c.re), crate::scalar::to_f64(c.im)),
                crate::scalar::to_f64(a),
            )
        })
        .collect();
    for &(key_l, c_l, a_l) in &g64 {
        for &(key_m, c_m, a_m) in &g64 {
            let delta = key_l - key_m;
            let p = (c_m.conj() * c_l).re;
            let slot = &mut acc[delta.unsigned_abs() as usize];
            slot.seen = true;
            if delta >= 0 {
                slot.fwd += p;
            } else {
                slot.bwd += p;
            }
            slot.abs += a_l * a_m;
        }
    }
    let unit = series.phase_unit();
    let row = |key: usize, a: &Accum| LedgerRow {
        key: key as u64,
        delta_phi: from_usize::<T>(key) * unit,
        p: lit(a.fwd + a.bwd),
        p_forward: lit(a.fwd),
        abs_weight: lit(a.abs),
    };
    let zero = row(0, &acc[0]);
    let rows = acc
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, a)| a.seen)
        .map(|(key, a)| row(key, a))
        .collect();
    PhaseLedger {
        k: series.k(),
        phase_unit: unit,
        zero,
        rows,
        terms: groups.iter().map(|&(k, c, _)| (k, c)).collect(),
    }
}

/// Normalized weight histogram `w_q = sum_i |p_{q_i}| / sum_{q,i} |p_{q_i}|`, zero row first.
pub fn weight_histogram<T: Real>(ledger: &PhaseLedger<T>) -> Vec<(T, T)> {
    let total = ledger.all_rows().fold(T::zero(), |a, r| a + r.abs_weight);
    ledger
        .all_rows()
        .map(|r| {
            let w = if total > T::zero() {
                r.abs_weight / total
            } else {
                T::zero()
            };
            (r.delta_phi, w)
        })
        .collect()
}

/// Multipliers on the asymptotic grid formulas used by [`suggest_grid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConstants {
    pub dy: f64,
    pub dz: f64,
    pub my: f64,
    pub mz: f64,
}

impl Default for GridConstants {
    /// Unit constants except for `Mz`, which is doubled so that the `z`
    /// cutoff `Mz Δz = 2 sqrt(log(κ/ε))` clears the Gaussian tail.
    fn default() -> Self {
        Self {
            dy: 1.0,
            dz: 1.0,
            my: 1.0,
            mz: 2.0,
        }
    }
}

/// Grid reaching accuracy `eps` for condition number `kappa`:
///
/// `Δy = ε/√L`, `Δz = 1/(κ√L)`, `My = k κ L/ε`, `Mz = κ L`, with `L = log(κ/ε)`.
/// The `y` range grows linearly with `k`, so `φ_max = O(k κ log(κ/ε))`.
pub fn suggest_grid<T: Real>(kappa: T, eps: T, k: u32) -> Result<GridParams<T>> {
    suggest_grid_with(kappa, eps, k, GridConstants::default())
}

pub fn suggest_grid_with<T: Real>(kappa: T, eps: T, k: u32, consts: GridConstants) -> Result<GridParams<T>> {
    let kappa = crate::scalar::to_f64(kappa);
    let eps = crate::scalar::to_f64(eps);
    if !(kappa > 1.0) {
        return Err(domain(format!("condition number must exceed 1, got {kappa}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("accuracy must lie in (0, 1), got {eps}")));
    }
    if k < 1 {
        return Err(domain("inverse power k must be at least 1"));
    }
    let log = (kappa / eps).ln();
    let root = log.sqrt();
    let dy = consts.dy * eps / root;
    let dz = consts.dz / (kappa * root);
    let my = (consts.my * f64::from(k) * kappa * log / eps).ceil() as usize;
    let mz = (consts.mz * kappa * log).ceil() as usize;
    GridParams::new(k, my.max(1), mz.max(1), lit(dy), lit(dz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{build_h2, H2_SHIFT};

    fn grid(k: u32, m: usize, d: f64) -> GridParams<f64> {
        GridParams::new(k, m, m, d, d).unwrap()
    }

    #[test]
    fn normalization_constants_closed_form() {
        assert!((normalization_constant::<f64>(1).unwrap() - 1.0).abs() < 1e-15);
        assert!((normalization_constant::<f64>(2).unwrap() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((normalization_constant::<f64>(3).unwrap() - 0.5).abs() < 1e-15);
        assert!(normalization_constant::<f64>(0).is_err());
    }

    #[test]
    fn coefficients_are_imaginary_and_vanish_at_zero_z() {
        let s = build_series(&grid(2, 7, 0.3)).unwrap();
        assert_eq!(s.l_k(), 7 * 15);
        for e in s.entries() {
            assert_eq!(e.coeff.re, 0.0);
            if e.jz == 0 {
                assert_eq!(e.coeff.im, 0.0);
            }
        }
    }

    #[test]
    fn k1_magnitudes_independent_of_jy() {
        let s = build_series(&grid(1, 6, 0.2)).unwrap();
        for jz in -6..=6 {
            let mags: Vec<f64> = s.entries().iter().filter(|e| e.jz == jz).map(|e| e.coeff.im).collect();
            assert!(mags.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn scalar_inverse_at_unit_argument() {
        let s = build_series(&grid(1, 60, 0.1)).unwrap();
        assert!((s.evaluate_scalar(1.0).re - 1.0).abs() < 1e-2);
    }

    #[test]
    fn phi_max_and_skew_from_target() {
        let g = GridParams::<f64>::from_phi_max(4, 30, 30, 1.35, 2.0).unwrap();
        assert!((g.phi_max() - 1.35 * std::f64::consts::TAU).abs() < 1e-12);
        assert!((g.skew() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_entry_series_gives_zero_vector() {
        let op = build_h2::<f64>().to_dense().unwrap().shift(H2_SHIFT);
        let s = build_series(&grid(3, 1, 0.5)).unwrap();
        let psi = op.ground_state();
        let out = apply_series(&s, &EvolutionBackend::exact(op), &psi).unwrap();
        assert_eq!(out.norm, 0.0);
    }

    #[test]
    fn apply_matches_materialized() {
        let op = build_h2::<f64>().to_dense().unwrap().shift(H2_SHIFT);
        let s = build_series(&GridParams::from_phi_max(2, 12, 12, 0.8, 1.0).unwrap()).unwrap();
        let psi = crate::state::StateVector::from_bits(&[1, 1, 0, 0]).unwrap();
        let a = apply_series(&s, &EvolutionBackend::exact(op.clone()), &psi).unwrap();
        let m = materialize_inverse(&s, &op).unwrap();
        assert!((a.vector - &m * psi.amplitudes()).norm() < 1e-10);
    }

    #[test]
    fn backend_materialization_matches_spectral() {
        let op = build_h2::<f64>().to_dense().unwrap().shift(H2_SHIFT);
        let s = build_series(&grid(2, 6, 0.4)).unwrap();
        let a = materialize_with_backend(&s, &EvolutionBackend::exact(op.clone())).unwrap();
        let b = materialize_inverse(&s, &op).unwrap();
        assert!(crate::scalar::frobenius(&(a - b)) < 1e-10);
    }

    #[test]
    fn trace_distance_basics() {
        let a = CMatrix::<f64>::identity(3, 3);
        assert!(trace_distance(&a, &a).unwrap().abs() < 1e-15);
        let mut p = CMatrix::<f64>::zeros(2, 2);
        let mut q = CMatrix::<f64>::zeros(2, 2);
        p[(0, 0)] = Complex::new(1.0, 0.0);
        q[(1, 1)] = Complex::new(1.0, 0.0);
        assert!((trace_distance(&p, &q).unwrap() - 1.0).abs() < 1e-14);
        assert!(trace_distance(&p, &CMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn single_entry_ledger_has_only_zero_row() {
        assert!(GridParams::new(1, 1, 0, 0.5, 0.5).is_err());
        let s = build_series(&grid(1, 1, 0.5)).unwrap();
        let single = ExpansionSeries {
            grid: *s.grid(),
            norm_const: 1.0,
            entries: vec![s.entries()[0]],
        };
        let ledger = dedup_phases(&single);
        assert!(ledger.is_empty());
    }

    #[test]
    fn supplement_grid_has_35_phase_differences() {
        let s = build_series(&grid(1, 5, 0.5)).unwrap();
        assert_eq!(dedup_phases(&s).len(), 35);
    }

    #[test]
    fn histogram_sums_to_one() {
        let s = build_series(&grid(2, 5, 0.5)).unwrap();
        let h = weight_histogram(&dedup_phases(&s));
        let total: f64 = h.iter().map(|&(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn suggest_grid_contract() {
        let g = suggest_grid::<f64>(3.38, 1.6e-3, 1).unwrap();
        let product = (g.my as f64 * g.dy) * (g.mz as f64 * g.dz);
        assert!((g.phi_max() - product).abs() <= 1e-12 * product);
        let g2 = suggest_grid::<f64>(6.76, 1.6e-3, 1).unwrap();
        assert!(g2.my >= g.my && g2.mz >= g.mz && g2.phi_max() >= g.phi_max());
        assert!(suggest_grid::<f64>(1.0, 1e-3, 1).is_err());
        assert!(suggest_grid::<f64>(2.0, 1.5, 1).is_err());
    }
}
