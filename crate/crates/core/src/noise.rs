//! Dephasing noise by quantum-jump Monte Carlo, zero-noise extrapolation and
//! the weighted direct/indirect combiner.
//!
//! Jump operators are `C_j = sqrt(gamma) Z_j`. Since `C_j^H C_j = gamma I`, the
//! no-jump evolution stays unitary and jump times are state independent: each
//! qubit receives `Z` insertions at the events of a Poisson process of rate
//! `gamma`. Jump times are drawn as unit exponentials divided by `gamma`, so a
//! given trajectory index sees the same random numbers at every rate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Result};
use crate::estimator::{OverlapKind, OverlapProvider};
use crate::propagator::EvolutionBackend;
use crate::protocol::{
    build_cross_probes, build_probes, indirect_radicand, infer_direct, infer_indirect, ProbeSet, ProtocolProbabilities,
};
use crate::rng::{derive_seed, stream_rng};
use crate::scalar::{inner, lit, norm, phase, to_f64, CMatrix, CVector, Real};
use crate::state::StateVector;

/// Default dephasing sweep in units of J.
pub const DEFAULT_GAMMA_SWEEP: [f64; 5] = [0.02, 0.03, 0.045, 0.065, 0.1];
pub const DEFAULT_GAMMA_MIN: f64 = 0.02;
pub const DEFAULT_TRAJECTORIES: usize = 5000;

/// Noise model and sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Rate for single-rate runs.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_trajectories", alias = "trajectories")]
    pub n_trajectories: usize,
    #[serde(default, alias = "seed")]
    pub master_seed: u64,
    #[serde(default = "default_sweep")]
    pub gamma_sweep: Vec<f64>,
    #[serde(default = "default_gamma_min")]
    pub gamma_min: f64,
    /// Order of the extrapolations entering the weighted combination.
    #[serde(default = "default_representative")]
    pub representative_order: usize,
    #[serde(default = "default_orders")]
    pub extrap_orders: Vec<usize>,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA_MIN
}
fn default_trajectories() -> usize {
    DEFAULT_TRAJECTORIES
}
fn default_sweep() -> Vec<f64> {
    DEFAULT_GAMMA_SWEEP.to_vec()
}
fn default_gamma_min() -> f64 {
    DEFAULT_GAMMA_MIN
}
fn default_representative() -> usize {
    3
}
fn default_orders() -> Vec<usize> {
    vec![1, 3]
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            gamma: default_gamma(),
            n_trajectories: default_trajectories(),
            master_seed: 0,
            gamma_sweep: default_sweep(),
            gamma_min: default_gamma_min(),
            representative_order: default_representative(),
            extrap_orders: default_orders(),
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(validation("gamma must be a finite non-negative rate"));
        }
        if self.n_trajectories == 0 {
            return Err(validation("at least one trajectory is required"));
        }
        if self.gamma_sweep.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(validation("gamma sweep rates must be finite and non-negative"));
        }
        if self.gamma_sweep.windows(2).any(|w| w[1] <= w[0]) {
            return Err(validation("gamma sweep must be strictly ascending"));
        }
        if let Some(&first) = self.gamma_sweep.first() {
            if self.gamma_min > first && !self.gamma_sweep.contains(&self.gamma_min) {
                return Err(validation("gamma_min must be a sweep point or lie below the sweep"));
            }
        }
        if !matches!(self.representative_order, 1 | 3) {
            return Err(validation("representative extrapolation order must be 1 or 3"));
        }
        Ok(())
    }

    /// Sweep points at or above `gamma_min`.
    pub fn accessible_sweep(&self) -> Vec<f64> {
        self.gamma_sweep
            .iter()
            .copied()
            .filter(|&g| g >= self.gamma_min)
            .collect()
    }
}

/// Precomputed data for trajectory propagation.
#[derive(Debug, Clone)]
pub struct NoisyEvolver<T: Real> {
    backend: EvolutionBackend<T>,
    n_qubits: usize,
    /// `V^H Z_j V` for the exact backend.
    z_eigen: Option<Vec<CMatrix<T>>>,
}

fn qubit_count(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(domain(format!(
            "dephasing noise needs a qubit register, got dimension {dim}"
        )));
    }
    Ok(dim.trailing_zeros() as usize)
}

fn z_sign<T: Real>(index: usize, qubit: usize) -> T {
    if (index >> qubit) & 1 == 0 {
        T::one()
    } else {
        -T::one()
    }
}

fn apply_z<T: Real>(v: &mut CVector<T>, qubit: usize) {
    for (i, a) in v.iter_mut().enumerate() {
        if (i >> qubit) & 1 == 1 {
            *a = -*a;
        }
    }
}

impl<T: Real> NoisyEvolver<T> {
    pub fn new(backend: EvolutionBackend<T>) -> Result<Self> {
        let n_qubits = qubit_count(backend.dim())?;
        let z_eigen = match &backend {
            EvolutionBackend::Exact(op) => {
                let v = op.eigenvectors();
                Some(
                    (0..n_qubits)
                        .map(|j| {
                            let mut zv = v.clone();
                            for (r, mut row) in zv.row_iter_mut().enumerate() {
                                row *= Complex::new(z_sign::<T>(r, j), T::zero());
                            }
                            v.ad_mul(&zv)
                        })
                        .collect(),
                )
            }
            EvolutionBackend::Trotter { .. } => None,
        };
        Ok(Self {
            backend,
            n_qubits,
            z_eigen,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn backend(&self) -> &EvolutionBackend<T> {
        &self.backend
    }

    /// Sorted `(time, qubit)` jump events on `[0, phi]` for one trajectory seed.
    pub fn jump_record(&self, phi: T, gamma: T, seed: u64) -> Vec<(T, usize)> {
        let mut events = Vec::new();
        if gamma <= T::zero() || phi <= T::zero() {
            return events;
        }
        for j in 0..self.n_qubits {
            let mut rng = stream_rng(seed, j as u64, 0);
            let mut t = T::zero();
            loop {
                let u: f64 = rng.random::<f64>();
                t += lit::<T>(-(1.0 - u).ln()) / gamma;
                if t > phi {
                    break;
                }
                events.push((t, j));
            }
        }
        events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        events
    }

    /// Propagates `psi` through free evolution interleaved with the given jumps.
    pub fn propagate(&self, psi: &CVector<T>, phi: T, jumps: &[(T, usize)]) -> CVector<T> {
        match (&self.backend, &self.z_eigen) {
            (EvolutionBackend::Exact(op), Some(z)) => {
                let eig = op.eigenvalues();
                let rotate = |a: &mut CVector<T>, dt: T| {
                    for (x, &l) in a.iter_mut().zip(eig) {
                        *x *= phase(dt * l);
                    }
                };
                let mut a = op.to_eigenbasis(psi);
                let mut now = T::zero();
                for &(t, j) in jumps {
                    rotate(&mut a, t - now);
                    a = &z[j] * &a;
                    now = t;
                }
                rotate(&mut a, phi - now);
                op.from_eigenbasis(&a)
            }
            _ => {
                let mut v = psi.clone();
                let mut now = T::zero();
                for &(t, j) in jumps {
                    v = self.backend.evolve_vector(t - now, &v);
                    apply_z(&mut v, j);
                    now = t;
                }
                self.backend.evolve_vector(phi - now, &v)
            }
        }
    }
}

/// One trajectory of the dephased evolution by phase `phi`.
pub fn mc_trajectory<T: Real>(
    evolver: &NoisyEvolver<T>,
    psi: &StateVector<T>,
    phi: T,
    gamma: T,
    seed: u64,
) -> Result<StateVector<T>> {
    if !(phi >= T::zero()) {
        return Err(domain("noisy evolution needs a non-negative phase"));
    }
    if !(gamma >= T::zero()) {
        return Err(domain("dephasing rate must be non-negative"));
    }
    if psi.dim() != evolver.backend.dim() {
        return Err(domain("state dimension does not match the evolver"));
    }
    let jumps = evolver.jump_record(phi, gamma, seed);
    StateVector::new(evolver.propagate(psi, phi, &jumps))
}

/// Trajectory-averaged protocol probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyProbabilities {
    pub mean: ProtocolProbabilities<f64>,
    /// Standard errors of `p0`, `pp`, `pi`.
    pub stderr: [f64; 3],
    /// Per-trajectory direct estimates of the overlap, summarized.
    pub direct: Complex<f64>,
    pub direct_stderr: Complex<f64>,
}

const TRAJ_CHUNK: usize = 64;
const STREAM_KET: u64 = 0x4b45;
const STREAM_PLUS: u64 = 0x504c;

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Averages the three protocol probabilities over `n_traj` trajectories.
///
/// Trajectory `i` of each probe is seeded from `(master_seed, probe, i)`;
/// the reduction runs in index order.
pub fn noisy_probabilities<T: Real>(
    probes: &ProbeSet<T>,
    evolver: &NoisyEvolver<T>,
    t: T,
    gamma: T,
    n_traj: usize,
    master_seed: u64,
) -> Result<NoisyProbabilities> {
    if n_traj == 0 {
        return Err(validation("at least one trajectory is required"));
    }
    if !(t >= T::zero()) || !(gamma >= T::zero()) {
        return Err(domain("noisy probabilities need non-negative phase and rate"));
    }
    let lambda_r = probes.lambda_r;
    let idx: Vec<usize> = (0..n_traj).collect();
    let samples: Vec<[f64; 5]> = idx
        .par_chunks(TRAJ_CHUNK)
        .flat_map_iter(|chunk| {
            chunk.iter().map(|&i| {
                let s_ket = derive_seed(master_seed, STREAM_KET, i as u64);
                let s_plus = derive_seed(master_seed, STREAM_PLUS, i as u64);
                let ket_t = evolver.propagate(&probes.ket, t, &evolver.jump_record(t, gamma, s_ket));
                let plus_t = evolver.propagate(&probes.psi_plus, t, &evolver.jump_record(t, gamma, s_plus));
                let p = ProtocolProbabilities {
                    p0: inner(&probes.psi0, &ket_t).norm_sqr(),
                    pp: inner(&probes.bra_plus, &plus_t).norm_sqr(),
                    pi: inner(&probes.psi_i, &plus_t).norm_sqr(),
                    t,
                };
                let d = infer_direct(&p, lambda_r);
                [to_f64(p.p0), to_f64(p.pp), to_f64(p.pi), to_f64(d.re), to_f64(d.im)]
            })
        })
        .collect();
    let column = |c: usize| -> Vec<f64> { samples.iter().map(|s| s[c]).collect() };
    let (p0, e0) = mean_and_stderr(&column(0));
    let (pp, ep) = mean_and_stderr(&column(1));
    let (pi, ei) = mean_and_stderr(&column(2));
    let (dre, ere) = mean_and_stderr(&column(3));
    let (dim, eim) = mean_and_stderr(&column(4));
    Ok(NoisyProbabilities {
        mean: ProtocolProbabilities {
            p0,
            pp,
            pi,
            t: to_f64(t),
        },
        stderr: [e0, ep, ei],
        direct: Complex::new(dre, dim),
        direct_stderr: Complex::new(ere, eim),
    })
}

/// Indirect real part from averaged probabilities, with a delta-method error.
///
/// Returns `(value, stderr, consistent)`; `consistent` is false when the
/// radicand is negative by more than three standard errors.
pub fn noisy_indirect(p: &NoisyProbabilities) -> (f64, f64, bool) {
    let im = p.direct.im;
    let value = infer_indirect(&p.mean, im, p.direct.re);
    let rad = indirect_radicand(&p.mean, im);
    let rad_err = (p.stderr[0].powi(2) + (2.0 * im * p.direct_stderr.im).powi(2)).sqrt();
    let consistent = rad >= -3.0 * rad_err;
    let stderr = if value.abs() > 0.0 {
        rad_err / (2.0 * value.abs())
    } else {
        rad_err.sqrt()
    };
    (value, stderr, consistent)
}

/// Least-squares polynomial of degree `order` through `(gammas, values)`, evaluated at 0.
pub fn extrapolate(gammas: &[f64], values: &[f64], order: usize) -> Result<f64> {
    let zeros = vec![0.0; values.len()];
    extrapolate_with_error(gammas, values, &zeros, order).map(|(v, _)| v)
}

/// As [`extrapolate`], also propagating independent standard errors of the values
/// to the intercept.
pub fn extrapolate_with_error(gammas: &[f64], values: &[f64], stderrs: &[f64], order: usize) -> Result<(f64, f64)> {
    if gammas.len() != values.len() || stderrs.len() != values.len() {
        return Err(domain("extrapolation needs one value per rate"));
    }
    if gammas.len() < order + 1 {
        return Err(domain(format!(
            "order-{order} extrapolation needs at least {} points, got {}",
            order + 1,
            gammas.len()
        )));
    }
    let scale = gammas.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let a = DMatrix::from_fn(gammas.len(), order + 1, |r, c| (gammas[r] / scale).powi(c as i32));
    let pinv = a
        .pseudo_inverse(1e-12)
        .map_err(|e| domain(format!("extrapolation fit failed: {e}")))?;
    let coef = &pinv * DVector::from_column_slice(values);
    let var: f64 = (0..values.len()).map(|i| (pinv[(0, i)] * stderrs[i]).powi(2)).sum();
    Ok((coef[0], var.sqrt()))
}

/// Weighted combination of direct and indirect extrapolations.
///
/// Each branch is weighted by the squared spread of the other branch between
/// its linear and cubic extrapolations.
pub fn weighted_mitigate(dir1: f64, dir3: f64, ind1: f64, ind3: f64) -> f64 {
    weighted_mitigate_with(dir1, dir3, ind1, ind3, dir3, ind3)
}

/// As [`weighted_mitigate`] with explicit representative values.
pub fn weighted_mitigate_with(dir1: f64, dir3: f64, ind1: f64, ind3: f64, dir_rep: f64, ind_rep: f64) -> f64 {
    let w_dir = (ind1 - ind3).powi(2);
    let w_ind = (dir1 - dir3).powi(2);
    let total = w_dir + w_ind;
    if total == 0.0 {
        0.5 * (dir_rep + ind_rep)
    } else {
        (w_dir * dir_rep + w_ind * ind_rep) / total
    }
}

/// Sweep data and extrapolations for one overlap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MitigationRecord {
    pub delta_phi: f64,
    pub gammas: Vec<f64>,
    /// Direct real part and its standard error per rate.
    pub values_direct: Vec<(f64, f64)>,
    pub values_indirect: Vec<(f64, f64)>,
    /// Direct imaginary part per rate.
    pub values_imag: Vec<(f64, f64)>,
    pub extrap_dir_1: f64,
    pub extrap_dir_3: f64,
    pub extrap_ind_1: f64,
    pub extrap_ind_3: f64,
    pub extrap_imag: f64,
    /// Propagated standard errors of `extrap_dir_1`, `extrap_dir_3`, `extrap_ind_1`, `extrap_ind_3`.
    pub extrap_errors: [f64; 4],
    pub combined: f64,
    /// Sweep points whose indirect radicand was inconsistent.
    pub inconsistent: usize,
}

/// Runs the γ sweep for one probe set at phase `t` and combines the branches.
pub fn mitigate_overlap<T: Real>(
    probes: &ProbeSet<T>,
    evolver: &NoisyEvolver<T>,
    t: T,
    config: &NoiseConfig,
) -> Result<MitigationRecord> {
    config.validate()?;
    let gammas = config.accessible_sweep();
    if gammas.len() < 4 {
        return Err(domain(
            "mitigation needs at least four accessible sweep rates for the cubic fit",
        ));
    }
    let mut record = MitigationRecord {
        delta_phi: to_f64(t),
        gammas: gammas.clone(),
        values_direct: Vec::new(),
        values_indirect: Vec::new(),
        values_imag: Vec::new(),
        extrap_dir_1: 0.0,
        extrap_dir_3: 0.0,
        extrap_ind_1: 0.0,
        extrap_ind_3: 0.0,
        extrap_imag: 0.0,
        extrap_errors: [0.0; 4],
        combined: 0.0,
        inconsistent: 0,
    };
    for &g in &gammas {
        let p = noisy_probabilities(probes, evolver, t, lit(g), config.n_trajectories, config.master_seed)?;
        let (ind, ind_err, ok) = noisy_indirect(&p);
        record.values_direct.push((p.direct.re, p.direct_stderr.re));
        record.values_imag.push((p.direct.im, p.direct_stderr.im));
        record.values_indirect.push((ind, ind_err));
        if !ok {
            record.inconsistent += 1;
        }
    }
    let first = |v: &[(f64, f64)]| v.iter().map(|x| x.0).collect::<Vec<_>>();
    let second = |v: &[(f64, f64)]| v.iter().map(|x| x.1).collect::<Vec<_>>();
    let (dir, dir_err) = (first(&record.values_direct), second(&record.values_direct));
    let (ind, ind_err) = (first(&record.values_indirect), second(&record.values_indirect));
    let (d1, e_d1) = extrapolate_with_error(&gammas, &dir, &dir_err, 1)?;
    let (d3, e_d3) = extrapolate_with_error(&gammas, &dir, &dir_err, 3)?;
    let (i1, e_i1) = extrapolate_with_error(&gammas, &ind, &ind_err, 1)?;
    let (i3, e_i3) = extrapolate_with_error(&gammas, &ind, &ind_err, 3)?;
    record.extrap_dir_1 = d1;
    record.extrap_dir_3 = d3;
    record.extrap_ind_1 = i1;
    record.extrap_ind_3 = i3;
    record.extrap_errors = [e_d1, e_d3, e_i1, e_i3];
    record.extrap_imag = extrapolate(&gammas, &first(&record.values_imag), config.representative_order)?;
    let (dir_rep, ind_rep) = if config.representative_order == 1 {
        (record.extrap_dir_1, record.extrap_ind_1)
    } else {
        (record.extrap_dir_3, record.extrap_ind_3)
    };
    record.combined = weighted_mitigate_with(
        record.extrap_dir_1,
        record.extrap_dir_3,
        record.extrap_ind_1,
        record.extrap_ind_3,
        dir_rep,
        ind_rep,
    );
    Ok(record)
}

/// Which noisy estimate a [`NoisyOverlaps`] provider returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoisyEstimate {
    /// Direct inference at the single rate `config.gamma`.
    Direct,
    /// Indirect real part at `config.gamma`.
    Indirect,
    /// Zero-noise extrapolated and weighted over the sweep.
    Mitigated,
}

/// Overlap provider running the protocol on dephased trajectories.
#[derive(Debug, Clone)]
pub struct NoisyOverlaps<T: Real> {
    evolver: NoisyEvolver<T>,
    norm_probes: ProbeSet<T>,
    energy_probes: ProbeSet<T>,
    energy_scale: T,
    config: NoiseConfig,
    estimate: NoisyEstimate,
}

impl<T: Real> NoisyOverlaps<T> {
    pub fn new(
        backend: EvolutionBackend<T>,
        psi0: &StateVector<T>,
        psi_r: &StateVector<T>,
        config: NoiseConfig,
        estimate: NoisyEstimate,
    ) -> Result<Self> {
        config.validate()?;
        let op = backend.operator();
        let norm_probes = build_probes(op, psi0, psi_r)?;
        let h_psi0 = op.apply(psi0);
        let energy_scale = norm(&h_psi0);
        let energy_probes = build_cross_probes(op, psi0, &StateVector::new(h_psi0)?, psi_r)?;
        Ok(Self {
            evolver: NoisyEvolver::new(backend)?,
            norm_probes,
            energy_probes,
            energy_scale,
            config,
            estimate,
        })
    }

    pub fn probes(&self, kind: OverlapKind) -> &ProbeSet<T> {
        match kind {
            OverlapKind::Norm => &self.norm_probes,
            OverlapKind::Energy => &self.energy_probes,
        }
    }

    pub fn config(&self) -> &NoiseConfig {
        &self.config
    }

    pub fn evolver(&self) -> &NoisyEvolver<T> {
        &self.evolver
    }

    /// Full sweep record at `|δφ|`.
    pub fn record(&self, delta_phi: T, kind: OverlapKind) -> Result<MitigationRecord> {
        mitigate_overlap(self.probes(kind), &self.evolver, delta_phi.abs(), &self.config)
    }
}

impl<T: Real> OverlapProvider<T> for NoisyOverlaps<T> {
    fn dim(&self) -> usize {
        self.evolver.backend.dim()
    }

    fn overlap(&self, delta_phi: T, kind: OverlapKind) -> Result<Complex<T>> {
        let t = delta_phi.abs();
        let o = match self.estimate {
            NoisyEstimate::Direct | NoisyEstimate::Indirect => {
                let p = noisy_probabilities(
                    self.probes(kind),
                    &self.evolver,
                    t,
                    lit(self.config.gamma),
                    self.config.n_trajectories,
                    self.config.master_seed,
                )?;
                let re = if self.estimate == NoisyEstimate::Direct {
                    p.direct.re
                } else {
                    noisy_indirect(&p).0
                };
                Complex::new(re, p.direct.im)
            }
            NoisyEstimate::Mitigated => {
                let r = self.record(t, kind)?;
                Complex::new(r.combined, r.extrap_imag)
            }
        };
        let o = Complex::new(lit::<T>(o.re), lit::<T>(o.im));
        let o = if delta_phi < T::zero() { o.conj() } else { o };
        Ok(match kind {
            OverlapKind::Norm => o,
            OverlapKind::Energy => o * Complex::new(self.energy_scale, T::zero()),
        })
    }
}
