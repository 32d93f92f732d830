//! Reference-state overlap measurement.
//!
//! With a known eigenstate `psi_R` orthogonal to the initial state, the
//! complex overlap `O = <psi0|U(t)|psi0>` follows from three probabilities:
//!
//! ```text
//! p0 = |<psi0|U psi0>|^2,  pp = |<psi+|U psi+>|^2,  pi = |<psi_i|U psi+>|^2
//! psi+ = (psi_R + psi0)/sqrt2,  psi_i = (psi_R - i psi0)/sqrt2
//! ```
//!
//! The sign of the `i psi0` component of `psi_i` is the one for which the
//! inversion formulas of [`infer_direct`] return `O` itself; the opposite sign
//! returns `O*` when the reference energy vanishes and neither in general.
//!
//! A cross variant measures `<a|U|b>` for two different states orthogonal to
//! `psi_R`, using `(psi_R + b)/sqrt2` as the evolved probe and `a` in the bras.
//! The estimator uses it with `a = psi0`, `b = H psi0 / ||H psi0||`.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{domain, validation, Result};
use crate::estimator::{OverlapKind, OverlapProvider};
use crate::operator::HermitianOperator;
use crate::propagator::EvolutionBackend;
use crate::rng::stream_rng;
use crate::scalar::{from_usize, inner, lit, norm, to_f64, CVector, Real};
use crate::state::StateVector;

/// Tolerance on `||H psi_R - lambda_R psi_R||` and `|<psi_R|psi0>|`.
pub const EIGENSTATE_TOL: f64 = 1e-10;

/// Probe states for one (bra, ket) pair.
#[derive(Debug, Clone)]
pub struct ProbeSet<T: Real> {
    /// Bra state `a` (the initial state in the standard protocol).
    pub psi0: StateVector<T>,
    /// Ket state `b`; equal to `psi0` in the standard protocol.
    pub ket: StateVector<T>,
    pub psi_r: StateVector<T>,
    pub lambda_r: T,
    /// `(psi_R + b)/sqrt2`, the evolved probe.
    pub psi_plus: StateVector<T>,
    /// `(psi_R + a)/sqrt2`.
    pub bra_plus: StateVector<T>,
    /// `(psi_R - i a)/sqrt2`.
    pub psi_i: StateVector<T>,
}

/// The three measured probabilities at phase `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolProbabilities<T> {
    pub p0: T,
    pub pp: T,
    pub pi: T,
    pub t: T,
}

fn check_reference<T: Real>(op: &HermitianOperator<T>, psi_r: &StateVector<T>) -> Result<T> {
    if op.dim() != psi_r.dim() {
        return Err(domain("reference state dimension does not match the operator"));
    }
    let h_r = op.apply(psi_r);
    let lambda_r = inner(psi_r, &h_r).re;
    let residual = norm(&(h_r - psi_r.amplitudes() * Complex::new(lambda_r, T::zero())));
    if to_f64(residual) > EIGENSTATE_TOL {
        return Err(validation(format!(
            "reference state is not an eigenstate (residual {residual:e})"
        )));
    }
    Ok(lambda_r)
}

fn check_orthogonal<T: Real>(psi_r: &StateVector<T>, s: &CVector<T>, what: &str) -> Result<()> {
    let o = inner(psi_r, s).norm_sqr().sqrt();
    if to_f64(o) > EIGENSTATE_TOL {
        return Err(validation(format!(
            "reference state is not orthogonal to the {what} (overlap {o:e})"
        )));
    }
    Ok(())
}

fn superpose<T: Real>(r: &StateVector<T>, s: &CVector<T>, weight: Complex<T>) -> Result<StateVector<T>> {
    StateVector::new(r.amplitudes() + s * weight)
}

/// Standard probe set for `<psi0|U|psi0>`.
pub fn build_probes<T: Real>(
    op: &HermitianOperator<T>,
    psi0: &StateVector<T>,
    psi_r: &StateVector<T>,
) -> Result<ProbeSet<T>> {
    build_cross_probes(op, psi0, psi0, psi_r)
}

/// Probe set for `<a|U|b>`.
pub fn build_cross_probes<T: Real>(
    op: &HermitianOperator<T>,
    a: &StateVector<T>,
    b: &StateVector<T>,
    psi_r: &StateVector<T>,
) -> Result<ProbeSet<T>> {
    let lambda_r = check_reference(op, psi_r)?;
    if a.dim() != op.dim() || b.dim() != op.dim() {
        return Err(domain("probe state dimension does not match the operator"));
    }
    check_orthogonal(psi_r, a, "initial state")?;
    check_orthogonal(psi_r, b, "ket state")?;
    let one = Complex::new(T::one(), T::zero());
    Ok(ProbeSet {
        psi0: a.clone(),
        ket: b.clone(),
        psi_r: psi_r.clone(),
        lambda_r,
        psi_plus: superpose(psi_r, b, one)?,
        bra_plus: superpose(psi_r, a, one)?,
        psi_i: superpose(psi_r, a, Complex::new(T::zero(), -T::one()))?,
    })
}

/// Exact probabilities after evolving by `t` with `backend`.
pub fn protocol_probabilities<T: Real>(
    probes: &ProbeSet<T>,
    t: T,
    backend: &EvolutionBackend<T>,
) -> Result<ProtocolProbabilities<T>> {
    if !t.is_finite() {
        return Err(domain("evolution phase must be finite"));
    }
    if backend.dim() != probes.psi0.dim() {
        return Err(domain("backend dimension does not match the probes"));
    }
    let ket_t = backend.evolve_vector(t, &probes.ket);
    let plus_t = backend.evolve_vector(t, &probes.psi_plus);
    let clamp = |x: T| x.max(T::zero()).min(T::one());
    Ok(ProtocolProbabilities {
        p0: clamp(inner(&probes.psi0, &ket_t).norm_sqr()),
        pp: clamp(inner(&probes.bra_plus, &plus_t).norm_sqr()),
        pi: clamp(inner(&probes.psi_i, &plus_t).norm_sqr()),
        t,
    })
}

/// Overlap from all three probabilities and the reference energy.
pub fn infer_direct<T: Real>(p: &ProtocolProbabilities<T>, lambda_r: T) -> Complex<T> {
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    let base = (p.p0 + T::one()) * half;
    let a = two * p.pp - base;
    let b = two * p.pi - base;
    let (s, c) = (lambda_r * p.t).sin_cos();
    Complex::new(a * c - b * s, -b * c - a * s)
}

/// `p0 - Im^2`; negative values flag inconsistent noisy inputs.
pub fn indirect_radicand<T: Real>(p: &ProtocolProbabilities<T>, im_o: T) -> T {
    p.p0 - im_o * im_o
}

/// `|Re O| = sqrt(max(0, p0 - Im^2))` with the sign of `sign_hint`.
pub fn infer_indirect<T: Real>(p: &ProtocolProbabilities<T>, im_o: T, sign_hint: T) -> T {
    let magnitude = indirect_radicand(p, im_o).max(T::zero()).sqrt();
    if sign_hint < T::zero() {
        -magnitude
    } else {
        magnitude
    }
}

/// Mean of `n` Bernoulli(`p`) draws.
pub fn sample_probability<T: Real, R: Rng + ?Sized>(p: T, n: usize, rng: &mut R) -> T {
    if n == 0 {
        return p;
    }
    let p = to_f64(p).clamp(0.0, 1.0);
    let hits = Binomial::new(n as u64, p)
        .expect("probability clamped to [0, 1]")
        .sample(rng);
    lit::<T>(hits as f64) / from_usize::<T>(n)
}

/// How the real part is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RealPartMode {
    #[default]
    Direct,
    /// `sqrt(p0 - Im^2)` signed by the direct estimate.
    Indirect,
}

/// Finite-shot sampling of the three probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotConfig {
    pub shots: usize,
    pub seed: u64,
}

/// Overlap provider that runs the reference-state protocol.
#[derive(Debug, Clone)]
pub struct ProtocolOverlaps<T: Real> {
    backend: EvolutionBackend<T>,
    norm_probes: ProbeSet<T>,
    energy_probes: ProbeSet<T>,
    /// `||H psi0||`.
    energy_scale: T,
    mode: RealPartMode,
    shots: Option<ShotConfig>,
}

impl<T: Real> ProtocolOverlaps<T> {
    pub fn new(backend: EvolutionBackend<T>, psi0: &StateVector<T>, psi_r: &StateVector<T>) -> Result<Self> {
        let op = backend.operator();
        let norm_probes = build_probes(op, psi0, psi_r)?;
        let h_psi0 = op.apply(psi0);
        let energy_scale = norm(&h_psi0);
        let energy_probes = build_cross_probes(op, psi0, &StateVector::new(h_psi0)?, psi_r)?;
        Ok(Self {
            backend,
            norm_probes,
            energy_probes,
            energy_scale,
            mode: RealPartMode::Direct,
            shots: None,
        })
    }

    pub fn with_mode(mut self, mode: RealPartMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_shots(mut self, shots: Option<ShotConfig>) -> Self {
        self.shots = shots;
        self
    }

    pub fn probes(&self, kind: OverlapKind) -> &ProbeSet<T> {
        match kind {
            OverlapKind::Norm => &self.norm_probes,
            OverlapKind::Energy => &self.energy_probes,
        }
    }

    pub fn probabilities(&self, t: T, kind: OverlapKind) -> Result<ProtocolProbabilities<T>> {
        let mut p = protocol_probabilities(self.probes(kind), t, &self.backend)?;
        if let Some(cfg) = self.shots {
            let stream = match kind {
                OverlapKind::Norm => 0,
                OverlapKind::Energy => 1,
            };
            let mut rng = stream_rng(cfg.seed, stream, to_f64(t).to_bits());
            p.p0 = sample_probability(p.p0, cfg.shots, &mut rng);
            p.pp = sample_probability(p.pp, cfg.shots, &mut rng);
            p.pi = sample_probability(p.pi, cfg.shots, &mut rng);
        }
        Ok(p)
    }
}

impl<T: Real> OverlapProvider<T> for ProtocolOverlaps<T> {
    fn dim(&self) -> usize {
        self.norm_probes.psi0.dim()
    }

    fn overlap(&self, delta_phi: T, kind: OverlapKind) -> Result<Complex<T>> {
        let probes = self.probes(kind);
        let p = self.probabilities(delta_phi, kind)?;
        let direct = infer_direct(&p, probes.lambda_r);
        let o = match self.mode {
            RealPartMode::Direct => direct,
            RealPartMode::Indirect => Complex::new(infer_indirect(&p, direct.im, direct.re), direct.im),
        };
        Ok(match kind {
            OverlapKind::Norm => o,
            OverlapKind::Energy => o * Complex::new(self.energy_scale, T::zero()),
        })
    }
}
