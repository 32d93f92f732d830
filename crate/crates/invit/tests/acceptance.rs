//! Acceptance criteria, one PASS/FAIL/SKIP line each.
//!
//! Runs without the libtest harness so the summary lines are always printed.
//! The process exits non-zero when any criterion fails.

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use num_complex::Complex;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use invit_core::boson::{build_bose_hubbard, correlation_operator, mott_state, Boundary, FockBasis};
use invit_core::estimator::{
    estimate_energy, estimate_observable, ideal_iterate, symmetrize, OverlapKind, OverlapProvider,
};
use invit_core::noise::{mc_trajectory, noisy_probabilities, NoisyEvolver};
use invit_core::pauli::{build_h2, load_pauli_sum, PauliAxis, H2_HF_BITS, H2_SHIFT};
use invit_core::protocol::{build_probes, infer_direct, infer_indirect, protocol_probabilities};
use invit_core::scalar::{inner, CMatrix, CVector};
use invit_core::series::{exact_inverse_power, materialize_inverse, normalization_constant, trace_distance};
use invit_core::{
    build_series, dedup_phases, BoseHubbardParams, EvolutionBackend, ExactOverlaps, GridParams, HermitianOperator,
    PauliSum, PauliTerm, StateVector, TrotterBackend,
};

const CHEMICAL_PRECISION: f64 = 1.6e-3;
const BEH2_ENV: &str = "INVIT_BEH2_PATH";
const BEH2_HF_BITS: [u8; 8] = [1, 1, 0, 0, 0, 0, 0, 0];

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn within_time(v: Verdict, took: Duration, limit: Duration) -> Verdict {
    match v {
        Verdict::Pass(d) if took > limit => Verdict::Fail(format!("{d}; took {took:.2?}, limit {limit:.0?}")),
        other => other,
    }
}

fn h2() -> (PauliSum, HermitianOperator, StateVector) {
    let pauli = build_h2::<f64>();
    let op = pauli.to_dense().unwrap().shift(H2_SHIFT);
    (pauli, op, StateVector::from_bits(&H2_HF_BITS).unwrap())
}

fn delta_lambda(op: &HermitianOperator, psi0: &StateVector, grid: &GridParams) -> f64 {
    let provider = ExactOverlaps::new(EvolutionBackend::exact(op.clone()), psi0.clone()).unwrap();
    let ledger = dedup_phases(&build_series(grid).unwrap());
    estimate_energy(op, &ledger, &provider).unwrap().lambda_est - op.min_eigenvalue()
}

fn c1_ideal_iteration() -> Verdict {
    let (_, op, hf) = h2();
    let gs = op.min_eigenvalue();
    let worst = (2..=14)
        .map(|k| (ideal_iterate(&op, &hf, k).unwrap().energy - gs).abs())
        .fold(0.0, f64::max);
    verdict(
        worst < CHEMICAL_PRECISION,
        format!("max |lambda_k - lambda_gs| over k = 2..14 is {worst:.2e}"),
    )
}

fn c2_approximate_estimator() -> Verdict {
    let (_, op, hf) = h2();
    let deltas: Vec<f64> = (2..=10)
        .map(|k| delta_lambda(&op, &hf, &GridParams::from_phi_max(k, 30, 30, 1.35, 1.0).unwrap()).abs())
        .collect();
    let best = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let coarse = delta_lambda(&op, &hf, &GridParams::from_phi_max(4, 30, 30, 0.3, 1.0).unwrap()).abs();
    let fine = deltas[2];
    verdict(
        best < CHEMICAL_PRECISION && fine < coarse,
        format!("best |dlambda| over k = 2..10 is {best:.2e}; k = 4: {fine:.2e} (1.35) vs {coarse:.2e} (0.3)"),
    )
}

fn c3_trace_distance() -> Verdict {
    let (_, op, _) = h2();
    let exact = exact_inverse_power(&op, 4).unwrap();
    let dists: Vec<f64> = [0.3, 0.35, 0.6, 0.95, 1.35]
        .iter()
        .map(|&phi| {
            let s = build_series(&GridParams::from_phi_max(4, 30, 30, phi, 1.0).unwrap()).unwrap();
            trace_distance(&exact, &materialize_inverse(&s, &op).unwrap()).unwrap()
        })
        .collect();
    verdict(
        dists.windows(2).all(|w| w[1] < w[0]),
        format!(
            "trace distances {:?}",
            dists.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>()
        ),
    )
}

fn kappa(op: &HermitianOperator) -> f64 {
    op.max_eigenvalue() / op.min_eigenvalue()
}

fn beh2() -> Option<(HermitianOperator, StateVector)> {
    let path = std::env::var(BEH2_ENV).ok()?;
    let pauli: PauliSum = load_pauli_sum(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    Some((
        pauli.to_dense().unwrap().shift(H2_SHIFT),
        StateVector::from_bits(&BEH2_HF_BITS).unwrap(),
    ))
}

fn c4_condition_numbers() -> Verdict {
    let (_, op, _) = h2();
    let k_h2 = kappa(&op);
    let h2_ok = (k_h2 / 3.38 - 1.0).abs() < 0.02;
    match beh2() {
        None => verdict(
            h2_ok,
            format!("H2 kappa = {k_h2:.3}; BeH2 part SKIPPED, set {BEH2_ENV} to the BeH2 Pauli file"),
        ),
        Some((op, _)) => {
            let k_beh2 = kappa(&op);
            verdict(
                h2_ok && (k_beh2 / 39.2 - 1.0).abs() < 0.05,
                format!("H2 kappa = {k_h2:.3}, BeH2 kappa = {k_beh2:.2}"),
            )
        }
    }
}

fn c5_beh2_first_step() -> Verdict {
    match beh2() {
        None => Verdict::Skip(format!("needs the BeH2 Pauli file in {BEH2_ENV}")),
        Some((op, hf)) => {
            let d = (ideal_iterate(&op, &hf, 1).unwrap().energy - op.min_eigenvalue()).abs();
            verdict(d < CHEMICAL_PRECISION, format!("|lambda_1 - lambda_gs| = {d:.2e}"))
        }
    }
}

/// Composite Simpson rule for `∫_0^∞ u^k e^{-u^2/2} du`, truncated at u = 40.
fn moment(k: u32) -> f64 {
    let n = 200_000;
    let h = 40.0 / n as f64;
    let f = |u: f64| u.powi(k as i32) * (-0.5 * u * u).exp();
    let mut s = f(0.0) + f(40.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

fn c6_scalar_inverse() -> Verdict {
    let norm_err = (1..=4)
        .map(|k| (normalization_constant::<f64>(k).unwrap() * moment(k) - 1.0).abs())
        .fold(0.0, f64::max);
    let mut parts = vec![format!("N_k quadrature err {norm_err:.1e}")];
    let mut ok = norm_err < 1e-10;
    for x in [0.5, 1.0, 2.0] {
        let worst = (1..=4)
            .map(|k| {
                let s = build_series(&GridParams::new(k, 60, 60, 0.1, 0.1).unwrap()).unwrap();
                (s.evaluate_scalar(x).re * x.powi(k as i32) - 1.0).abs()
            })
            .fold(0.0, f64::max);
        ok &= worst < 0.01;
        parts.push(format!("x = {x}: max rel err {worst:.2e}"));
    }
    verdict(ok, parts.join("; "))
}

fn c7_phase_ledger() -> Verdict {
    let (_, op, hf) = h2();
    let series = build_series(&GridParams::new(2, 5, 5, 0.5, 0.5).unwrap()).unwrap();
    let ledger = dedup_phases(&series);
    let unique = ledger.rows.len();

    let overlap = |phi: f64| inner(&hf, &op.evolve_vector(phi, &hf));
    let h_overlap = |phi: f64| inner(&hf, &op.apply(&op.evolve_vector(phi, &hf)));
    let (mut den, mut num) = (Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
    for a in series.entries() {
        for b in series.entries() {
            let w = b.coeff.conj() * a.coeff;
            den += w * overlap(a.phase - b.phase);
            num += w * h_overlap(a.phase - b.phase);
        }
    }
    let provider = ExactOverlaps::new(EvolutionBackend::exact(op.clone()), hf.clone()).unwrap();
    let report = estimate_energy(&op, &ledger, &provider).unwrap();
    let err_den = (report.norm_value - den.re).abs();
    let err_num = (report.numerator - num.re).abs();
    verdict(
        unique == 35 && err_den < 1e-12 && err_num < 1e-12,
        format!("{unique} nonzero |dphi| values; ledger vs double sum: {err_den:.1e} (norm), {err_num:.1e} (energy)"),
    )
}

fn c8_protocol_identity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2019);
    let n = 16;
    let reference = StateVector::basis(n, n - 1).unwrap();
    let (mut worst_direct, mut worst_indirect) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        // Random Hermitian operator with the reference as an eigenstate.
        let mut m = CMatrix::<f64>::zeros(n, n);
        for i in 0..n - 1 {
            for j in i..n - 1 {
                let re = rng.random::<f64>() - 0.5;
                let im = if i == j { 0.0 } else { rng.random::<f64>() - 0.5 };
                m[(i, j)] = Complex::new(re, im);
                m[(j, i)] = Complex::new(re, -im);
            }
        }
        m[(n - 1, n - 1)] = Complex::new(2.0 * rng.random::<f64>() - 1.0, 0.0);
        let op = HermitianOperator::from_matrix(m).unwrap();
        let mut amps = StateVector::random(n, &mut rng).into_inner();
        amps[n - 1] = Complex::new(0.0, 0.0);
        let psi0 = StateVector::new(amps).unwrap();
        let t = 20.0 * (rng.random::<f64>() - 0.5);

        let backend = EvolutionBackend::exact(op.clone());
        let probes = build_probes(&op, &psi0, &reference).unwrap();
        let p = protocol_probabilities(&probes, t, &backend).unwrap();
        let exact = ExactOverlaps::new(backend, psi0)
            .unwrap()
            .overlap(t, OverlapKind::Norm)
            .unwrap();
        let direct = infer_direct(&p, probes.lambda_r);
        let indirect = infer_indirect(&p, direct.im, direct.re);
        worst_direct = worst_direct.max((direct - exact).norm());
        worst_indirect = worst_indirect.max((indirect.abs() - direct.re.abs()).abs());
    }
    verdict(
        worst_direct < 1e-10 && worst_indirect < 1e-10,
        format!("100 instances: direct err {worst_direct:.1e}, |indirect| vs |Re direct| {worst_indirect:.1e}"),
    )
}

fn c9_trotter() -> Verdict {
    let (pauli, op, hf) = h2();
    let exact = EvolutionBackend::exact(op.clone());
    let trotter = |n: usize| EvolutionBackend::trotter(op.clone(), TrotterBackend::from_pauli(&pauli, &op, n).unwrap());
    let fifteen = trotter(15);
    let mut worst = 0.0f64;
    for phi in [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0] {
        let ledger = dedup_phases(&build_series(&GridParams::from_phi_max(4, 30, 30, phi, 1.0).unwrap()).unwrap());
        let estimate = |b: &EvolutionBackend| {
            let provider = ExactOverlaps::new(b.clone(), hf.clone()).unwrap();
            estimate_energy(&op, &ledger, &provider).unwrap().lambda_est
        };
        worst = worst.max((estimate(&fifteen) - estimate(&exact)).abs());
    }
    let target = exact.evolve_vector(1.0, hf.amplitudes());
    let err = |n: usize| (trotter(n).evolve_vector(1.0, hf.amplitudes()) - &target).norm();
    let ratio = err(4) / err(8);
    verdict(
        worst < 1e-3 && (ratio / 4.0 - 1.0).abs() <= 0.25,
        format!("max |trotter15 - exact| at k = 4 is {worst:.2e}; error ratio n=4/n=8 at phi=1 is {ratio:.3}"),
    )
}

fn z_matrix(q: usize) -> CMatrix<f64> {
    CMatrix::from_fn(4, 4, |r, c| match (r == c, (r >> q) & 1) {
        (false, _) => Complex::new(0.0, 0.0),
        (true, 0) => Complex::new(1.0, 0.0),
        (true, _) => Complex::new(-1.0, 0.0),
    })
}

/// RK4 integration of `drho/dt = -i[H, rho] + gamma sum_j (Z_j rho Z_j - rho)` on two qubits.
fn lindblad(h: &CMatrix<f64>, rho0: &CMatrix<f64>, gamma: f64, t: f64, steps: usize) -> CMatrix<f64> {
    let zs = [z_matrix(0), z_matrix(1)];
    let i = Complex::new(0.0, 1.0);
    let rhs = |rho: &CMatrix<f64>| {
        let mut out = (h * rho - rho * h) * (-i);
        for z in &zs {
            out += (z * rho * z - rho) * Complex::new(gamma, 0.0);
        }
        out
    };
    let dt = Complex::new(t / steps as f64, 0.0);
    let half = dt * 0.5;
    let two = Complex::new(2.0, 0.0);
    let mut rho = rho0.clone();
    for _ in 0..steps {
        let k1 = rhs(&rho);
        let k2 = rhs(&(&rho + &k1 * half));
        let k3 = rhs(&(&rho + &k2 * half));
        let k4 = rhs(&(&rho + &k3 * dt));
        rho += (k1 + k2 * two + k3 * two + k4) * (dt / 6.0);
    }
    rho
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn c10_noise() -> Verdict {
    let mut parts = Vec::new();

    let (_, op, hf) = h2();
    let backend = EvolutionBackend::exact(op.clone());
    let evolver = NoisyEvolver::new(backend.clone()).unwrap();
    let vacuum = StateVector::from_bits(&[1, 1, 1, 1]).unwrap();
    let probes = build_probes(&op, &hf, &vacuum).unwrap();
    let t = 0.68 * TAU;
    let exact = inner(&hf, &backend.evolve_vector(t, &hf));
    let p = noisy_probabilities(&probes, &evolver, t, 1e-4, 5000, 1).unwrap();
    let z_re = (p.direct.re - exact.re).abs() / p.direct_stderr.re.max(1e-300);
    let z_im = (p.direct.im - exact.im).abs() / p.direct_stderr.im.max(1e-300);
    let weak_ok = (p.direct.re - exact.re).abs() <= 3.0 * p.direct_stderr.re + 1e-12
        && (p.direct.im - exact.im).abs() <= 3.0 * p.direct_stderr.im + 1e-12;
    parts.push(format!("weak noise |z| = {z_re:.2} (re), {z_im:.2} (im)"));

    let toy = PauliSum::new(
        2,
        vec![
            PauliTerm::new(0.7, [(0, PauliAxis::X)]).unwrap(),
            PauliTerm::new(0.4, [(0, PauliAxis::Z), (1, PauliAxis::Z)]).unwrap(),
            PauliTerm::new(0.5, [(1, PauliAxis::X)]).unwrap(),
            PauliTerm::new(0.2, [(1, PauliAxis::Z)]).unwrap(),
        ],
        "J",
    )
    .unwrap()
    .to_dense()
    .unwrap();
    let toy_evolver = NoisyEvolver::new(EvolutionBackend::exact(toy.clone())).unwrap();
    let psi = StateVector::new(CVector::from_vec(vec![
        Complex::new(1.0, 0.0),
        Complex::new(1.0, 0.0),
        Complex::new(0.0, 1.0),
        Complex::new(0.0, 0.0),
    ]))
    .unwrap();
    let (gamma, time) = (0.4, 2.0);
    let rho = lindblad(
        toy.matrix(),
        &(psi.amplitudes() * psi.amplitudes().adjoint()),
        gamma,
        time,
        4000,
    );
    let oracle = inner(&psi, &(&rho * psi.amplitudes())).re;
    let samples: Vec<f64> = (0..20_000u64)
        .map(|i| inner(&psi, &mc_trajectory(&toy_evolver, &psi, time, gamma, i).unwrap()).norm_sqr())
        .collect();
    let (mean, se) = mean_stderr(&samples);
    let lindblad_ok = (mean - oracle).abs() < 3.0 * se;
    parts.push(format!(
        "Lindblad fidelity {oracle:.4} vs trajectories {mean:.4} +- {se:.1e}"
    ));

    let table = invit::run(&invit::bundled::resolve("figS3").unwrap()).unwrap();
    let k = table.column_f64("k").unwrap();
    let delta = table.column_f64("delta_lambda").unwrap();
    let strategy: Vec<&str> = table.rows.iter().map(|r| r[1].as_str()).collect();
    let lookup = |kk: f64, name: &str| {
        (0..k.len())
            .find(|&i| k[i] == kk && strategy[i] == name)
            .map(|i| delta[i].abs())
            .unwrap_or(f64::NAN)
    };
    let mut mitigation_ok = true;
    for kk in 1..=5 {
        let (m, ind) = (lookup(kk as f64, "mitigated"), lookup(kk as f64, "indirect"));
        mitigation_ok &= m < ind;
        parts.push(format!("k = {kk}: mitigated {m:.2e} vs indirect {ind:.2e}"));
    }
    verdict(weak_ok && lindblad_ok && mitigation_ok, parts.join("; "))
}

fn c11_bose_hubbard() -> Verdict {
    let basis = FockBasis::new(5, 5, Some(5)).unwrap();
    let grid = GridParams::new(1, 40, 40, 0.075, 0.075).unwrap();
    let instance = |j: f64| {
        let mut p = BoseHubbardParams {
            j,
            u: 1.0,
            mu: 0.5,
            e0: 0.0,
        };
        p.e0 = invit_core::boson::positive_shift(&basis, &p, Boundary::Open, 0.5).unwrap();
        let op = build_bose_hubbard(&basis, &p, Boundary::Open).unwrap();
        (op, mott_state(&basis).unwrap())
    };
    let curve = |j: f64| -> Vec<f64> {
        let (op, psi0) = instance(j);
        (1..=14)
            .map(|k| delta_lambda(&op, &psi0, &grid.with_k(k)).abs())
            .collect()
    };
    let weak = curve(0.01);
    let strong = curve(0.2);
    let ordered = weak.iter().zip(&strong).all(|(a, b)| a < b);

    let (op, psi0) = instance(0.1);
    let a = correlation_operator::<f64>(&basis, 2, 1).unwrap();
    let gs = op.ground_state();
    let exact = inner(&gs, &(symmetrize(&a) * gs.amplitudes())).re;
    let provider = ExactOverlaps::new(EvolutionBackend::exact(op.clone()), psi0).unwrap();
    let rel = |k: u32| {
        let ledger = dedup_phases(&build_series(&grid.with_k(k)).unwrap());
        (estimate_observable(&a, &ledger, &provider).unwrap() / exact - 1.0).abs()
    };
    let (first, last) = (rel(1), rel(14));
    verdict(
        weak[0] < 1e-2 && ordered && last < 0.05 && last < first,
        format!(
            "J = 0.01 dlambda(k=1) = {:.2e}; below J = 0.2 at every k: {ordered}; correlator rel err {first:.2e} (k=1) -> {last:.2e} (k=14)",
            weak[0]
        ),
    )
}

/// Title, check and optional runtime limit in seconds.
type Criterion = (&'static str, fn() -> Verdict, Option<u64>);

fn main() {
    let criteria: [Criterion; 11] = [
        ("H2 ideal iteration", c1_ideal_iteration, Some(1)),
        ("H2 approximate estimator", c2_approximate_estimator, Some(30)),
        ("trace-distance monotonicity", c3_trace_distance, None),
        ("condition numbers", c4_condition_numbers, None),
        ("BeH2 ideal iteration", c5_beh2_first_step, None),
        ("scalar-inverse oracle", c6_scalar_inverse, Some(5)),
        ("phase ledger", c7_phase_ledger, None),
        ("overlap protocol identity", c8_protocol_identity, None),
        ("Trotter", c9_trotter, None),
        ("noise and mitigation", c10_noise, Some(300)),
        ("Bose-Hubbard", c11_bose_hubbard, Some(120)),
    ];
    let mut failed = 0;
    for (i, (title, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut v = check();
        let took = start.elapsed();
        if let Some(secs) = limit {
            v = within_time(v, took, Duration::from_secs(*secs));
        }
        let (tag, detail) = match v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("{tag} [{:>2}] {title} ({took:.2?}): {detail}", i + 1);
    }
    println!("acceptance: {} criteria, {failed} failed", criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
