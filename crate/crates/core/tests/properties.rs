use num_complex::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use invit_core::estimator::{estimate_energy, OverlapKind, OverlapProvider};
use invit_core::pauli::PauliAxis;
use invit_core::protocol::{build_probes, infer_direct, infer_indirect, protocol_probabilities};
use invit_core::scalar::CMatrix;
use invit_core::series::{build_series, dedup_phases, trace_distance, weight_histogram};
use invit_core::{EvolutionBackend, ExactOverlaps, GridParams, HermitianOperator, PauliSum, PauliTerm, StateVector};

fn axis(i: u8) -> PauliAxis {
    match i % 3 {
        0 => PauliAxis::X,
        1 => PauliAxis::Y,
        _ => PauliAxis::Z,
    }
}

/// Random 3-qubit Pauli sum.
fn pauli_sum() -> impl Strategy<Value = PauliSum> {
    prop::collection::vec((-1.0f64..1.0, prop::collection::vec(0u8..4, 3)), 1..8).prop_map(|raw| {
        let terms = raw
            .into_iter()
            .map(|(c, axes)| {
                let factors: Vec<_> = axes
                    .iter()
                    .enumerate()
                    .filter(|(_, &a)| a < 3)
                    .map(|(q, &a)| (q, axis(a)))
                    .collect();
                PauliTerm::new(c, factors).unwrap()
            })
            .collect();
        PauliSum::new(3, terms, "J").unwrap()
    })
}

fn grid() -> impl Strategy<Value = GridParams> {
    (1u32..5, 1usize..7, 1usize..7, 0.1f64..1.0, 0.1f64..1.0)
        .prop_map(|(k, my, mz, dy, dz)| GridParams::new(k, my, mz, dy, dz).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn ledger_weights_sum_to_squared_coefficient_total(g in grid()) {
        let series = build_series(&g).unwrap();
        let total: Complex<f64> = series.entries().iter().map(|e| e.coeff).sum();
        let ledger = dedup_phases(&series);
        let p: f64 = ledger.all_rows().map(|r| r.p).sum();
        let scale: f64 = series.entries().iter().map(|e| e.coeff.norm()).sum::<f64>().powi(2).max(1.0);
        prop_assert!((p - total.norm_sqr()).abs() <= 1e-12 * scale);
        let w: f64 = weight_histogram(&ledger).iter().map(|x| x.1).sum();
        if ledger.all_rows().any(|r| r.abs_weight > 0.0) {
            prop_assert!((w - 1.0).abs() < 1e-12);
        } else {
            prop_assert_eq!(w, 0.0);
        }
    }

    #[test]
    fn scalar_operator_estimate_is_exact(g in grid(), x in 0.3f64..3.0) {
        let series = build_series(&g).unwrap();
        let f = series.evaluate_scalar(x);
        prop_assume!(f.norm_sqr() > 1e-8);
        let op = HermitianOperator::from_matrix(CMatrix::from_element(1, 1, Complex::new(x, 0.0))).unwrap();
        let provider = ExactOverlaps::new(EvolutionBackend::exact(op.clone()), StateVector::basis(1, 0).unwrap()).unwrap();
        let report = estimate_energy(&op, &dedup_phases(&series), &provider).unwrap();
        prop_assert!((report.norm_value - f.norm_sqr()).abs() < 1e-10 * f.norm_sqr().max(1.0));
        prop_assert!((report.lambda_est - x).abs() < 1e-9 * x);
    }

    #[test]
    fn pauli_sums_are_hermitian_and_shifts_compose(h in pauli_sum(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let op = h.to_dense().unwrap();
        let m = op.matrix();
        let scale = m.norm().max(1.0);
        prop_assert!((m - m.adjoint()).norm() < 1e-12 * scale);
        let twice = op.shift(a).shift(b);
        let once = op.shift(a + b);
        for (x, y) in twice.eigenvalues().iter().zip(once.eigenvalues()) {
            prop_assert!((x - y).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn pauli_json_round_trip(h in pauli_sum()) {
        let back: PauliSum = PauliSum::from_json_str(&h.to_json_string()).unwrap();
        let diff = h.to_dense().unwrap().matrix() - back.to_dense().unwrap().matrix();
        prop_assert!(diff.norm() < 1e-14);
    }

    #[test]
    fn trace_distance_is_a_metric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mat = || -> CMatrix<f64> {
            let v = StateVector::random(4, &mut rng);
            let w = StateVector::random(4, &mut rng);
            v.amplitudes() * w.amplitudes().adjoint()
        };
        let (a, b, c) = (mat(), mat(), mat());
        let ab = trace_distance(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - trace_distance(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(ab <= trace_distance(&a, &c).unwrap() + trace_distance(&c, &b).unwrap() + 1e-12);
        prop_assert!(trace_distance(&a, &a).unwrap() < 1e-12);
    }

    #[test]
    fn protocol_inference_round_trips(seed in any::<u64>(), t in -10.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Diagonal-plus-block operator with basis state 7 as an exact eigenstate.
        let h = {
            let r = StateVector::random(7, &mut rng);
            let mut m = CMatrix::<f64>::zeros(8, 8);
            for i in 0..7 {
                for j in 0..7 {
                    m[(i, j)] = r[i] * r[j].conj() + if i == j { Complex::new(i as f64, 0.0) } else { Complex::new(0.0, 0.0) };
                }
            }
            m[(7, 7)] = Complex::new(0.3, 0.0);
            HermitianOperator::from_matrix(m).unwrap()
        };
        let psi_r = StateVector::basis(8, 7).unwrap();
        let mut amps = StateVector::random(8, &mut rng).into_inner();
        amps[7] = Complex::new(0.0, 0.0);
        let psi0 = StateVector::new(amps).unwrap();
        let backend = EvolutionBackend::exact(h.clone());
        let probes = build_probes(&h, &psi0, &psi_r).unwrap();
        let p = protocol_probabilities(&probes, t, &backend).unwrap();
        let inferred = infer_direct(&p, probes.lambda_r);
        let exact = ExactOverlaps::new(backend, psi0).unwrap().overlap(t, OverlapKind::Norm).unwrap();
        prop_assert!((inferred - exact).norm() < 1e-10);
        let ind = infer_indirect(&p, inferred.im, inferred.re);
        prop_assert!((ind.abs() - inferred.re.abs()).abs() < 1e-8);
    }
}
