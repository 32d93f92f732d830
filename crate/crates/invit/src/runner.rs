//! Experiment orchestration.

use std::f64::consts::TAU;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use invit_core::boson::{self, Boundary, FockBasis};
use invit_core::estimator::{estimate_energy, estimate_observable, ideal_iterate, symmetrize, OverlapKind};
use invit_core::noise::{noisy_indirect, noisy_probabilities, MitigationRecord, NoisyEstimate, NoisyEvolver};
use invit_core::pauli::{build_h2, load_pauli_sum, H2_HF_BITS, H2_SHIFT};
use invit_core::protocol::{build_probes, RealPartMode, ShotConfig};
use invit_core::scalar::{inner, norm, CMatrix};
use invit_core::series::{
    build_series, dedup_phases, exact_inverse_power, materialize_inverse, materialize_with_backend, trace_distance,
    weight_histogram,
};
use invit_core::{
    BoseHubbardParams, EvolutionBackend, ExactOverlaps, GridParams, HermitianOperator, NoisyOverlaps, OverlapProvider,
    PauliSum, PhaseLedger, ProtocolOverlaps, StateVector, TabulatedOverlaps, TrotterBackend,
};

use crate::config::{expand_env, BackendName, ExperimentConfig, ExperimentKind, OverlapSpec, ProviderName, SystemSpec};
use crate::error::{CliError, CliResult};

/// Rows of one experiment plus anything that does not fit the fixed columns.
#[derive(Debug, Clone, Serialize)]
pub struct ResultTable {
    pub kind: ExperimentKind,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub warnings: Vec<String>,
    /// Kind-specific extras for the metadata sidecar.
    pub extra: serde_json::Value,
}

impl ResultTable {
    fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            columns: kind.columns().iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            warnings: Vec::new(),
            extra: serde_json::Value::Null,
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Column by name, parsed as `f64`; empty cells become NaN.
    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect())
    }
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

/// One Hamiltonian with its trial and reference states.
pub struct Instance {
    pub label: String,
    /// Shifted operator.
    pub op: HermitianOperator,
    /// Qubit form, when the system has one.
    pub pauli: Option<PauliSum>,
    pub psi0: StateVector,
    pub reference: Option<StateVector>,
    pub basis: Option<FockBasis>,
}

fn lowest_diagonal(op: &HermitianOperator) -> usize {
    let m = op.matrix();
    (0..op.dim())
        .min_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re))
        .unwrap_or(0)
}

fn bits_state(bits: &[u8], n_qubits: usize, what: &str) -> CliResult<StateVector> {
    if bits.len() != n_qubits {
        return Err(CliError::Validation(format!(
            "{what} has {} bits but the system has {n_qubits} qubits",
            bits.len()
        )));
    }
    Ok(StateVector::from_bits(bits)?)
}

pub fn build_instances(cfg: &ExperimentConfig) -> CliResult<Vec<Instance>> {
    match &cfg.system {
        SystemSpec::H2 => {
            let pauli = build_h2::<f64>();
            let op = pauli.to_dense()?.shift(cfg.shift_e0.unwrap_or(H2_SHIFT));
            Ok(vec![Instance {
                label: "H2".into(),
                op,
                pauli: Some(pauli),
                psi0: StateVector::from_bits(&H2_HF_BITS)?,
                reference: Some(StateVector::from_bits(&[1, 1, 1, 1])?),
                basis: None,
            }])
        }
        SystemSpec::PauliFile {
            path,
            initial_bits,
            reference_bits,
        } => {
            let path = expand_env(path)?;
            let pauli: PauliSum = load_pauli_sum(&path)?;
            let op = pauli.to_dense()?.shift(cfg.shift_e0.unwrap_or(0.0));
            let n = pauli.n_qubits();
            let psi0 = match initial_bits {
                Some(b) => bits_state(b, n, "initial_bits")?,
                None => StateVector::basis(op.dim(), lowest_diagonal(&op))?,
            };
            let reference = reference_bits
                .as_ref()
                .map(|b| bits_state(b, n, "reference_bits"))
                .transpose()?;
            let label = std::path::Path::new(&path)
                .file_stem()
                .map_or_else(|| "pauli".into(), |s| s.to_string_lossy().into_owned());
            Ok(vec![Instance {
                label,
                op,
                pauli: Some(pauli),
                psi0,
                reference,
                basis: None,
            }])
        }
        SystemSpec::BoseHubbard {
            n_sites,
            n_max,
            total_n,
            u,
            mu,
            j,
            boundary,
            shift_margin,
        } => {
            let total = total_n.unwrap_or(*n_sites);
            let basis = FockBasis::new(*n_sites, n_max.unwrap_or(total), Some(total))?;
            j.to_vec()
                .into_iter()
                .map(|jv| bose_instance(&basis, jv, *u, *mu, *boundary, *shift_margin, cfg.shift_e0))
                .collect()
        }
    }
}

fn bose_instance(
    basis: &FockBasis,
    j: f64,
    u: f64,
    mu: f64,
    boundary: Boundary,
    margin: f64,
    shift_e0: Option<f64>,
) -> CliResult<Instance> {
    let mut p = BoseHubbardParams { j, u, mu, e0: 0.0 };
    p.e0 = match shift_e0 {
        Some(e0) => e0,
        None => boson::positive_shift(basis, &p, boundary, margin * u)?,
    };
    let op = boson::build_bose_hubbard(basis, &p, boundary)?;
    Ok(Instance {
        label: format!("J={j}"),
        op,
        pauli: None,
        psi0: boson::mott_state(basis)?,
        reference: None,
        basis: Some(basis.clone()),
    })
}

/// One resolved grid of the sweep (stored with `k = 1`).
#[derive(Debug, Clone, Copy)]
pub struct GridVariant {
    pub phi_max_over_2pi: f64,
    pub skew: f64,
    pub grid: GridParams,
}

pub fn grid_variants(cfg: &ExperimentConfig) -> CliResult<Vec<GridVariant>> {
    let g = &cfg.grid;
    let variant = |grid: GridParams| GridVariant {
        phi_max_over_2pi: grid.phi_max() / TAU,
        skew: grid.skew(),
        grid,
    };
    let phis = g.phi_max_over_2pi.as_ref().map(|p| p.to_vec());
    let out = match (g.my.zip(g.mz), g.dy.zip(g.dz), phis) {
        (Some((my, mz)), Some((dy, dz)), None) => vec![variant(GridParams::new(1, my, mz, dy, dz)?)],
        (Some((my, mz)), None, Some(phis)) => {
            let mut v = Vec::new();
            for &phi in &phis {
                for &skew in &g.skew.to_vec() {
                    v.push(variant(GridParams::from_phi_max(1, my, mz, phi, skew)?));
                }
            }
            v
        }
        (None, Some((dy, dz)), Some(phis)) => phis
            .iter()
            .map(|&phi| {
                let m = ((phi * TAU / (dy * dz)).sqrt().round() as usize).max(1);
                Ok(variant(GridParams::new(1, m, m, dy, dz)?))
            })
            .collect::<CliResult<_>>()?,
        _ => return Err(CliError::Validation("grid is under- or over-specified".into())),
    };
    Ok(out)
}

/// Evolution backend choice for one row group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackendChoice {
    pub name: BackendName,
    pub trotter_steps: Option<usize>,
}

pub fn backend_choices(cfg: &ExperimentConfig) -> Vec<BackendChoice> {
    match cfg.evolution.backend {
        BackendName::Exact => vec![BackendChoice {
            name: BackendName::Exact,
            trotter_steps: None,
        }],
        BackendName::Trotter => {
            let mut v: Vec<_> = cfg
                .evolution
                .trotter_steps
                .as_ref()
                .map(|s| s.to_vec())
                .unwrap_or_default()
                .into_iter()
                .map(|n| BackendChoice {
                    name: BackendName::Trotter,
                    trotter_steps: Some(n),
                })
                .collect();
            if cfg.evolution.include_exact {
                v.insert(
                    0,
                    BackendChoice {
                        name: BackendName::Exact,
                        trotter_steps: None,
                    },
                );
            }
            v
        }
    }
}

fn make_backend(inst: &Instance, choice: BackendChoice) -> CliResult<EvolutionBackend> {
    match (choice.name, choice.trotter_steps) {
        (BackendName::Trotter, Some(n)) => {
            let pauli = inst
                .pauli
                .as_ref()
                .ok_or_else(|| CliError::Validation("Trotter evolution needs a Pauli-sum system".into()))?;
            let trotter = TrotterBackend::from_pauli(pauli, &inst.op, n)?;
            Ok(EvolutionBackend::trotter(inst.op.clone(), trotter))
        }
        _ => Ok(EvolutionBackend::exact(inst.op.clone())),
    }
}

fn reference(inst: &Instance) -> CliResult<&StateVector> {
    inst.reference.as_ref().ok_or_else(|| {
        CliError::Validation(format!(
            "{}: the overlap protocol needs a reference eigenstate (reference_bits)",
            inst.label
        ))
    })
}

fn noisy_provider(
    cfg: &ExperimentConfig,
    inst: &Instance,
    backend: EvolutionBackend,
    estimate: NoisyEstimate,
) -> CliResult<Box<dyn OverlapProvider<f64>>> {
    let noise = cfg
        .noise
        .clone()
        .ok_or_else(|| CliError::Validation("noisy overlaps need a [noise] block".into()))?;
    Ok(Box::new(NoisyOverlaps::new(
        backend,
        &inst.psi0,
        reference(inst)?,
        noise,
        estimate,
    )?))
}

fn make_provider(
    cfg: &ExperimentConfig,
    inst: &Instance,
    backend: EvolutionBackend,
) -> CliResult<Box<dyn OverlapProvider<f64>>> {
    Ok(match &cfg.overlaps {
        OverlapSpec::Named(ProviderName::Exact) => Box::new(ExactOverlaps::new(backend, inst.psi0.clone())?),
        OverlapSpec::Named(ProviderName::Protocol) => {
            Box::new(ProtocolOverlaps::new(backend, &inst.psi0, reference(inst)?)?)
        }
        OverlapSpec::Named(ProviderName::ProtocolIndirect) => {
            Box::new(ProtocolOverlaps::new(backend, &inst.psi0, reference(inst)?)?.with_mode(RealPartMode::Indirect))
        }
        OverlapSpec::Shots {
            protocol_shots,
            shot_seed,
        } => Box::new(
            ProtocolOverlaps::new(backend, &inst.psi0, reference(inst)?)?.with_shots(Some(ShotConfig {
                shots: *protocol_shots,
                seed: *shot_seed,
            })),
        ),
        OverlapSpec::Named(ProviderName::NoisyDirect) => noisy_provider(cfg, inst, backend, NoisyEstimate::Direct)?,
        OverlapSpec::Named(ProviderName::NoisyIndirect) => noisy_provider(cfg, inst, backend, NoisyEstimate::Indirect)?,
        OverlapSpec::Named(ProviderName::Mitigated) => noisy_provider(cfg, inst, backend, NoisyEstimate::Mitigated)?,
    })
}

fn ledger_for(grid: &GridParams, k: u32) -> CliResult<PhaseLedger> {
    if k == 0 {
        return Ok(PhaseLedger::identity());
    }
    Ok(dedup_phases(&build_series(&grid.with_k(k))?))
}

/// Evaluates every overlap the ledgers of this grid need, once.
///
/// The set of phase differences depends only on the grid steps, not on `k`.
fn tabulate(provider: &dyn OverlapProvider<f64>, grid: &GridParams) -> CliResult<TabulatedOverlaps> {
    let ledger = ledger_for(grid, 1)?;
    let rows = ledger
        .all_rows()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|r| {
            Ok((
                r.delta_phi,
                provider.overlap(r.delta_phi, OverlapKind::Norm)?,
                provider.overlap(r.delta_phi, OverlapKind::Energy)?,
            ))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(TabulatedOverlaps::new(provider.dim(), rows))
}

fn inverse_trace_distance(
    inst: &Instance,
    backend: &EvolutionBackend,
    grid: &GridParams,
    k: u32,
) -> CliResult<Option<f64>> {
    if k == 0 {
        return Ok(None);
    }
    let series = build_series(&grid.with_k(k))?;
    let approx = materialize_inverse(&series, &inst.op)?;
    let reference = match backend {
        EvolutionBackend::Exact(_) => exact_inverse_power(&inst.op, k)?,
        EvolutionBackend::Trotter { .. } => materialize_with_backend(&series, backend)?,
    };
    Ok(Some(trace_distance(&reference, &approx)?))
}

/// Runs one experiment and returns its table.
pub fn run(cfg: &ExperimentConfig) -> CliResult<ResultTable> {
    cfg.validate()?;
    let instances = build_instances(cfg)?;
    let mut table = ResultTable::new(cfg.kind);
    match cfg.kind {
        ExperimentKind::Iteration => run_iteration(cfg, &instances, &mut table)?,
        ExperimentKind::Correlations => run_correlations(cfg, &instances, &mut table)?,
        ExperimentKind::SkewSweep => run_skew_sweep(cfg, &instances, &mut table)?,
        ExperimentKind::Histogram => run_histogram(cfg, &mut table)?,
        ExperimentKind::OverlapNoise => run_overlap_noise(cfg, &instances, &mut table)?,
        ExperimentKind::Mitigation => run_mitigation(cfg, &instances, &mut table)?,
    }
    Ok(table)
}

fn single<'a>(instances: &'a [Instance], what: &str) -> CliResult<&'a Instance> {
    match instances {
        [one] => Ok(one),
        _ => Err(CliError::Validation(format!(
            "{what} runs need exactly one system instance"
        ))),
    }
}

fn single_grid(cfg: &ExperimentConfig, what: &str) -> CliResult<GridVariant> {
    match grid_variants(cfg)?.as_slice() {
        [one] => Ok(*one),
        _ => Err(CliError::Validation(format!("{what} runs need exactly one grid"))),
    }
}

fn run_iteration(cfg: &ExperimentConfig, instances: &[Instance], table: &mut ResultTable) -> CliResult<()> {
    let variants = grid_variants(cfg)?;
    let provider_label = cfg.overlaps.label();
    for inst in instances {
        let ideals = cfg
            .k_range
            .iter()
            .map(|&k| ideal_iterate(&inst.op, &inst.psi0, k))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(w) = ideals.iter().find_map(|i| i.warning.clone()) {
            table.warnings.push(format!("{}: {w}", inst.label));
        }
        for choice in backend_choices(cfg) {
            let backend = make_backend(inst, choice)?;
            let provider = make_provider(cfg, inst, backend.clone())?;
            for v in &variants {
                let tab = tabulate(provider.as_ref(), &v.grid)?;
                for (&k, ideal) in cfg.k_range.iter().zip(&ideals) {
                    let ledger = ledger_for(&v.grid, k)?;
                    let report = estimate_energy(&inst.op, &ledger, &tab)?;
                    let td = if cfg.trace_distance {
                        inverse_trace_distance(inst, &backend, &v.grid, k)?
                    } else {
                        None
                    };
                    table.push(vec![
                        inst.label.clone(),
                        num(v.phi_max_over_2pi),
                        num(v.skew),
                        match choice.name {
                            BackendName::Exact => "exact".into(),
                            BackendName::Trotter => "trotter".into(),
                        },
                        choice.trotter_steps.map_or_else(String::new, |n| n.to_string()),
                        provider_label.clone(),
                        k.to_string(),
                        num(report.lambda_est),
                        num(ideal.energy),
                        num(report.delta_lambda),
                        num(report.norm_value),
                        num(report.imag_residue),
                        opt_num(td),
                    ]);
                }
            }
        }
    }
    Ok(())
}

fn expectation(a_sym: &CMatrix<f64>, psi: &StateVector) -> f64 {
    inner(psi, &(a_sym * psi.amplitudes())).re
}

fn run_correlations(cfg: &ExperimentConfig, instances: &[Instance], table: &mut ResultTable) -> CliResult<()> {
    let obs = cfg
        .observables
        .as_ref()
        .ok_or_else(|| CliError::Validation("correlations need an [observables] block".into()))?;
    let variant = single_grid(cfg, "correlation")?;
    for inst in instances {
        let basis = inst
            .basis
            .as_ref()
            .ok_or_else(|| CliError::Validation("correlations need a Bose-Hubbard system".into()))?;
        let provider = ExactOverlaps::new(EvolutionBackend::exact(inst.op.clone()), inst.psi0.clone())?;
        let ground = inst.op.ground_state();
        let operators = obs
            .r
            .iter()
            .map(|&r| Ok((r, boson::correlation_operator::<f64>(basis, obs.c, r)?)))
            .collect::<CliResult<Vec<_>>>()?;
        for &k in &cfg.k_range {
            let ledger = ledger_for(&variant.grid, k)?;
            let ideal = ideal_iterate(&inst.op, &inst.psi0, k)?;
            for (r, a) in &operators {
                let value = estimate_observable(a, &ledger, &provider)?;
                let a_sym = symmetrize(a);
                table.push(vec![
                    inst.label.clone(),
                    k.to_string(),
                    obs.c.to_string(),
                    r.to_string(),
                    num(value),
                    num(expectation(&a_sym, &ideal.state)),
                    num(expectation(&a_sym, &ground)),
                ]);
            }
        }
    }
    Ok(())
}

fn run_skew_sweep(cfg: &ExperimentConfig, instances: &[Instance], table: &mut ResultTable) -> CliResult<()> {
    let inst = single(instances, "skew sweep")?;
    let backend = EvolutionBackend::exact(inst.op.clone());
    let provider = make_provider(cfg, inst, backend.clone())?;
    for v in grid_variants(cfg)? {
        let tab = tabulate(provider.as_ref(), &v.grid)?;
        for &k in &cfg.k_range {
            let ledger = ledger_for(&v.grid, k)?;
            let report = estimate_energy(&inst.op, &ledger, &tab)?;
            let td = inverse_trace_distance(inst, &backend, &v.grid, k)?;
            table.push(vec![
                num(v.skew),
                num(v.phi_max_over_2pi),
                num(v.grid.dy),
                num(v.grid.dz),
                k.to_string(),
                num(report.lambda_est),
                num(report.delta_lambda),
                opt_num(td),
            ]);
        }
    }
    Ok(())
}

fn run_histogram(cfg: &ExperimentConfig, table: &mut ResultTable) -> CliResult<()> {
    let variant = single_grid(cfg, "histogram")?;
    for &k in &cfg.k_range {
        let ledger = ledger_for(&variant.grid, k)?;
        for (dphi, w) in weight_histogram(&ledger) {
            table.push(vec![k.to_string(), num(dphi / TAU), num(w)]);
        }
    }
    Ok(())
}

fn run_overlap_noise(cfg: &ExperimentConfig, instances: &[Instance], table: &mut ResultTable) -> CliResult<()> {
    let inst = single(instances, "overlap_noise")?;
    let noise = cfg.noise.clone().unwrap_or_default();
    let backend = EvolutionBackend::exact(inst.op.clone());
    let probes = build_probes(&inst.op, &inst.psi0, reference(inst)?)?;
    let evolver = NoisyEvolver::new(backend.clone())?;
    let exact = ExactOverlaps::new(backend, inst.psi0.clone())?;
    let mut records: Vec<MitigationRecord> = Vec::new();
    for &x in cfg.probe_phases_over_2pi.as_deref().unwrap_or_default() {
        let t = x * TAU;
        let clean = exact.overlap(t, OverlapKind::Norm)?;
        for &g in &noise.gamma_sweep {
            let p = noisy_probabilities(&probes, &evolver, t, g, noise.n_trajectories, noise.master_seed)?;
            let (ind, ind_err, _) = noisy_indirect(&p);
            table.push(vec![
                num(x),
                num(g),
                (g >= noise.gamma_min).to_string(),
                num(p.direct.re),
                num(p.direct_stderr.re),
                num(ind),
                num(ind_err),
                num(p.direct.im),
                num(clean.re),
                num(clean.im),
            ]);
        }
        records.push(invit_core::noise::mitigate_overlap(&probes, &evolver, t, &noise)?);
    }
    table.extra = serde_json::json!({ "extrapolations": records });
    Ok(())
}

/// Overlap tables of the four mitigation strategies, filled from one sweep per phase difference.
struct StrategyTables {
    noiseless: Vec<(f64, Complex<f64>, Complex<f64>)>,
    direct: Vec<(f64, Complex<f64>, Complex<f64>)>,
    indirect: Vec<(f64, Complex<f64>, Complex<f64>)>,
    mitigated: Vec<(f64, Complex<f64>, Complex<f64>)>,
}

fn run_mitigation(cfg: &ExperimentConfig, instances: &[Instance], table: &mut ResultTable) -> CliResult<()> {
    let inst = single(instances, "mitigation")?;
    let variant = single_grid(cfg, "mitigation")?;
    let noise = cfg.noise.clone().unwrap_or_default();
    let backend = EvolutionBackend::exact(inst.op.clone());
    let exact = ExactOverlaps::new(backend.clone(), inst.psi0.clone())?;
    let noisy = NoisyOverlaps::new(backend, &inst.psi0, reference(inst)?, noise, NoisyEstimate::Mitigated)?;
    let energy_scale = norm(&inst.op.apply(&inst.psi0));
    let ledger = ledger_for(&variant.grid, 1)?;

    let mut tables = StrategyTables {
        noiseless: Vec::new(),
        direct: Vec::new(),
        indirect: Vec::new(),
        mitigated: Vec::new(),
    };
    let mut records = Vec::new();
    for row in ledger.all_rows() {
        let t = row.delta_phi;
        let rn = noisy.record(t, OverlapKind::Norm)?;
        let re = noisy.record(t, OverlapKind::Energy)?;
        let at_min = |r: &MitigationRecord, branch: &[(f64, f64)], scale: f64| {
            Complex::new(branch[0].0, r.values_imag[0].0) * scale
        };
        tables.noiseless.push((
            t,
            exact.overlap(t, OverlapKind::Norm)?,
            exact.overlap(t, OverlapKind::Energy)?,
        ));
        tables.direct.push((
            t,
            at_min(&rn, &rn.values_direct, 1.0),
            at_min(&re, &re.values_direct, energy_scale),
        ));
        tables.indirect.push((
            t,
            at_min(&rn, &rn.values_indirect, 1.0),
            at_min(&re, &re.values_indirect, energy_scale),
        ));
        tables.mitigated.push((
            t,
            Complex::new(rn.combined, rn.extrap_imag),
            Complex::new(re.combined, re.extrap_imag) * energy_scale,
        ));
        records.push(serde_json::json!({ "norm": rn, "energy": re }));
    }
    let dim = inst.op.dim();
    let strategies = [
        ("noiseless", TabulatedOverlaps::new(dim, tables.noiseless)),
        ("direct", TabulatedOverlaps::new(dim, tables.direct)),
        ("indirect", TabulatedOverlaps::new(dim, tables.indirect)),
        ("mitigated", TabulatedOverlaps::new(dim, tables.mitigated)),
    ];
    for &k in &cfg.k_range {
        let ledger = ledger_for(&variant.grid, k)?;
        for (name, tab) in &strategies {
            let (lambda, delta) = match estimate_energy(&inst.op, &ledger, tab) {
                Ok(r) => (Some(r.lambda_est), Some(r.delta_lambda)),
                Err(e) => {
                    table.warnings.push(format!("k = {k}, {name}: {e}"));
                    (None, None)
                }
            };
            table.push(vec![k.to_string(), name.to_string(), opt_num(lambda), opt_num(delta)]);
        }
    }
    table.extra = serde_json::json!({
        "gamma_min": cfg.noise.as_ref().map(|n| n.gamma_min),
        "records": records,
    });
    Ok(())
}
