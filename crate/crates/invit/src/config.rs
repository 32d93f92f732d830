//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use invit_core::boson::{Boundary, DEFAULT_SHIFT_MARGIN};
use invit_core::noise::NoiseConfig;

use crate::error::{CliError, CliResult};

/// What an experiment computes; fixes the output columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Energy estimates per grid, backend and iteration step.
    Iteration,
    /// Correlators `<a+_{c+r} a_c>` per iteration step.
    Correlations,
    /// Energy and trace distance against the grid skew at fixed phase.
    SkewSweep,
    /// Normalized weights of the phase-difference ledger.
    Histogram,
    /// Noisy overlaps at fixed phase differences across the dephasing sweep.
    OverlapNoise,
    /// Energy estimates from noiseless, noisy and mitigated overlaps.
    Mitigation,
}

impl ExperimentKind {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Self::Iteration => &[
                "label",
                "phi_max_over_2pi",
                "skew",
                "backend",
                "trotter_steps",
                "provider",
                "k",
                "lambda_est",
                "lambda_ideal",
                "delta_lambda",
                "norm_value",
                "imag_residue",
                "trace_distance",
            ],
            Self::Correlations => &["label", "k", "c", "r", "value", "ideal_value", "exact_value"],
            Self::SkewSweep => &[
                "skew",
                "phi_max_over_2pi",
                "dy",
                "dz",
                "k",
                "lambda_est",
                "delta_lambda",
                "trace_distance",
            ],
            Self::Histogram => &["k", "delta_phi_over_2pi", "weight"],
            Self::OverlapNoise => &[
                "delta_phi_over_2pi",
                "gamma",
                "accessible",
                "direct_re",
                "direct_re_err",
                "indirect_re",
                "indirect_re_err",
                "direct_im",
                "noiseless_re",
                "noiseless_im",
            ],
            Self::Mitigation => &["k", "strategy", "lambda_est", "delta_lambda"],
        }
    }
}

/// Single value or list, as written in the config; always serialized as a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, into = "Vec<T>", bound(serialize = "T: Clone + Serialize"))]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(x) => vec![x.clone()],
            Self::Many(v) => v.clone(),
        }
    }
}

impl<T> From<OneOrMany<T>> for Vec<T> {
    fn from(v: OneOrMany<T>) -> Self {
        match v {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Hamiltonian source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// Built-in four-qubit hydrogen molecule.
    H2,
    /// Pauli-sum JSON file. `${VAR}` in the path is expanded from the environment.
    PauliFile {
        path: String,
        /// Initial basis state, qubit 0 first; defaults to the lowest diagonal entry.
        #[serde(default)]
        initial_bits: Option<Vec<u8>>,
        /// Reference eigenstate for the overlap protocol.
        #[serde(default)]
        reference_bits: Option<Vec<u8>>,
    },
    /// Bose-Hubbard chain, one instance per tunneling value.
    BoseHubbard {
        n_sites: usize,
        /// Occupation cap per site; defaults to the particle number.
        #[serde(default)]
        n_max: Option<usize>,
        /// Particle number; defaults to one per site.
        #[serde(default)]
        total_n: Option<usize>,
        u: f64,
        mu: f64,
        j: OneOrMany<f64>,
        #[serde(default)]
        boundary: Boundary,
        /// Positivity margin `delta / U` when `shift_e0` is not given.
        #[serde(default = "default_margin")]
        shift_margin: f64,
    },
}

fn default_margin() -> f64 {
    DEFAULT_SHIFT_MARGIN
}

fn default_skew() -> OneOrMany<f64> {
    OneOrMany::One(1.0)
}

/// Series grid. Three forms are accepted:
/// `my, mz, phi_max_over_2pi [, skew]` fixes the point counts and derives the steps;
/// `my, mz, dy, dz` is fully explicit;
/// `dy, dz, phi_max_over_2pi` fixes the steps and derives `my = mz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub my: Option<usize>,
    #[serde(default)]
    pub mz: Option<usize>,
    #[serde(default)]
    pub phi_max_over_2pi: Option<OneOrMany<f64>>,
    /// `Δy / Δz` in energy units of the Hamiltonian.
    #[serde(default = "default_skew")]
    pub skew: OneOrMany<f64>,
    #[serde(default)]
    pub dy: Option<f64>,
    #[serde(default)]
    pub dz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendName {
    #[default]
    Exact,
    Trotter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSpec {
    #[serde(default)]
    pub backend: BackendName,
    #[serde(default)]
    pub trotter_steps: Option<OneOrMany<usize>>,
    /// Also report the exact backend alongside Trotter runs.
    #[serde(default)]
    pub include_exact: bool,
}

impl Default for EvolutionSpec {
    fn default() -> Self {
        Self {
            backend: BackendName::Exact,
            trotter_steps: None,
            include_exact: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderName {
    Exact,
    Protocol,
    ProtocolIndirect,
    NoisyDirect,
    NoisyIndirect,
    Mitigated,
}

/// Overlap provider: a name, or `{ protocol_shots = n }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OverlapSpec {
    Named(ProviderName),
    Shots {
        protocol_shots: usize,
        #[serde(default)]
        shot_seed: u64,
    },
}

impl Default for OverlapSpec {
    fn default() -> Self {
        Self::Named(ProviderName::Exact)
    }
}

impl OverlapSpec {
    pub fn label(&self) -> String {
        match self {
            Self::Named(n) => serde_json::to_value(n)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default(),
            Self::Shots { protocol_shots, .. } => format!("protocol_shots_{protocol_shots}"),
        }
    }

    pub fn needs_reference(&self) -> bool {
        !matches!(self, Self::Named(ProviderName::Exact))
    }

    pub fn needs_noise(&self) -> bool {
        matches!(
            self,
            Self::Named(ProviderName::NoisyDirect | ProviderName::NoisyIndirect | ProviderName::Mitigated)
        )
    }
}

/// Correlators `<a+_{c+r} a_c>` with zero-based site `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub c: usize,
    pub r: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// CSV path; the metadata sidecar goes next to it with a `.json` extension.
    pub path: PathBuf,
}

/// One experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub kind: ExperimentKind,
    pub system: SystemSpec,
    /// Constant added to the Hamiltonian; defaults depend on the system.
    #[serde(default)]
    pub shift_e0: Option<f64>,
    pub k_range: Vec<u32>,
    pub grid: GridSpec,
    #[serde(default)]
    pub evolution: EvolutionSpec,
    #[serde(default)]
    pub overlaps: OverlapSpec,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub observables: Option<ObservableSpec>,
    /// Phase differences probed by `overlap_noise` runs.
    #[serde(default)]
    pub probe_phases_over_2pi: Option<Vec<f64>>,
    /// Report the trace distance between exact and approximate inverse powers.
    #[serde(default)]
    pub trace_distance: bool,
    pub output: OutputSpec,
}

/// Expands `${NAME}` from the environment.
pub fn expand_env(raw: &str) -> CliResult<String> {
    let mut out = String::new();
    let mut rest = raw;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find('}')
            .ok_or_else(|| CliError::Validation(format!("unterminated variable in {raw:?}")))?;
        let name = &after[..end];
        let value = std::env::var(name)
            .map_err(|_| CliError::Validation(format!("environment variable {name} is not set (needed by {raw:?})")))?;
        out.push_str(&value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Validation(format!("invalid config: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Semantic checks that do not need any numerics.
    pub fn validate(&self) -> CliResult<()> {
        let fail = |m: String| Err(CliError::Validation(m));
        if self.name.trim().is_empty() {
            return fail("name must not be empty".into());
        }
        if self.k_range.is_empty() {
            return fail("k_range must not be empty".into());
        }
        let needs_positive_k = !matches!(self.kind, ExperimentKind::OverlapNoise);
        if needs_positive_k && self.k_range.contains(&0) && self.kind != ExperimentKind::Iteration {
            return fail("k = 0 is only meaningful for iteration runs".into());
        }
        self.validate_grid()?;
        match &self.system {
            SystemSpec::H2 => {}
            SystemSpec::PauliFile { path, .. } => {
                let expanded = expand_env(path)?;
                if !Path::new(&expanded).is_file() {
                    return fail(format!("Pauli-sum file {expanded} does not exist"));
                }
            }
            SystemSpec::BoseHubbard {
                n_sites,
                u,
                j,
                shift_margin,
                ..
            } => {
                if *n_sites == 0 {
                    return fail("Bose-Hubbard chain needs at least one site".into());
                }
                if !(*u > 0.0) {
                    return fail("Bose-Hubbard interaction u must be positive".into());
                }
                if j.to_vec().is_empty() {
                    return fail("Bose-Hubbard tunneling list must not be empty".into());
                }
                if !(*shift_margin > 0.0) {
                    return fail("shift_margin must be positive".into());
                }
                if self.evolution.backend == BackendName::Trotter {
                    return fail("Trotter evolution needs a Pauli-sum system".into());
                }
                if self.overlaps.needs_reference() {
                    return fail("overlap protocol needs a qubit system with a reference state".into());
                }
            }
        }
        if self.evolution.backend == BackendName::Trotter {
            let steps = self
                .evolution
                .trotter_steps
                .as_ref()
                .map(|s| s.to_vec())
                .unwrap_or_default();
            if steps.is_empty() || steps.contains(&0) {
                return fail("Trotter evolution needs a non-empty list of positive trotter_steps".into());
            }
        }
        if let OverlapSpec::Shots { protocol_shots, .. } = self.overlaps {
            if protocol_shots == 0 {
                return fail("protocol_shots must be positive".into());
            }
        }
        let needs_noise = self.overlaps.needs_noise()
            || matches!(self.kind, ExperimentKind::OverlapNoise | ExperimentKind::Mitigation);
        if needs_noise {
            let noise = match &self.noise {
                Some(n) => n,
                None => return fail("this experiment needs a [noise] block".into()),
            };
            noise.validate().map_err(|e| CliError::Validation(e.to_string()))?;
            if matches!(self.system, SystemSpec::BoseHubbard { .. }) {
                return fail("dephasing noise needs a qubit system".into());
            }
        }
        match self.kind {
            ExperimentKind::Correlations => {
                if !matches!(self.system, SystemSpec::BoseHubbard { .. }) {
                    return fail("correlations need a Bose-Hubbard system".into());
                }
                let Some(obs) = &self.observables else {
                    return fail("correlations need an [observables] block".into());
                };
                if obs.r.is_empty() {
                    return fail("observables.r must not be empty".into());
                }
            }
            ExperimentKind::SkewSweep => {
                if self.grid.phi_max_over_2pi.as_ref().map(|p| p.to_vec().len()) != Some(1) {
                    return fail("skew sweeps need exactly one phi_max_over_2pi".into());
                }
            }
            ExperimentKind::OverlapNoise if self.probe_phases_over_2pi.as_ref().is_none_or(|p| p.is_empty()) => {
                return fail("overlap_noise runs need probe_phases_over_2pi".into());
            }
            _ => {}
        }
        Ok(())
    }

    fn validate_grid(&self) -> CliResult<()> {
        let g = &self.grid;
        let fail = |m: &str| Err(CliError::Validation(m.to_owned()));
        if g.my == Some(0) || g.mz == Some(0) {
            return fail("grid.my and grid.mz must be positive");
        }
        let counts = match (g.my, g.mz) {
            (Some(_), Some(_)) => true,
            (None, None) => false,
            _ => return fail("grid.my and grid.mz must be given together"),
        };
        let steps = match (g.dy, g.dz) {
            (Some(dy), Some(dz)) => {
                if !(dy > 0.0 && dz > 0.0) {
                    return fail("grid.dy and grid.dz must be positive");
                }
                true
            }
            (None, None) => false,
            _ => return fail("grid.dy and grid.dz must be given together"),
        };
        if let Some(p) = &g.phi_max_over_2pi {
            let phis = p.to_vec();
            if phis.is_empty() || phis.iter().any(|x| !(*x > 0.0)) {
                return fail("grid.phi_max_over_2pi must be a non-empty list of positive values");
            }
        }
        match (counts, steps, g.phi_max_over_2pi.is_some()) {
            (true, false, true) | (true, true, false) | (false, true, true) => {}
            _ => return fail("grid needs two of: (my, mz), (dy, dz), phi_max_over_2pi"),
        }
        let skews = g.skew.to_vec();
        if skews.is_empty() || skews.iter().any(|s| !(*s > 0.0)) {
            return fail("grid.skew must be positive");
        }
        if steps && skews != [1.0] {
            return fail("grid.skew only applies when the steps are derived");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, leaving out the fields that do not
    /// affect the numbers (name, description, output).
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            for key in ["name", "description", "output"] {
                map.remove(key);
            }
        }
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Seed that determines the stochastic parts of the run, if any.
    pub fn seed(&self) -> Option<u64> {
        match (&self.overlaps, &self.noise) {
            (OverlapSpec::Shots { shot_seed, .. }, _) => Some(*shot_seed),
            (_, Some(n))
                if self.overlaps.needs_noise()
                    || matches!(self.kind, ExperimentKind::OverlapNoise | ExperimentKind::Mitigation) =>
            {
                Some(n.master_seed)
            }
            _ => None,
        }
    }
}
