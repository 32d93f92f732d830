//! Figure configurations compiled into the binary.

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const BUNDLED: &[(&str, &str)] = &[
    ("fig2a", include_str!("../configs/fig2a.toml")),
    ("fig2c", include_str!("../configs/fig2c.toml")),
    ("fig2e", include_str!("../configs/fig2e.toml")),
    ("fig3", include_str!("../configs/fig3.toml")),
    ("fig4b", include_str!("../configs/fig4b.toml")),
    ("fig4cde", include_str!("../configs/fig4cde.toml")),
    ("figS1", include_str!("../configs/figS1.toml")),
    ("figS3", include_str!("../configs/figS3.toml")),
    ("figS3a", include_str!("../configs/figS3a.toml")),
    ("figS3bc", include_str!("../configs/figS3bc.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// Loads a config from a file path, falling back to a bundled name.
pub fn resolve(arg: &str) -> CliResult<ExperimentConfig> {
    let path = std::path::Path::new(arg);
    if path.is_file() {
        return ExperimentConfig::load(path);
    }
    match bundled(arg) {
        Some(text) => ExperimentConfig::from_toml_str(text),
        None => Err(CliError::Validation(format!(
            "{arg} is neither a config file nor a bundled config (see `invit list-bundled`)"
        ))),
    }
}
