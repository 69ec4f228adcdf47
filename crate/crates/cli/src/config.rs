use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use screenwise_core::preference::PreferenceOverrides;
use screenwise_core::InterventionId;

use crate::error::CliError;

/// `--config` file. Command-line flags win over every field.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: Option<String>,
    pub catalog: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    /// Applied to the default parameters before any preference flag.
    pub preferences: PreferencesSection,
    pub limits: Option<LimitsSpec>,
    pub server: ServerSection,
}

/// [`PreferenceOverrides`] with TOML's string keys for the λ table.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreferencesSection {
    pub lambdas: BTreeMap<String, f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub rho: Option<f64>,
    pub pe: Option<f64>,
    pub pe_info: Option<f64>,
    pub pe_cost: Option<f64>,
    pub recalibrate: bool,
}

impl PreferencesSection {
    pub fn overrides(&self) -> Result<PreferenceOverrides, CliError> {
        let lambdas = self
            .lambdas
            .iter()
            .map(|(k, &v)| {
                k.parse::<u8>()
                    .map(|k| (k, v))
                    .map_err(|_| CliError::validation(format!("[preferences.lambdas]: `{k}` is not a comfort level")))
            })
            .collect::<Result<_, _>>()?;
        Ok(PreferenceOverrides {
            lambdas,
            a: self.a,
            b: self.b,
            rho: self.rho,
            pe: self.pe,
            pe_info: self.pe_info,
            pe_cost: self.pe_cost,
            recalibrate: self.recalibrate,
        })
    }
}

/// `"reference"`, `"none"`, or a table of caps.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum LimitsSpec {
    Named(String),
    Caps(BTreeMap<InterventionId, u64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub host: Option<String>,
    pub port: Option<u16>,
    pub work_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = crate::read_input(path)?;
        let mut config: Config =
            toml::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        // Relative file references are taken relative to the config file.
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(m) = &config.model {
            if m != "bundled" && Path::new(m).is_relative() {
                config.model = Some(base.join(m).to_string_lossy().into_owned());
            }
        }
        if let Some(c) = &config.catalog {
            if c.is_relative() {
                config.catalog = Some(base.join(c));
            }
        }
        if let Some(LimitsSpec::Named(n)) = &config.limits {
            if !matches!(n.as_str(), "reference" | "none") && Path::new(n).is_relative() {
                config.limits = Some(LimitsSpec::Named(base.join(n).to_string_lossy().into_owned()));
            }
        }
        Ok(config)
    }
}
