use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::Table;

use crate::error::{CliError, CliResult};

/// A run described in TOML. `params` use the flag names and take precedence over flags.
///
/// ```toml
/// command = "dse-run"
/// out = "runs/cluster"
///
/// [params]
/// preset = "cluster3"
/// steps = 500
/// ```
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub command: Option<String>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub params: Table,
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Serializes `args`, lays `overrides` on top and reads the result back.
pub fn apply_overrides<A: Serialize + DeserializeOwned>(args: &A, overrides: &Table) -> CliResult<(A, Table)> {
    let mut table = Table::try_from(args).map_err(|e| CliError::Config(e.to_string()))?;
    for (k, v) in overrides {
        table.insert(k.clone(), v.clone());
    }
    let merged: A = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
    let echo = Table::try_from(&merged).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((merged, echo))
}
