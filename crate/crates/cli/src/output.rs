use std::fs;
use std::path::{Path, PathBuf};

use dissipative::linalg::C64;
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.toml";

/// Seventeen significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `(re, im)` column pair.
pub fn complex(z: C64) -> [String; 2] {
    [num(z.re), num(z.im)]
}

/// Output directory of one run, collecting written files and summary values.
#[derive(Debug)]
pub struct RunContext {
    dir: PathBuf,
    files: Vec<String>,
    summary: Table,
}

impl RunContext {
    pub fn new(dir: impl Into<PathBuf>) -> CliResult<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| CliError::Output { path: dir.clone(), source })?;
        Ok(RunContext { dir, files: Vec::new(), summary: Table::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn summary(&self) -> &Table {
        &self.summary
    }

    pub fn record(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub fn write_csv<R, S>(&mut self, name: &str, header: &[&str], rows: R) -> CliResult<()>
    where
        R: IntoIterator,
        R::Item: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let path = self.dir.join(name);
        let io_err = |e: csv::Error| CliError::Output { path: path.clone(), source: e.into() };
        let mut w = csv::Writer::from_path(&path).map_err(io_err)?;
        w.write_record(header).map_err(io_err)?;
        for row in rows {
            w.write_record(row).map_err(io_err)?;
        }
        w.flush().map_err(|source| CliError::Output { path: path.clone(), source })?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Everything except `[timestamp]` depends only on the configuration.
    pub(crate) fn write_manifest(&self, command: &str, params: &Table, started: u64, wall: f64) -> CliResult<()> {
        let mut run = Table::new();
        run.insert("command".into(), command.into());
        run.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        run.insert("files".into(), Value::Array(self.files.iter().map(|f| f.as_str().into()).collect()));
        let mut stamp = Table::new();
        stamp.insert("started_unix".into(), Value::Integer(started as i64));
        stamp.insert("wall_seconds".into(), Value::Float(wall));
        let mut doc = Table::new();
        doc.insert("run".into(), Value::Table(run));
        doc.insert("config".into(), Value::Table(params.clone()));
        doc.insert("summary".into(), Value::Table(self.summary.clone()));
        doc.insert("timestamp".into(), Value::Table(stamp));
        let path = self.dir.join(MANIFEST);
        let text = toml::to_string(&doc).map_err(|e| CliError::Config(e.to_string()))?;
        fs::write(&path, text).map_err(|source| CliError::Output { path, source })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn numbers_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
