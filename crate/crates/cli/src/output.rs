//! Run directories: echoed config, CSV files and the JSON manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const OUT_DIR_ENV: &str = "RLRC_OUT_DIR";

/// Shortest text that parses back to the same `f64`, independent of locale.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// `$RLRC_OUT_DIR/<command>-<task>-seed<seed>` unless the config names one.
pub fn run_dir_path(cfg: &RunConfig, command: &str) -> PathBuf {
    if let Some(dir) = &cfg.out_dir {
        return dir.clone();
    }
    let root = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(format!("{command}-{}-seed{}", cfg.task, cfg.seed))
}

/// One run's output directory. Files are written by a single owner.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    command: String,
    files: Vec<String>,
    warnings: Vec<String>,
}

impl RunDir {
    /// Creates the directory and echoes the effective configuration into it.
    pub fn create(cfg: &RunConfig, command: &str) -> Result<Self, CliError> {
        let path = run_dir_path(cfg, command);
        fs::create_dir_all(&path)
            .map_err(|e| CliError::Runtime(format!("cannot create run directory {}: {e}", path.display())))?;
        let mut echo = cfg.clone();
        echo.out_dir = Some(path.clone());
        fs::write(path.join(CONFIG_FILE), echo.to_toml()?)?;
        Ok(Self {
            path,
            command: command.to_string(),
            files: vec![CONFIG_FILE.to_string()],
            warnings: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.path.join(name)
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("warning: {msg}");
        self.warnings.push(msg);
    }

    /// Writes a CSV file with a header row.
    pub fn write_csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_path(self.file(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the manifest; `status` is `ok` or `not_converged`.
    pub fn finish(self, cfg: &RunConfig, status: &str, results: Value) -> Result<PathBuf, CliError> {
        let manifest = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": cfg.seed,
            "config": CONFIG_FILE,
            "checkpoint_in": cfg.checkpoint,
            "files": self.files,
            "status": status,
            "warnings": self.warnings,
            "results": results,
        });
        fs::write(self.path.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
        Ok(self.path)
    }
}
