//! One module per subcommand. Each turns its flags into a fully resolved
//! run description, and each run description executes into in-memory
//! artifacts so that a repeat can be compared byte for byte.

pub mod analyze;
pub mod compare;
pub mod curves;
pub mod simulate;

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::manifest::{sha256_hex, FileDigest, RunManifest};

pub struct Artifact {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

pub struct Execution {
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<Artifact>,
    pub summary: String,
}

pub trait Run: Serialize + DeserializeOwned {
    const NAME: &'static str;

    fn seed(&self) -> Option<u64> {
        None
    }

    fn manifest_path(&self) -> &Path;

    fn execute(&self) -> Result<Execution>;
}

/// Executes `run` and assembles its manifest; nothing is written yet.
pub fn execute<R: Run>(run: &R) -> Result<(Execution, RunManifest)> {
    let exec = run.execute()?;
    let config = serde_json::to_value(run).map_err(|e| CliError::Numeric(format!("config encoding: {e}")))?;
    let mut manifest = RunManifest::new(R::NAME, run.seed(), config);
    manifest.inputs = exec.inputs.clone();
    manifest.outputs =
        exec.artifacts.iter().map(|a| FileDigest { path: a.path.clone(), sha256: sha256_hex(&a.bytes) }).collect();
    Ok((exec, manifest))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes the artifacts and then the manifest that describes them.
pub fn commit<R: Run>(run: &R, exec: &Execution, manifest: &RunManifest) -> Result<()> {
    for a in &exec.artifacts {
        write_file(&a.path, &a.bytes)?;
    }
    write_file(run.manifest_path(), manifest.to_json().as_bytes())
}

/// Reads an input file and records its digest alongside the bytes.
pub fn read_input(path: &Path) -> Result<(Vec<u8>, FileDigest)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let digest = FileDigest { path: path.to_path_buf(), sha256: sha256_hex(&bytes) };
    Ok((bytes, digest))
}

/// `out.csv` → `out.manifest.json`.
pub fn default_manifest(primary: &Path) -> PathBuf {
    primary.with_extension("manifest.json")
}

pub fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| CliError::Validation(format!("missing --{flag} (flag or config key `{flag}`)")))
}

/// Fills unset flags from a flat TOML config whose keys are the long flag
/// names.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| {
        let line = e.span().map_or(0, |s| text[..s.start].lines().count().max(1));
        CliError::Parse { path: path.to_path_buf(), line, message: e.message().to_string() }
    })
}

macro_rules! fill_from {
    ($args:ident, $file:ident; $($field:ident),* $(,)?) => {
        $( if $args.$field.is_none() { $args.$field = $file.$field; } )*
    };
}
pub(crate) use fill_from;

/// Enumerations shared between flags and config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FirstWait {
    Equilibrium,
    Ordinary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Zeros {
    Drop,
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Residuals {
    Density,
    LogDensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    Poisson,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Form {
    Reference,
    TimeChange,
}
