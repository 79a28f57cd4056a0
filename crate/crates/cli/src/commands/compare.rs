use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use super::{default_manifest, fill_from, load_config, read_input, required, Artifact, Execution, Run};
use crate::error::{CliError, Result};
use crate::table::{Table, VERSION};

const EMPIRICAL_COLUMNS: [&str; 3] = ["lag", "nvaf", "stderr"];

#[derive(Debug, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct CompareArgs {
    /// Empirical VAF CSV from `analyze` (lag,nvaf,stderr)
    #[arg(long)]
    pub empirical: Option<PathBuf>,
    /// Theory CSV from `curves`
    #[arg(long)]
    pub theory: Option<PathBuf>,
    /// Theory column [default: nvaf_seasonal if present, else nvaf_stationary]
    #[arg(long)]
    pub column: Option<String>,
    /// Report JSON to write [default: report.json]
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Manifest path [default: <out>.manifest.json]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Flat TOML file with defaults for any of these flags
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRun {
    pub empirical: PathBuf,
    pub theory: PathBuf,
    pub column: Option<String>,
    pub output: PathBuf,
    pub manifest: PathBuf,
}

impl CompareArgs {
    pub fn resolve(mut self) -> Result<CompareRun> {
        let file: CompareArgs = load_config(self.config.as_deref())?;
        fill_from!(self, file; empirical, theory, column, out, manifest);
        let output = self.out.unwrap_or_else(|| PathBuf::from("report.json"));
        Ok(CompareRun {
            empirical: required(self.empirical, "empirical")?,
            theory: required(self.theory, "theory")?,
            column: self.column,
            manifest: self.manifest.unwrap_or_else(|| default_manifest(&output)),
            output,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub lag: f64,
    pub empirical: f64,
    pub theory: f64,
    pub residual: f64,
    pub stderr: f64,
    /// Absent when the standard error is not positive.
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub version: String,
    pub theory_column: String,
    pub compared: usize,
    /// Empirical lags outside the theory grid.
    pub skipped: usize,
    pub chi_square: f64,
    pub dof: usize,
    pub chi_square_per_dof: f64,
    pub max_abs_z: f64,
    pub within_2sigma: f64,
    pub residuals: Vec<Residual>,
}

/// Linear interpolation on an increasing grid; `None` outside it.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let (&first, &last) = (xs.first()?, xs.last()?);
    if x < first || x > last {
        return None;
    }
    let i = xs.partition_point(|&g| g < x);
    if xs[i] == x {
        return Some(ys[i]);
    }
    let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

pub fn compare(empirical: &Table, theory: &Table, column: &str) -> Result<CompareReport> {
    let lags = theory.column("lag").unwrap_or_default();
    let values = theory.column(column).unwrap_or_default();
    let mut rows = Vec::new();
    let mut skipped = 0;
    for r in &empirical.rows {
        let (lag, value, se) = (r[0], r[1], r[2]);
        if !value.is_finite() {
            continue;
        }
        match interpolate(&lags, &values, lag) {
            Some(th) => {
                let residual = value - th;
                let z = (se.is_finite() && se > 0.0).then(|| residual / se);
                rows.push(Residual { lag, empirical: value, theory: th, residual, stderr: se, z });
            }
            None => skipped += 1,
        }
    }
    if rows.is_empty() {
        return Err(CliError::Validation(format!(
            "disjoint lag ranges: empirical lags do not fall inside the theory grid [{}, {}]",
            lags.first().unwrap_or(&f64::NAN),
            lags.last().unwrap_or(&f64::NAN)
        )));
    }
    let zs: Vec<f64> = rows.iter().filter_map(|r| r.z).collect();
    let chi_square: f64 = zs.iter().map(|z| z * z).sum();
    let dof = zs.len();
    Ok(CompareReport {
        version: VERSION.into(),
        theory_column: column.into(),
        compared: rows.len(),
        skipped,
        chi_square,
        dof,
        chi_square_per_dof: if dof > 0 { chi_square / dof as f64 } else { f64::NAN },
        max_abs_z: zs.iter().fold(0.0, |a, z| a.max(z.abs())),
        within_2sigma: if dof > 0 {
            zs.iter().filter(|z| z.abs() <= 2.0).count() as f64 / dof as f64
        } else {
            f64::NAN
        },
        residuals: rows,
    })
}

fn load(path: &Path) -> Result<(Table, crate::manifest::FileDigest)> {
    let (bytes, digest) = read_input(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::Schema { path: path.to_path_buf(), message: "not UTF-8".into() })?;
    Ok((Table::parse(&text, path)?, digest))
}

impl Run for CompareRun {
    const NAME: &'static str = "compare";

    fn manifest_path(&self) -> &Path {
        &self.manifest
    }

    fn execute(&self) -> Result<Execution> {
        let (empirical, d1) = load(&self.empirical)?;
        let (theory, d2) = load(&self.theory)?;
        if empirical.columns != EMPIRICAL_COLUMNS {
            return Err(CliError::Schema {
                path: self.empirical.clone(),
                message: format!(
                    "expected columns {}, found {}",
                    EMPIRICAL_COLUMNS.join(","),
                    empirical.columns.join(",")
                ),
            });
        }
        let column = match &self.column {
            Some(c) => c.clone(),
            None if theory.columns.iter().any(|c| c == "nvaf_seasonal") => "nvaf_seasonal".into(),
            None => "nvaf_stationary".into(),
        };
        if theory.columns.first().map(String::as_str) != Some("lag") || !theory.columns.contains(&column) {
            return Err(CliError::Schema {
                path: self.theory.clone(),
                message: format!("expected columns lag,...,{column}, found {}", theory.columns.join(",")),
            });
        }
        let lags = theory.column("lag").unwrap_or_default();
        if lags.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CliError::Schema {
                path: self.theory.clone(),
                message: "lags must be strictly increasing".into(),
            });
        }
        let report = compare(&empirical, &theory, &column)?;
        let mut json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Numeric(e.to_string()))?;
        json.push('\n');
        Ok(Execution {
            inputs: vec![d1, d2],
            artifacts: vec![Artifact { path: self.output.clone(), bytes: json.into_bytes() }],
            summary: format!(
                "{} lags compared: χ² = {:.2} on {} dof ({:.3} per dof), max |z| = {:.2}",
                report.compared, report.chi_square, report.dof, report.chi_square_per_dof, report.max_abs_z
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_hits_nodes_and_rejects_outside() {
        let xs = [1.0, 2.0, 4.0];
        let ys = [10.0, 20.0, 0.0];
        assert_eq!(interpolate(&xs, &ys, 2.0), Some(20.0));
        assert_eq!(interpolate(&xs, &ys, 3.0), Some(10.0));
        assert_eq!(interpolate(&xs, &ys, 1.0), Some(10.0));
        assert_eq!(interpolate(&xs, &ys, 0.5), None);
        assert_eq!(interpolate(&xs, &ys, 4.5), None);
    }
}
