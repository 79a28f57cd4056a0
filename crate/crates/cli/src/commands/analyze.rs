use std::path::{Path, PathBuf};

use clap::Args;
use dctrw::estimator::{
    analyze, ingest_ticks, AnalysisOptions, BinScale, BinSpec, BinWeighting, ResidualScale, SeasonalOptions, ZeroPolicy,
};
use dctrw::simulator::DEFAULT_BLOCKS;
use serde::{Deserialize, Serialize};

use super::{
    default_manifest, fill_from, load_config, read_input, Artifact, Execution, Residuals, Run, Scale, Weighting, Zeros,
};
use crate::error::{CliError, Result};
use crate::table::Table;

#[derive(Debug, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct AnalyzeArgs {
    /// Tick CSV files; their sessions are pooled in the order given
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    /// Treatment of trades that leave the price unchanged [default: drop]
    #[arg(long, value_enum)]
    pub zeros: Option<Zeros>,
    /// Fit the intraday pattern and deseasonalize waits and the VAF
    #[arg(long)]
    #[serde(default)]
    pub seasonality: bool,
    /// Trading-day length, required with --seasonality
    #[arg(long)]
    pub day_length: Option<f64>,
    /// Time-of-day buckets for the seasonality fit [default: 48]
    #[arg(long)]
    pub buckets: Option<usize>,
    /// Histogram bins for the waiting-time fit [default: 60]
    #[arg(long)]
    pub bins: Option<usize>,
    /// Histogram spacing [default: log]
    #[arg(long, value_enum)]
    pub bin_scale: Option<Scale>,
    /// Lowest histogram edge [default: 0.01 × mean wait (log), 0 (linear)]
    #[arg(long)]
    pub bin_lower: Option<f64>,
    /// Highest histogram edge [default: longest wait]
    #[arg(long)]
    pub bin_upper: Option<f64>,
    /// Residuals on the density or its logarithm [default: density]
    #[arg(long, value_enum)]
    pub residuals: Option<Residuals>,
    /// Bin weighting in the fit [default: poisson]
    #[arg(long, value_enum)]
    pub weighting: Option<Weighting>,
    /// Lag bin width of the empirical VAF [default: 1]
    #[arg(long)]
    pub vaf_bin: Option<f64>,
    /// Largest lag of the empirical VAF, a multiple of --vaf-bin [default: 100]
    #[arg(long)]
    pub vaf_max_lag: Option<f64>,
    /// Blocks for the VAF standard errors [default: 256]
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Fitted model JSON to write [default: model.json]
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Empirical VAF CSV to write [default: vaf.csv]
    #[arg(long)]
    pub vaf_out: Option<PathBuf>,
    /// Manifest path [default: <model-out>.manifest.json]
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Flat TOML file with defaults for any of these flags
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeRun {
    pub inputs: Vec<PathBuf>,
    pub zeros: ZeroPolicy,
    pub options: AnalysisOptions,
    pub model_output: PathBuf,
    pub vaf_output: PathBuf,
    pub manifest: PathBuf,
}

impl AnalyzeArgs {
    pub fn resolve(mut self) -> Result<AnalyzeRun> {
        let file: AnalyzeArgs = load_config(self.config.as_deref())?;
        fill_from!(self, file; zeros, day_length, buckets, bins, bin_scale, bin_lower, bin_upper, residuals,
            weighting, vaf_bin, vaf_max_lag, blocks, model_out, vaf_out, manifest);
        if self.inputs.is_empty() {
            self.inputs = file.inputs;
        }
        self.seasonality |= file.seasonality;
        if self.inputs.is_empty() {
            return Err(CliError::Validation("no input files".into()));
        }
        let seasonality = match (self.seasonality, self.day_length) {
            (true, Some(day_length)) => Some(SeasonalOptions { day_length, n_buckets: self.buckets.unwrap_or(48) }),
            (true, None) => return Err(CliError::Validation("--seasonality needs --day-length".into())),
            (false, _) => None,
        };
        let bins = BinSpec {
            n_bins: self.bins.unwrap_or(BinSpec::default().n_bins),
            scale: match self.bin_scale.unwrap_or(Scale::Log) {
                Scale::Log => BinScale::Log,
                Scale::Linear => BinScale::Linear,
            },
            lower: self.bin_lower,
            upper: self.bin_upper,
            residuals: match self.residuals.unwrap_or(Residuals::Density) {
                Residuals::Density => ResidualScale::Density,
                Residuals::LogDensity => ResidualScale::LogDensity,
            },
            weighting: match self.weighting.unwrap_or(Weighting::Poisson) {
                Weighting::Poisson => BinWeighting::Poisson,
                Weighting::Uniform => BinWeighting::Uniform,
            },
        };
        let defaults = AnalysisOptions::default();
        let model_output = self.model_out.unwrap_or_else(|| PathBuf::from("model.json"));
        Ok(AnalyzeRun {
            inputs: self.inputs,
            zeros: match self.zeros.unwrap_or(Zeros::Drop) {
                Zeros::Drop => ZeroPolicy::Drop,
                Zeros::Keep => ZeroPolicy::Keep,
            },
            options: AnalysisOptions {
                bins,
                seasonality,
                vaf_bin_width: self.vaf_bin.unwrap_or(defaults.vaf_bin_width),
                vaf_max_lag: self.vaf_max_lag.unwrap_or(defaults.vaf_max_lag),
                vaf_blocks: self.blocks.unwrap_or(DEFAULT_BLOCKS),
            },
            vaf_output: self.vaf_out.unwrap_or_else(|| PathBuf::from("vaf.csv")),
            manifest: self.manifest.unwrap_or_else(|| default_manifest(&model_output)),
            model_output,
        })
    }
}

impl Run for AnalyzeRun {
    const NAME: &'static str = "analyze";

    fn manifest_path(&self) -> &Path {
        &self.manifest
    }

    fn execute(&self) -> Result<Execution> {
        let mut digests = Vec::new();
        let mut sessions = Vec::new();
        for path in &self.inputs {
            let (bytes, digest) = read_input(path)?;
            let series = ingest_ticks(bytes.as_slice(), self.zeros).map_err(|e| CliError::in_file(path, e))?;
            if series.iter().all(|s| s.is_empty()) {
                return Err(CliError::Schema { path: path.clone(), message: "no price changes found".into() });
            }
            digests.push(digest);
            sessions.extend(series);
        }
        let result = analyze(&sessions, &self.options)?;
        let m = &result.model;

        let mut model_json = m.to_json()?;
        model_json.push('\n');

        let vaf = &result.vaf;
        let mut table = Table::new(&["lag", "nvaf", "stderr"])
            .meta("delta_weight", vaf.curve.delta_weight)
            .meta("bin_width", vaf.bin_width)
            .meta("n_events", vaf.n_events)
            .meta("observed_time", vaf.observed_time)
            .meta("blocks", vaf.blocks_used)
            .meta("deseasonalized", m.fit_diagnostics.as_ref().is_some_and(|d| d.deseasonalized_waits));
        for ((lag, v), se) in vaf.curve.lags.iter().zip(&vaf.curve.values).zip(&vaf.stderr) {
            table.rows.push(vec![*lag, *v, *se]);
        }

        let tau = m.wtd.components().iter().map(|(_, t)| format!("{t:.4}")).collect::<Vec<_>>().join(", ");
        let mut summary = format!(
            "{} events in {} session(s): τ = [{tau}], ε = {:.4}, M = {:.4}",
            vaf.n_events,
            sessions.len(),
            m.epsilon,
            m.m
        );
        if let Some(s) = &m.seasonality {
            summary.push_str(&format!(", p = {:.1}, q = {:.4e}", s.p, s.q));
        }
        Ok(Execution {
            inputs: digests,
            artifacts: vec![
                Artifact { path: self.model_output.clone(), bytes: model_json.into_bytes() },
                Artifact { path: self.vaf_output.clone(), bytes: table.to_csv().into_bytes() },
            ],
            summary,
        })
    }
}
