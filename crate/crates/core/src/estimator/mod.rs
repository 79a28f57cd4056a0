//! Parameter estimation from tick data: waits and jump magnitudes, the
//! double-exponential WTD, the intraday pattern, moments, the memory
//! parameter and the empirical VAF.

mod jump_stats;
mod optim;
mod seasonality_fit;
mod ticks;
mod wtd_fit;

pub use jump_stats::{
    estimate_jump_stats, estimate_jump_stats_sessions, lag_autocorrelation, JumpStats, EPSILON_CLAMP,
};
pub use seasonality_fit::{bucket_means, fit_seasonality, BucketMeans, SeasonalityFit, FLAT_Q_FACTOR};
pub use ticks::{ingest_ticks, parse_ticks, session_events, write_ticks, Session, TickRecord, ZeroPolicy, HEADER};
pub use wtd_fit::{
    fit_wtd, BinScale, BinSpec, BinWeighting, Histogram, ResidualScale, WtdFit, WtdFitDiagnostics, MIN_WAITS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SeasonalityModel, WaitingTimeModel};
use crate::simulator::{accumulate, EmpiricalNvaf, EventSeries, NvafEstimator, DEFAULT_BLOCKS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalityDiagnostics {
    pub n_buckets: usize,
    pub residual_norm: f64,
    /// No significant intraday pattern was found.
    pub flat: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub wtd: WtdFitDiagnostics,
    pub seasonality: Option<SeasonalityDiagnostics>,
    /// Waits were mapped to operational time with the fitted pattern
    /// before the WTD fit.
    pub deseasonalized_waits: bool,
    pub jumps_degenerate: bool,
    pub raw_correlation: f64,
    pub n_events: usize,
    pub n_sessions: usize,
    pub observed_time: f64,
}

/// Everything the closed-form curves need, plus how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub wtd: WaitingTimeModel,
    pub epsilon: f64,
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M2")]
    pub m2: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub seasonality: Option<SeasonalityModel>,
    pub fit_diagnostics: Option<FitDiagnostics>,
}

impl FittedModel {
    pub fn validate(&self) -> Result<()> {
        self.wtd.validate()?;
        if let Some(s) = &self.seasonality {
            s.validate()?;
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidModel(format!("epsilon must lie in [0, 1), got {}", self.epsilon)));
        }
        if !(self.m1 > 0.0 && self.m2 > 0.0 && self.m1.is_finite() && self.m2.is_finite()) {
            return Err(Error::InvalidModel("M1 and M2 must be finite and > 0".into()));
        }
        let m = self.m1 * self.m1 / self.m2;
        if m > 1.0 + 1e-9 || (m - self.m).abs() > 1e-9 * m.max(1.0) {
            return Err(Error::InvalidModel(format!("M = {} is inconsistent with M1²/M2 = {m}", self.m)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numeric(format!("JSON encoding: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: FittedModel =
            serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonalOptions {
    pub day_length: f64,
    pub n_buckets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub bins: BinSpec,
    pub seasonality: Option<SeasonalOptions>,
    pub vaf_bin_width: f64,
    pub vaf_max_lag: f64,
    pub vaf_blocks: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            bins: BinSpec::default(),
            seasonality: None,
            vaf_bin_width: 1.0,
            vaf_max_lag: 100.0,
            vaf_blocks: DEFAULT_BLOCKS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub model: FittedModel,
    pub vaf: EmpiricalNvaf,
    pub seasonality_fit: Option<SeasonalityFit>,
}

/// Runs the whole estimation on a set of sessions.
pub fn analyze(sessions: &[EventSeries], opts: &AnalysisOptions) -> Result<Analysis> {
    if sessions.is_empty() {
        return Err(Error::Estimation("no sessions to analyze".into()));
    }
    let n_events: usize = sessions.iter().map(|s| s.len()).sum();
    if n_events < 2 {
        return Err(Error::Estimation(format!("need at least 2 events, got {n_events}")));
    }
    let season_fit = match &opts.seasonality {
        Some(o) => Some(fit_seasonality(sessions, o.day_length, o.n_buckets)?),
        None => None,
    };
    let season = season_fit.as_ref().filter(|f| !f.flat).map(|f| f.model);

    let waits: Vec<f64> = sessions
        .iter()
        .flat_map(|s| {
            let mut start = s.origin;
            s.times.iter().map(move |&t| {
                let w = t - start;
                let out = match &season {
                    Some(m) => w * m.relative_intensity(start),
                    None => w,
                };
                start = t;
                out
            })
        })
        .collect();
    let wtd = fit_wtd(&waits, &opts.bins)?;

    let jump_slices: Vec<&[f64]> = sessions.iter().map(|s| s.jumps.as_slice()).collect();
    let stats = estimate_jump_stats_sessions(&jump_slices)?;

    let mut base = NvafEstimator::new(opts.vaf_bin_width, opts.vaf_max_lag)?
        .with_blocks(opts.vaf_blocks)?
        .with_chunks_per_series(opts.vaf_blocks.div_ceil(sessions.len()));
    if let Some(m) = season {
        base = base.with_seasonality(m)?;
    }
    let vaf = accumulate(&base, sessions)?.finish()?;

    let model = FittedModel {
        wtd: wtd.model,
        epsilon: stats.epsilon,
        m1: stats.m1,
        m2: stats.m2,
        m: stats.m,
        seasonality: season_fit.as_ref().map(|f| f.model),
        fit_diagnostics: Some(FitDiagnostics {
            wtd: wtd.diagnostics,
            seasonality: season_fit.as_ref().map(|f| SeasonalityDiagnostics {
                n_buckets: opts.seasonality.map_or(0, |o| o.n_buckets),
                residual_norm: f.residual_norm,
                flat: f.flat,
            }),
            deseasonalized_waits: season.is_some(),
            jumps_degenerate: stats.degenerate,
            raw_correlation: stats.raw_correlation,
            n_events,
            n_sessions: sessions.len(),
            observed_time: sessions.iter().map(|s| s.duration()).sum(),
        }),
    };
    Ok(Analysis { model, vaf, seasonality_fit: season_fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitted_model_json_round_trip() {
        let m = FittedModel {
            wtd: WaitingTimeModel::double_exponential(3.63, 32.57, 0.586).unwrap(),
            epsilon: 0.258,
            m1: 1.0,
            m2: 1.0 / 0.269,
            m: 0.269,
            seasonality: Some(SeasonalityModel::new(14986.0, 2.25e8, 28800.0, 1e-9).unwrap()),
            fit_diagnostics: None,
        };
        let text = m.to_json().unwrap();
        assert!(text.contains("\"M\": 0.269"));
        assert_eq!(FittedModel::from_json(&text).unwrap(), m);
        let bad = text.replace("0.258", "1.5");
        assert!(FittedModel::from_json(&bad).is_err());
        assert!(matches!(FittedModel::from_json("{"), Err(Error::Parse { .. })));
    }

    #[test]
    fn empty_input_is_an_estimation_error() {
        assert!(matches!(analyze(&[], &AnalysisOptions::default()), Err(Error::Estimation(_))));
        let one = EventSeries::new(vec![1.0], vec![1.0], 0.0, 2.0).unwrap();
        assert!(matches!(analyze(&[one], &AnalysisOptions::default()), Err(Error::Estimation(_))));
    }
}
