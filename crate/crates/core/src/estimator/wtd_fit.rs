use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optim::{least_squares, LsFit};
use crate::error::{Error, Result};
use crate::model::WaitingTimeModel;

pub const MIN_WAITS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinScale {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualScale {
    /// Residuals on the density itself.
    #[default]
    Density,
    /// Residuals on ln(density); empty bins are skipped.
    LogDensity,
}

/// How histogram bins are weighted in the density residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinWeighting {
    /// Each residual divided by its Poisson standard error √max(count, 1).
    #[default]
    Poisson,
    /// Plain residuals.
    Uniform,
}

/// Histogram layout. Unset bounds default to `0.01·mean` (log) or `0`
/// (linear) below and the largest wait above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub n_bins: usize,
    pub scale: BinScale,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    #[serde(default)]
    pub residuals: ResidualScale,
    #[serde(default)]
    pub weighting: BinWeighting,
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec {
            n_bins: 60,
            scale: BinScale::Log,
            lower: None,
            upper: None,
            residuals: ResidualScale::Density,
            weighting: BinWeighting::Poisson,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// Counts divided by (total waits × bin width).
    pub density: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: usize,
}

impl Histogram {
    pub fn build(waits: &[f64], spec: &BinSpec) -> Result<Self> {
        if spec.n_bins < 4 {
            return Err(Error::InvalidArgument(format!("need at least 4 bins, got {}", spec.n_bins)));
        }
        if waits.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("waits must be finite and >= 0".into()));
        }
        let mean = waits.iter().sum::<f64>() / waits.len() as f64;
        let max = waits.iter().copied().fold(0.0, f64::max);
        let lower = spec.lower.unwrap_or(match spec.scale {
            BinScale::Log => 0.01 * mean,
            BinScale::Linear => 0.0,
        });
        let upper = spec.upper.unwrap_or(max);
        let bad_log = spec.scale == BinScale::Log && lower <= 0.0;
        if !(lower.is_finite() && upper.is_finite() && upper > lower && lower >= 0.0) || bad_log {
            return Err(Error::InvalidArgument(format!("bad histogram range [{lower}, {upper}]")));
        }
        let n = spec.n_bins;
        let edges: Vec<f64> = (0..=n)
            .map(|i| {
                let f = i as f64 / n as f64;
                match spec.scale {
                    BinScale::Log => lower * (upper / lower).powf(f),
                    BinScale::Linear => lower + (upper - lower) * f,
                }
            })
            .collect();
        let mut counts = vec![0u64; n];
        for &w in waits {
            if w < lower || w > upper {
                continue;
            }
            let i = edges.partition_point(|&e| e <= w).saturating_sub(1).min(n - 1);
            counts[i] += 1;
        }
        let total = waits.len();
        let density =
            counts.iter().enumerate().map(|(i, &c)| c as f64 / (total as f64 * (edges[i + 1] - edges[i]))).collect();
        Ok(Histogram { edges, density, counts, total })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WtdFitDiagnostics {
    pub bins: BinSpec,
    pub lower: f64,
    pub upper: f64,
    /// Euclidean norm of the residual vector at the optimum.
    pub residual_norm: f64,
    pub n_waits: usize,
    pub n_binned: u64,
    pub starts: usize,
    pub converged_starts: usize,
    /// Components nearly coincide or one weight is negligible; the data
    /// does not support two exponentials.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WtdFit {
    pub model: WaitingTimeModel,
    pub diagnostics: WtdFitDiagnostics,
}

fn unpack(x: &[f64], mean: f64) -> (f64, f64, f64) {
    let lo = (1e-6 * mean).ln();
    let hi = (1e6 * mean).ln();
    let t1 = x[0].clamp(lo, hi).exp();
    let t2 = x[1].clamp(lo, hi).exp();
    let w = 1.0 / (1.0 + (-x[2].clamp(-40.0, 40.0)).exp());
    (t1, t2, w)
}

fn mixture_cdf(t: f64, t1: f64, t2: f64, w: f64) -> f64 {
    // 1 − S(t), written with exp_m1 to keep precision at small t
    -(w * (-t / t1).exp_m1() + (1.0 - w) * (-t / t2).exp_m1())
}

/// Least-squares fit of the double-exponential density to a histogram of
/// `waits`. The model enters as its exact bin average, so wide log bins
/// carry no discretization bias. Several starts run in parallel and the
/// best is kept; components are relabelled so that `τ₁ ≤ τ₂`.
pub fn fit_wtd(waits: &[f64], spec: &BinSpec) -> Result<WtdFit> {
    if waits.len() < MIN_WAITS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_WAITS} waits for a WTD fit, got {}",
            waits.len()
        )));
    }
    let hist = Histogram::build(waits, spec)?;
    let mean = waits.iter().sum::<f64>() / waits.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::InvalidArgument("all waits are zero".into()));
    }
    let log_res = spec.residuals == ResidualScale::LogDensity;
    // standard error of each bin's density (or log-density) under Poisson counts
    let sigma: Vec<f64> = match spec.weighting {
        BinWeighting::Uniform => vec![1.0; hist.counts.len()],
        BinWeighting::Poisson => hist
            .counts
            .iter()
            .zip(hist.edges.windows(2))
            .map(|(&c, e)| {
                let c = (c as f64).max(1.0);
                if log_res {
                    1.0 / c.sqrt()
                } else {
                    c.sqrt() / (hist.total as f64 * (e[1] - e[0]))
                }
            })
            .collect(),
    };
    let residuals = |x: &[f64]| -> Option<Vec<f64>> {
        let (t1, t2, w) = unpack(x, mean);
        let mut out = Vec::with_capacity(hist.density.len());
        for (i, &d) in hist.density.iter().enumerate() {
            let (a, b) = (hist.edges[i], hist.edges[i + 1]);
            let model = (mixture_cdf(b, t1, t2, w) - mixture_cdf(a, t1, t2, w)) / (b - a);
            if log_res {
                if hist.counts[i] > 0 {
                    out.push((model.max(1e-300).ln() - d.ln()) / sigma[i]);
                }
            } else {
                out.push((model - d) / sigma[i]);
            }
        }
        Some(out)
    };

    let mut starts = Vec::new();
    for f1 in [0.1, 0.3] {
        for f2 in [1.5, 3.0] {
            for w in [0.25f64, 0.5, 0.75] {
                starts.push([(f1 * mean).ln(), (f2 * mean).ln(), (w / (1.0 - w)).ln()]);
            }
        }
    }
    let fits: Vec<LsFit> = starts.par_iter().filter_map(|x0| least_squares(&residuals, x0)).collect();
    let converged_starts = fits.iter().filter(|f| f.converged).count();
    let best = fits.iter().filter(|f| f.converged).min_by(|a, b| a.cost.total_cmp(&b.cost)).ok_or_else(|| {
        Error::Fit(format!(
            "no start converged ({} of {} evaluated; histogram {} bins on [{:.4e}, {:.4e}])",
            fits.len(),
            starts.len(),
            spec.n_bins,
            hist.edges[0],
            hist.edges[spec.n_bins]
        ))
    })?;
    let (mut t1, mut t2, mut w) = unpack(&best.x, mean);
    if t1 > t2 {
        std::mem::swap(&mut t1, &mut t2);
        w = 1.0 - w;
    }
    let degenerate = (t2 - t1) / t2 < 0.05 || !(0.01..=0.99).contains(&w);
    let model = WaitingTimeModel::double_exponential(t1, t2, w)?;
    Ok(WtdFit {
        model,
        diagnostics: WtdFitDiagnostics {
            bins: *spec,
            lower: hist.edges[0],
            upper: hist.edges[spec.n_bins],
            residual_norm: best.cost.sqrt(),
            n_waits: waits.len(),
            n_binned: hist.counts.iter().sum(),
            starts: starts.len(),
            converged_starts,
            degenerate,
        },
    })
}
