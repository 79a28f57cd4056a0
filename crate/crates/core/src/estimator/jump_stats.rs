use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EPSILON_MAX;

/// Largest memory parameter an estimate is clamped to.
pub const EPSILON_CLAMP: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpStats {
    pub m1: f64,
    pub m2: f64,
    /// M₁²/M₂.
    pub m: f64,
    /// Lag-1 Pearson autocorrelation of the magnitudes, clamped to
    /// `[0, 1 − 10⁻⁶]`; zero when `degenerate`.
    pub epsilon: f64,
    /// Raw (unclamped) lag-1 correlation, `NaN` when undefined.
    pub raw_correlation: f64,
    /// All magnitudes equal: the correlation is undefined and M = 1.
    pub degenerate: bool,
    pub n: usize,
}

/// Moments and memory parameter of a magnitude sequence.
pub fn estimate_jump_stats(jumps: &[f64]) -> Result<JumpStats> {
    estimate_jump_stats_sessions(&[jumps])
}

/// As [`estimate_jump_stats`], pooling several sessions. Lag-1 pairs never
/// straddle two sessions.
pub fn estimate_jump_stats_sessions(sessions: &[&[f64]]) -> Result<JumpStats> {
    let n: usize = sessions.iter().map(|s| s.len()).sum();
    if n < 2 {
        return Err(Error::Estimation(format!("need at least 2 jumps, got {n}")));
    }
    if sessions.iter().flat_map(|s| s.iter()).any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::InvalidArgument("jump magnitudes must be finite and >= 0".into()));
    }
    let nf = n as f64;
    let m1 = sessions.iter().flat_map(|s| s.iter()).sum::<f64>() / nf;
    let m2 = sessions.iter().flat_map(|s| s.iter()).map(|r| r * r).sum::<f64>() / nf;
    if m2 <= 0.0 {
        return Err(Error::Estimation("all jump magnitudes are zero".into()));
    }
    let m = (m1 * m1 / m2).min(1.0);

    // Pearson correlation of (x_i, x_{i+1}) pairs
    let pairs = || sessions.iter().flat_map(|s| s.windows(2).map(|w| (w[0], w[1])));
    let n_pairs = pairs().count();
    if n_pairs == 0 {
        return Err(Error::Estimation("no consecutive jumps within a session".into()));
    }
    let np = n_pairs as f64;
    let (sx, sy) = pairs().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / np, sy / np);
    let (mut cxy, mut cxx, mut cyy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs() {
        cxy += (x - mx) * (y - my);
        cxx += (x - mx) * (x - mx);
        cyy += (y - my) * (y - my);
    }
    let scale = m2.max(f64::MIN_POSITIVE) * np;
    let degenerate = cxx <= 1e-24 * scale || cyy <= 1e-24 * scale;
    let raw = if degenerate { f64::NAN } else { cxy / (cxx * cyy).sqrt() };
    let epsilon = if degenerate { 0.0 } else { raw.clamp(0.0, EPSILON_CLAMP.min(EPSILON_MAX)) };
    Ok(JumpStats { m1, m2, m: if degenerate { 1.0 } else { m }, epsilon, raw_correlation: raw, degenerate, n })
}

/// Sample autocorrelation at lags `1..=max_lag` (in steps), normalized by the
/// lag-zero sum: `ρ_k = Σ (x_i − x̄)(x_{i+k} − x̄) / Σ (x_i − x̄)²`.
pub fn lag_autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag == 0 || series.len() <= max_lag {
        return Err(Error::InvalidArgument(format!(
            "series of length {} is too short for lag {max_lag}",
            series.len()
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("series contains non-finite values".into()));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0: f64 = dev.iter().map(|d| d * d).sum();
    if c0 <= 1e-300 || c0 <= 1e-24 * series.iter().map(|x| x * x).sum::<f64>() {
        return Err(Error::Estimation("autocorrelation undefined for a constant series".into()));
    }
    Ok((1..=max_lag).map(|k| dev.iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / c0).collect())
}
