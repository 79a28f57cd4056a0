use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optim::least_squares;
use crate::error::{Error, Result};
use crate::model::SeasonalityModel;
use crate::par::ordered_fold;
use crate::simulator::EventSeries;

/// Fits with `q` beyond this many `T²` are reported as flat.
pub const FLAT_Q_FACTOR: f64 = 100.0;
/// Upper bound on `q` during the fit, in units of `T²`.
pub const MAX_Q_FACTOR: f64 = 1e6;

/// Mean intertrade time per time-of-day bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketMeans {
    /// Mean start time of the waits in each (possibly merged) bucket.
    pub times: Vec<f64>,
    pub means: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalityFit {
    pub model: SeasonalityModel,
    pub buckets: BucketMeans,
    pub residual_norm: f64,
    /// `q̂` ran to the flat limit: no significant intraday pattern.
    pub flat: bool,
}

/// Buckets every wait by the time of day at which it starts. Empty buckets
/// are merged into the next non-empty one; trailing empty buckets vanish.
pub fn bucket_means(sessions: &[EventSeries], day_length: f64, n_buckets: usize) -> Result<BucketMeans> {
    if n_buckets < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 buckets, got {n_buckets}")));
    }
    if !(day_length.is_finite() && day_length > 0.0) {
        return Err(Error::InvalidArgument(format!("day length must be > 0, got {day_length}")));
    }
    let width = day_length / n_buckets as f64;
    let zero = || (vec![0.0; n_buckets], vec![0.0; n_buckets], vec![0u64; n_buckets]);
    let (sum_w, sum_t, counts) = ordered_fold(
        sessions.len(),
        zero,
        |(mut sw, mut st, mut c), i| {
            let s = &sessions[i];
            let mut start = s.origin;
            for &t in &s.times {
                let b = ((start / width) as usize).min(n_buckets - 1);
                sw[b] += t - start;
                st[b] += start;
                c[b] += 1;
                start = t;
            }
            Ok::<_, Error>((sw, st, c))
        },
        |(mut a, mut b, mut c), (x, y, z)| {
            for i in 0..n_buckets {
                a[i] += x[i];
                b[i] += y[i];
                c[i] += z[i];
            }
            Ok((a, b, c))
        },
    )?;
    let mut out = BucketMeans { times: Vec::new(), means: Vec::new(), counts: Vec::new() };
    let (mut acc_w, mut acc_t, mut acc_c) = (0.0, 0.0, 0u64);
    for i in 0..n_buckets {
        acc_w += sum_w[i];
        acc_t += sum_t[i];
        acc_c += counts[i];
        if acc_c > 0 {
            out.times.push(acc_t / acc_c as f64);
            out.means.push(acc_w / acc_c as f64);
            out.counts.push(acc_c);
            (acc_w, acc_t, acc_c) = (0.0, 0.0, 0);
        }
    }
    if out.counts.is_empty() {
        return Err(Error::Fit("every time-of-day bucket is empty".into()));
    }
    Ok(out)
}

fn unpack(x: &[f64], day: f64) -> (f64, f64, f64) {
    let p = day / (1.0 + (-x[0].clamp(-40.0, 40.0)).exp());
    let q = x[1].min((MAX_Q_FACTOR * day * day).ln()).exp();
    let a = x[2].clamp(-700.0, 700.0).exp();
    (p, q, a)
}

/// Least-squares fit of `θ(t) = 1/(a[(t − p)² + q])` to the bucket means,
/// with `p ∈ [0, T]` and `q > 0`. Residuals are weighted by √count.
pub fn fit_seasonality(sessions: &[EventSeries], day_length: f64, n_buckets: usize) -> Result<SeasonalityFit> {
    if sessions.is_empty() {
        return Err(Error::InvalidArgument("need at least one session".into()));
    }
    let buckets = bucket_means(sessions, day_length, n_buckets)?;
    if buckets.means.len() < 3 {
        return Err(Error::Fit(format!(
            "only {} non-empty time-of-day buckets; three are needed",
            buckets.means.len()
        )));
    }
    let overall = buckets.means.iter().zip(&buckets.counts).map(|(m, c)| m * *c as f64).sum::<f64>()
        / buckets.counts.iter().sum::<u64>() as f64;
    if !(overall > 0.0) {
        return Err(Error::Fit("all waits are zero".into()));
    }
    let weights: Vec<f64> = buckets.counts.iter().map(|&c| (c as f64).sqrt() / overall).collect();
    let residuals = |x: &[f64]| -> Option<Vec<f64>> {
        let (p, q, a) = unpack(x, day_length);
        Some(
            buckets
                .times
                .iter()
                .zip(&buckets.means)
                .zip(&weights)
                .map(|((&t, &m), &w)| w * (1.0 / (a * ((t - p).powi(2) + q)) - m))
                .collect(),
        )
    };

    // start from the peak of the bucket means and the curvature it implies
    let (imax, &peak) = buckets.means.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let (imin, &low) = buckets.means.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let p_starts = [buckets.times[imax], 0.5 * day_length];
    let ratio = peak / low.max(f64::MIN_POSITIVE);
    let d2 = (buckets.times[imin] - buckets.times[imax]).powi(2).max((0.25 * day_length).powi(2));
    let q_curv = if ratio > 1.0 + 1e-3 { d2 / (ratio - 1.0) } else { MAX_Q_FACTOR * day_length * day_length };
    let q_starts = [q_curv, day_length * day_length];

    let mut starts = Vec::new();
    for &p0 in &p_starts {
        for &q0 in &q_starts {
            let p0 = p0.clamp(1e-3 * day_length, (1.0 - 1e-3) * day_length);
            let a0 = 1.0 / (peak * q0);
            starts.push([(p0 / (day_length - p0)).ln(), q0.ln(), a0.ln()]);
        }
    }
    let best = starts
        .par_iter()
        .filter_map(|x0| least_squares(&residuals, x0))
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .ok_or_else(|| Error::Fit("seasonality fit could not be evaluated".into()))?;
    let (p, q, a) = unpack(&best.x, day_length);
    let model = SeasonalityModel::new(p, q, day_length, a)?;
    Ok(SeasonalityFit {
        model,
        buckets,
        residual_norm: best.cost.sqrt(),
        flat: q > FLAT_Q_FACTOR * day_length * day_length,
    })
}
