//! Pair-counting estimator of the normalized VAF from event series.
//!
//! For lag bin `k ≥ 1` covering `[kΔ, (k+1)Δ)` the estimate is
//!
//! `Ĉ(k) = Σ R_i R_j / (Δ · W_k) − d²`,  `d = Σ R_i / T_obs`
//!
//! summed over ordered pairs `i < j` in the same series, where `W_k` is the
//! total length of first-event positions that still leave room for a partner
//! at lag `(k + ½)Δ` before the series ends (edge correction). The result is
//! normalized by `2⟨t̂⟩/M̂₂` with `⟨t̂⟩ = T_obs/N` and `M̂₂ = ΣR²/N`, so the
//! lag-zero weight is one by construction.
//!
//! With a seasonality model every magnitude is divided by the relative
//! intensity `λ(t_i)` at its time of day, which maps the pair density back to
//! operational time.
//!
//! Standard errors come from the spread of the same estimate over blocks:
//! each series is cut into equal time chunks that are dealt round-robin
//! into a fixed number of blocks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EventSeries;
use crate::analytic::VafCurve;
use crate::error::{Error, Result};
use crate::model::SeasonalityModel;
use crate::par::ordered_fold;

/// Blocks for the standard errors. With `B` blocks a 2σ band covers
/// `P(|t_{B−1}| ≤ 2)`: 95.0% at 64 blocks, 95.3% at 256.
pub const DEFAULT_BLOCKS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalNvaf {
    /// Bin centres `(k + ½)Δ` for `k = 1..K`.
    pub curve: VafCurve,
    pub stderr: Vec<f64>,
    pub bin_width: f64,
    pub n_events: usize,
    pub observed_time: f64,
    pub mean_wait: f64,
    pub m1: f64,
    pub m2: f64,
    pub drift: f64,
    pub blocks_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    pairs: Vec<f64>,
    window: Vec<f64>,
    sum_r: f64,
    sum_wr: f64,
    sum_r2: f64,
    n: usize,
    span: f64,
}

impl Block {
    fn new(n_bins: usize) -> Self {
        Block {
            pairs: vec![0.0; n_bins],
            window: vec![0.0; n_bins],
            sum_r: 0.0,
            sum_wr: 0.0,
            sum_r2: 0.0,
            n: 0,
            span: 0.0,
        }
    }

    fn absorb(&mut self, other: &Block) {
        for (a, b) in self.pairs.iter_mut().zip(&other.pairs) {
            *a += b;
        }
        for (a, b) in self.window.iter_mut().zip(&other.window) {
            *a += b;
        }
        self.sum_r += other.sum_r;
        self.sum_wr += other.sum_wr;
        self.sum_r2 += other.sum_r2;
        self.n += other.n;
        self.span += other.span;
    }

    /// `(nvaf per bin, mean wait, M1, M2, drift)`, or `None` when the block
    /// saw too little data.
    fn estimate(&self, bin_width: f64) -> Option<(Vec<f64>, f64, f64, f64, f64)> {
        if self.n < 2 || self.span <= 0.0 || self.sum_r2 <= 0.0 {
            return None;
        }
        let n = self.n as f64;
        let mean_wait = self.span / n;
        let m1 = self.sum_r / n;
        let m2 = self.sum_r2 / n;
        let drift = self.sum_wr / self.span;
        let norm = 2.0 * mean_wait / m2;
        let values = self
            .pairs
            .iter()
            .zip(&self.window)
            .skip(1)
            .map(|(p, w)| if *w > 0.0 { norm * (p / (bin_width * w) - drift * drift) } else { f64::NAN })
            .collect();
        Some((values, mean_wait, m1, m2, drift))
    }
}

/// Streaming accumulator; feed series with [`add_series`](Self::add_series)
/// or [`add_series_at`](Self::add_series_at), combine partial results with
/// [`merge`](Self::merge), then call [`finish`](Self::finish).
#[derive(Debug, Clone, PartialEq)]
pub struct NvafEstimator {
    bin_width: f64,
    /// Bins `0..n_bins`; bin 0 is accumulated but never reported.
    n_bins: usize,
    blocks: Vec<Block>,
    season: Option<SeasonalityModel>,
    chunks_per_series: usize,
    next_index: u64,
}

impl NvafEstimator {
    /// Requires `max_lag` to be a whole multiple (at least 2) of `bin_width`.
    pub fn new(bin_width: f64, max_lag: f64) -> Result<Self> {
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(Error::InvalidArgument(format!("bin width must be > 0, got {bin_width}")));
        }
        let ratio = max_lag / bin_width;
        if !ratio.is_finite() || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 2.0 {
            return Err(Error::InvalidArgument(format!(
                "max lag {max_lag} must be a multiple (>= 2) of the bin width {bin_width}"
            )));
        }
        let n_bins = ratio.round() as usize;
        Ok(NvafEstimator {
            bin_width,
            n_bins,
            blocks: vec![Block::new(n_bins); DEFAULT_BLOCKS],
            season: None,
            chunks_per_series: 1,
            next_index: 0,
        })
    }

    pub fn with_blocks(mut self, blocks: usize) -> Result<Self> {
        if blocks < 2 {
            return Err(Error::InvalidArgument("at least two blocks are needed for error bars".into()));
        }
        self.blocks = vec![Block::new(self.n_bins); blocks];
        Ok(self)
    }

    /// Deseasonalizes with the relative intensity of `season`, evaluated at
    /// the raw event times (taken as time of day).
    pub fn with_seasonality(mut self, season: SeasonalityModel) -> Result<Self> {
        season.validate()?;
        self.season = Some(season);
        Ok(self)
    }

    /// Number of equal time chunks each series is cut into before being
    /// dealt into blocks. Use more than one when there are few series.
    pub fn with_chunks_per_series(mut self, chunks: usize) -> Self {
        self.chunks_per_series = chunks.max(1);
        self
    }

    /// A fresh accumulator with the same settings and no data.
    pub fn empty_like(&self) -> Self {
        NvafEstimator { blocks: vec![Block::new(self.n_bins); self.blocks.len()], next_index: 0, ..self.clone() }
    }

    pub fn max_lag(&self) -> f64 {
        self.n_bins as f64 * self.bin_width
    }

    /// Adds a series, indexing it after the previously added ones.
    pub fn add_series(&mut self, series: &EventSeries) -> Result<()> {
        let index = self.next_index;
        self.add_series_at(index, series)
    }

    /// Adds a series with an explicit index; the index fixes which blocks
    /// its chunks land in, so results do not depend on arrival order.
    pub fn add_series_at(&mut self, index: u64, series: &EventSeries) -> Result<()> {
        series.validate()?;
        self.next_index = self.next_index.max(index + 1);
        let chunks = self.chunks_per_series;
        let width = series.duration() / chunks as f64;
        let weights: Vec<f64> = match &self.season {
            None => vec![1.0; series.len()],
            Some(season) => series.times.iter().map(|&t| 1.0 / season.relative_intensity(t)).collect(),
        };
        let partials: Vec<Block> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let lo = series.origin + c as f64 * width;
                let hi = if c + 1 == chunks { series.horizon } else { lo + width };
                self.chunk(series, &weights, lo, hi, c == 0)
            })
            .collect();
        let n_blocks = self.blocks.len() as u64;
        for (c, part) in partials.iter().enumerate() {
            let b = ((index * chunks as u64 + c as u64) % n_blocks) as usize;
            self.blocks[b].absorb(part);
        }
        Ok(())
    }

    #[allow(clippy::needless_range_loop)]
    fn chunk(&self, s: &EventSeries, w: &[f64], lo: f64, hi: f64, first: bool) -> Block {
        let mut block = Block::new(self.n_bins);
        let max_lag = self.max_lag();
        let start = if first { 0 } else { s.times.partition_point(|&t| t <= lo) };
        let end = s.times.partition_point(|&t| t <= hi);
        for i in start..end {
            let ti = s.times[i];
            let ri = s.jumps[i] * w[i];
            block.sum_r += s.jumps[i];
            block.sum_wr += ri;
            block.sum_r2 += s.jumps[i] * s.jumps[i];
            block.n += 1;
            for j in i + 1..s.len() {
                let lag = s.times[j] - ti;
                if lag >= max_lag {
                    break;
                }
                let k = (lag / self.bin_width) as usize;
                if k < self.n_bins {
                    block.pairs[k] += ri * s.jumps[j] * w[j];
                }
            }
        }
        block.span = hi - lo;
        for (k, win) in block.window.iter_mut().enumerate() {
            let lag = (k as f64 + 0.5) * self.bin_width;
            *win = ((s.horizon - lag).min(hi) - lo).max(0.0);
        }
        block
    }

    /// Combines two accumulators built with the same settings.
    pub fn merge(mut self, other: &NvafEstimator) -> Result<Self> {
        if self.n_bins != other.n_bins
            || self.bin_width != other.bin_width
            || self.blocks.len() != other.blocks.len()
            || self.season != other.season
        {
            return Err(Error::InvalidArgument("cannot merge estimators with different settings".into()));
        }
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            a.absorb(b);
        }
        self.next_index = self.next_index.max(other.next_index);
        Ok(self)
    }

    pub fn finish(&self) -> Result<EmpiricalNvaf> {
        let mut total = Block::new(self.n_bins);
        for b in &self.blocks {
            total.absorb(b);
        }
        if total.n < 2 {
            return Err(Error::Estimation(format!("need at least 2 events, got {}", total.n)));
        }
        let (values, mean_wait, m1, m2, drift) =
            total.estimate(self.bin_width).ok_or_else(|| Error::Estimation("all jump magnitudes are zero".into()))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Estimation("max lag exceeds the observation window".into()));
        }
        let per_block: Vec<Vec<f64>> =
            self.blocks.iter().filter_map(|b| b.estimate(self.bin_width)).map(|e| e.0).collect();
        let stderr = (0..values.len())
            .map(|k| {
                let xs: Vec<f64> = per_block.iter().map(|v| v[k]).filter(|x| x.is_finite()).collect();
                if xs.len() < 2 {
                    return f64::NAN;
                }
                let nb = xs.len() as f64;
                let mean = xs.iter().sum::<f64>() / nb;
                let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nb - 1.0);
                (var / nb).sqrt()
            })
            .collect();
        let lags = (1..self.n_bins).map(|k| (k as f64 + 0.5) * self.bin_width).collect();
        // lag-zero weight (⟨t̂⟩/M̂₂)·ΣR²/T_obs, one by construction
        let delta_weight = mean_wait * (total.sum_r2 / total.span) / m2;
        Ok(EmpiricalNvaf {
            curve: VafCurve::new(delta_weight, lags, values)?,
            stderr,
            bin_width: self.bin_width,
            n_events: total.n,
            observed_time: total.span,
            mean_wait,
            m1,
            m2,
            drift,
            blocks_used: per_block.len(),
        })
    }
}

/// Normalized VAF of a set of independent series (sessions, days or one
/// long trajectory) on bins of width `bin_width` up to `max_lag`.
pub fn empirical_nvaf(series: &[EventSeries], bin_width: f64, max_lag: f64) -> Result<EmpiricalNvaf> {
    if series.is_empty() {
        return Err(Error::Estimation("no series supplied".into()));
    }
    let base = NvafEstimator::new(bin_width, max_lag)?.with_chunks_per_series(DEFAULT_BLOCKS.div_ceil(series.len()));
    accumulate(&base, series)?.finish()
}

/// Feeds `series` into a copy of `base`, in parallel across series. The
/// result is bit-identical for any thread count.
pub fn accumulate(base: &NvafEstimator, series: &[EventSeries]) -> Result<NvafEstimator> {
    let offset = base.next_index;
    let acc = ordered_fold(
        series.len(),
        || base.empty_like(),
        |mut acc, i| {
            acc.add_series_at(offset + i as u64, &series[i])?;
            Ok(acc)
        },
        |a, b| a.merge(&b),
    )?;
    base.clone().merge(&acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grid_and_tiny_input() {
        assert!(NvafEstimator::new(0.0, 1.0).is_err());
        assert!(NvafEstimator::new(0.3, 1.0).is_err());
        assert!(NvafEstimator::new(0.5, 0.5).is_err());
        let one = EventSeries::new(vec![1.0], vec![1.0], 0.0, 10.0).unwrap();
        assert!(matches!(empirical_nvaf(&[one], 0.5, 2.0), Err(Error::Estimation(_))));
        assert!(empirical_nvaf(&[], 0.5, 2.0).is_err());
    }

    #[test]
    fn hand_counted_pairs() {
        // events at 1, 2, 3.5 with unit jumps on (0, 10]; Δ = 1, max lag 3
        let s = EventSeries::new(vec![1.0, 2.0, 3.5], vec![1.0, 1.0, 1.0], 0.0, 10.0).unwrap();
        let mut est = NvafEstimator::new(1.0, 3.0).unwrap().with_blocks(2).unwrap();
        est.add_series(&s).unwrap();
        let r = est.finish().unwrap();
        let d: f64 = 0.3;
        let norm = 2.0 * (10.0 / 3.0) / 1.0;
        // bin 1: lags 1.0 and 1.5, window 10 − 1.5; bin 2: lag 2.5, window 7.5
        assert!((r.curve.values[0] - norm * (2.0 / 8.5 - d * d)).abs() < 1e-12);
        assert!((r.curve.values[1] - norm * (1.0 / 7.5 - d * d)).abs() < 1e-12);
        assert!((r.curve.delta_weight - 1.0).abs() < 1e-12);
        assert_eq!(r.curve.lags, vec![1.5, 2.5]);
    }

    #[test]
    fn chunking_does_not_change_the_pooled_estimate() {
        let s = EventSeries::new(
            (1..200).map(|i| i as f64 * 0.37 + (i % 7) as f64 * 0.01).collect(),
            (1..200).map(|i| 1.0 + (i % 3) as f64).collect(),
            0.0,
            74.0,
        )
        .unwrap();
        let mut a = NvafEstimator::new(0.25, 2.0).unwrap();
        a.add_series(&s).unwrap();
        let mut b = NvafEstimator::new(0.25, 2.0).unwrap().with_chunks_per_series(16);
        b.add_series(&s).unwrap();
        let (ra, rb) = (a.finish().unwrap(), b.finish().unwrap());
        for (x, y) in ra.curve.values.iter().zip(&rb.curve.values) {
            assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
        }
        assert_eq!(rb.blocks_used, 16);
    }

    #[test]
    fn merge_matches_sequential() {
        let days: Vec<EventSeries> = (0..6)
            .map(|d| {
                EventSeries::new(
                    (1..50).map(|i| i as f64 * (0.9 + 0.01 * d as f64)).collect(),
                    (1..50).map(|i| ((i * (d + 2)) % 5 + 1) as f64).collect(),
                    0.0,
                    50.0,
                )
                .unwrap()
            })
            .collect();
        let base = NvafEstimator::new(0.5, 3.0).unwrap().with_blocks(4).unwrap();
        let mut seq = base.clone();
        for d in &days {
            seq.add_series(d).unwrap();
        }
        let par = accumulate(&base, &days).unwrap();
        let (x, y) = (seq.finish().unwrap(), par.finish().unwrap());
        for (a, b) in x.curve.values.iter().zip(&y.curve.values) {
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }
        for (a, b) in x.stderr.iter().zip(&y.stderr) {
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }
    }
}
