//! Event-driven Monte Carlo for the directed walk.
//!
//! Each trajectory draws a first wait (equilibrium or ordinary), then i.i.d.
//! waits from ψ. Jump magnitudes follow the one-step memory kernel: with
//! probability ε the previous magnitude is repeated, otherwise a fresh draw
//! from H is taken. Every trajectory owns an independent ChaCha stream keyed
//! by `(seed, stream)`, so runs are reproducible and parallel-safe.

mod empirical_vaf;
mod ensemble;

pub use empirical_vaf::{accumulate, empirical_nvaf, EmpiricalNvaf, NvafEstimator, DEFAULT_BLOCKS};
pub use ensemble::{ensemble_moments, EnsembleMoments};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{JumpModel, MagnitudeDist, SeasonalityModel, WaitingTimeModel};

/// Jump epochs and magnitudes observed on `(origin, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSeries {
    pub times: Vec<f64>,
    pub jumps: Vec<f64>,
    /// Start of observation; the first wait is measured from here.
    pub origin: f64,
    pub horizon: f64,
}

impl EventSeries {
    pub fn new(times: Vec<f64>, jumps: Vec<f64>, origin: f64, horizon: f64) -> Result<Self> {
        let s = EventSeries { times, jumps, origin, horizon };
        s.validate()?;
        Ok(s)
    }

    pub fn empty(origin: f64, horizon: f64) -> Self {
        EventSeries { times: Vec::new(), jumps: Vec::new(), origin, horizon }
    }

    /// Checks ordering and bounds. A zero-length window is allowed (a
    /// session with a single tick). Zero magnitudes are tolerated so that
    /// tick data ingested with the keep-zeros policy still forms a series;
    /// simulated series are always strictly positive.
    pub fn validate(&self) -> Result<()> {
        if !(self.origin.is_finite() && self.horizon.is_finite() && self.horizon >= self.origin) {
            return Err(Error::InvalidArgument(format!(
                "observation window ({}, {}] is reversed",
                self.origin, self.horizon
            )));
        }
        if self.times.len() != self.jumps.len() {
            return Err(Error::InvalidArgument("times and jumps differ in length".into()));
        }
        let mut prev = self.origin;
        for (i, &t) in self.times.iter().enumerate() {
            if !(t > prev || (i == 0 && t >= prev)) || t > self.horizon {
                return Err(Error::InvalidArgument(format!(
                    "event {i} at {t} breaks strict ordering inside ({}, {}]",
                    self.origin, self.horizon
                )));
            }
            prev = t;
        }
        if self.jumps.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidArgument("jump magnitudes must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.horizon - self.origin
    }

    /// Waits between consecutive events, the first one measured from `origin`.
    pub fn waits(&self) -> Vec<f64> {
        let mut prev = self.origin;
        self.times
            .iter()
            .map(|&t| {
                let w = t - prev;
                prev = t;
                w
            })
            .collect()
    }

    /// Position X(t) = Σ_{t_i ≤ t} R_i.
    pub fn position(&self, t: f64) -> f64 {
        let n = self.times.partition_point(|&x| x <= t);
        self.jumps[..n].iter().sum()
    }
}

/// How the wait before the first jump is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstWaitMode {
    /// ψ₁(t) = Ψ(t)/⟨t⟩: the process has been running since long before t = 0.
    #[default]
    Equilibrium,
    /// Same law as every other wait.
    Ordinary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub wtd: WaitingTimeModel,
    pub jumps: JumpModel,
    pub horizon: f64,
    pub seed: u64,
    pub seasonality: Option<SeasonalityModel>,
    #[serde(default)]
    pub first_wait_mode: FirstWaitMode,
}

impl SimConfig {
    pub fn new(wtd: WaitingTimeModel, jumps: JumpModel, horizon: f64, seed: u64) -> Result<Self> {
        let cfg =
            SimConfig { wtd, jumps, horizon, seed, seasonality: None, first_wait_mode: FirstWaitMode::Equilibrium };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seasonality(mut self, season: SeasonalityModel) -> Result<Self> {
        self.seasonality = Some(season);
        self.validate()?;
        Ok(self)
    }

    pub fn with_first_wait(mut self, mode: FirstWaitMode) -> Self {
        self.first_wait_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.wtd.validate()?;
        self.jumps.validate()?;
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidModel(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if let Some(season) = &self.seasonality {
            season.validate()?;
            let days = self.horizon / season.day_length;
            if days > 1.0 && (days - days.round()).abs() > 1e-9 * days {
                return Err(Error::InvalidModel(format!(
                    "seasonal horizon {} must not exceed one day or be a whole number of days (T = {})",
                    self.horizon, season.day_length
                )));
            }
        }
        Ok(())
    }

    /// Number of trading days covered by a seasonal configuration.
    pub fn days(&self) -> usize {
        match &self.seasonality {
            Some(season) if self.horizon > season.day_length => (self.horizon / season.day_length).round() as usize,
            _ => 1,
        }
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Pre-built sampler for an exponential-mixture law.
#[derive(Debug, Clone)]
struct MixtureSampler {
    cumulative: Vec<f64>,
    scales: Vec<f64>,
}

impl MixtureSampler {
    fn new(components: &[(f64, f64)]) -> Self {
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(components.len());
        for (w, _) in components {
            acc += w;
            cumulative.push(acc);
        }
        MixtureSampler { cumulative, scales: components.iter().map(|c| c.1).collect() }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let scale = if self.scales.len() == 1 {
            self.scales[0]
        } else {
            let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
            let idx = self.cumulative.iter().position(|&c| u < c).unwrap_or(self.scales.len() - 1);
            self.scales[idx]
        };
        let e: f64 = Exp1.sample(rng);
        e * scale
    }
}

#[derive(Debug, Clone)]
enum MagnitudeSampler {
    Fixed(f64),
    Exponential(f64),
    Table { values: Vec<f64>, index: WeightedAliasIndex<f64> },
}

impl MagnitudeSampler {
    fn new(dist: &MagnitudeDist) -> Result<Self> {
        Ok(match dist {
            MagnitudeDist::Degenerate { r0 } => MagnitudeSampler::Fixed(*r0),
            MagnitudeDist::Exponential { mean } => MagnitudeSampler::Exponential(*mean),
            MagnitudeDist::Empirical { values, probabilities } => {
                if values.len() == 1 {
                    MagnitudeSampler::Fixed(values[0])
                } else {
                    let index = WeightedAliasIndex::new(probabilities.clone())
                        .map_err(|e| Error::InvalidModel(format!("empirical jump table: {e}")))?;
                    MagnitudeSampler::Table { values: values.clone(), index }
                }
            }
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MagnitudeSampler::Fixed(r) => *r,
            MagnitudeSampler::Exponential(mean) => {
                // Exp1 can return exactly zero only with probability ~2^-64;
                // retry keeps magnitudes strictly positive
                loop {
                    let e: f64 = Exp1.sample(rng);
                    if e > 0.0 {
                        return e * mean;
                    }
                }
            }
            MagnitudeSampler::Table { values, index } => values[index.sample(rng)],
        }
    }
}

/// Reusable sampling machinery for one configuration.
#[derive(Debug, Clone)]
pub struct Sampler {
    waits: MixtureSampler,
    first_waits: MixtureSampler,
    magnitudes: MagnitudeSampler,
    epsilon: f64,
    mean_wait: f64,
}

impl Sampler {
    pub fn new(wtd: &WaitingTimeModel, jumps: &JumpModel, mode: FirstWaitMode) -> Result<Self> {
        wtd.validate()?;
        jumps.validate()?;
        let first = match mode {
            FirstWaitMode::Equilibrium => wtd.equilibrium_components(),
            FirstWaitMode::Ordinary => wtd.components(),
        };
        Ok(Sampler {
            waits: MixtureSampler::new(&wtd.components()),
            first_waits: MixtureSampler::new(&first),
            magnitudes: MagnitudeSampler::new(&jumps.magnitudes)?,
            epsilon: jumps.epsilon,
            mean_wait: wtd.mean_wait(),
        })
    }

    pub fn wait<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.waits.sample(rng)
    }

    pub fn first_wait<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.first_waits.sample(rng)
    }

    /// Next magnitude given the previous one (`None` before the first jump).
    pub fn magnitude<R: Rng + ?Sized>(&self, previous: Option<f64>, rng: &mut R) -> f64 {
        match previous {
            Some(prev) if self.epsilon > 0.0 && rng.random::<f64>() < self.epsilon => prev,
            _ => self.magnitudes.sample(rng),
        }
    }
}

/// Draws the wait before the first jump.
pub fn sample_first_wait<R: Rng + ?Sized>(wtd: &WaitingTimeModel, mode: FirstWaitMode, rng: &mut R) -> Result<f64> {
    wtd.validate()?;
    let comps = match mode {
        FirstWaitMode::Equilibrium => wtd.equilibrium_components(),
        FirstWaitMode::Ordinary => wtd.components(),
    };
    Ok(MixtureSampler::new(&comps).sample(rng))
}

fn stationary_path(sampler: &Sampler, horizon: f64, rng: &mut ChaCha8Rng) -> EventSeries {
    let expected = (horizon / sampler.mean_wait * 1.05) as usize + 16;
    let mut times = Vec::with_capacity(expected.min(1 << 28));
    let mut jumps = Vec::with_capacity(expected.min(1 << 28));
    let mut t = sampler.first_wait(rng);
    let mut prev = None;
    while t <= horizon {
        let r = sampler.magnitude(prev, rng);
        times.push(t);
        jumps.push(r);
        prev = Some(r);
        t += sampler.wait(rng);
    }
    EventSeries { times, jumps, origin: 0.0, horizon }
}

/// One trajectory on `(0, horizon]` using stream 0 of the configured seed.
/// Seasonal configurations must fit inside one day here; use
/// [`sample_trajectory_seasonal`] for multi-day runs.
pub fn sample_trajectory(cfg: &SimConfig) -> Result<EventSeries> {
    sample_trajectory_stream(cfg, 0)
}

/// One trajectory drawn from an explicit RNG stream.
pub fn sample_trajectory_stream(cfg: &SimConfig, stream: u64) -> Result<EventSeries> {
    cfg.validate()?;
    let sampler = Sampler::new(&cfg.wtd, &cfg.jumps, cfg.first_wait_mode)?;
    let mut rng = cfg.rng(stream);
    match &cfg.seasonality {
        None => Ok(stationary_path(&sampler, cfg.horizon, &mut rng)),
        Some(season) => {
            if cfg.days() > 1 {
                return Err(Error::InvalidArgument(
                    "multi-day seasonal configurations yield one series per day; use sample_trajectory_seasonal".into(),
                ));
            }
            Ok(seasonal_day(&sampler, season, cfg.horizon.min(season.day_length), &mut rng))
        }
    }
}

fn seasonal_day(sampler: &Sampler, season: &SeasonalityModel, end: f64, rng: &mut ChaCha8Rng) -> EventSeries {
    // unit-mean waits rescaled by the local mean theta(t) at the wait's start
    let unit = 1.0 / sampler.mean_wait;
    let mut times = Vec::new();
    let mut jumps = Vec::new();
    let mut t = season.theta(0.0) * sampler.first_wait(rng) * unit;
    let mut prev = None;
    while t <= end {
        let r = sampler.magnitude(prev, rng);
        times.push(t);
        jumps.push(r);
        prev = Some(r);
        t += season.theta(t) * sampler.wait(rng) * unit;
    }
    EventSeries { times, jumps, origin: 0.0, horizon: end }
}

/// Seasonal trajectories, one [`EventSeries`] per trading day. Day `d` uses
/// RNG stream `d`; days are independent and generated in parallel.
pub fn sample_trajectory_seasonal(cfg: &SimConfig) -> Result<Vec<EventSeries>> {
    cfg.validate()?;
    let season = cfg.seasonality.ok_or_else(|| Error::InvalidArgument("configuration has no seasonality".into()))?;
    let sampler = Sampler::new(&cfg.wtd, &cfg.jumps, cfg.first_wait_mode)?;
    let end = cfg.horizon.min(season.day_length);
    Ok((0..cfg.days() as u64)
        .into_par_iter()
        .map(|day| seasonal_day(&sampler, &season, end, &mut cfg.rng(day)))
        .collect())
}

/// Generates seasonal days `first_day..first_day + n_days` without holding
/// the whole run in memory at once; `visit` sees each day's series.
pub fn for_each_seasonal_day<F>(cfg: &SimConfig, first_day: u64, n_days: u64, visit: F) -> Result<()>
where
    F: Fn(u64, EventSeries) + Sync,
{
    cfg.validate()?;
    let season = cfg.seasonality.ok_or_else(|| Error::InvalidArgument("configuration has no seasonality".into()))?;
    let sampler = Sampler::new(&cfg.wtd, &cfg.jumps, cfg.first_wait_mode)?;
    let end = cfg.horizon.min(season.day_length);
    (first_day..first_day + n_days).into_par_iter().for_each(|day| {
        visit(day, seasonal_day(&sampler, &season, end, &mut cfg.rng(day)));
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_cfg(eps: f64, horizon: f64, seed: u64) -> SimConfig {
        SimConfig::new(
            WaitingTimeModel::exponential(1.0).unwrap(),
            JumpModel::new(MagnitudeDist::Exponential { mean: 1.0 }, eps).unwrap(),
            horizon,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn reproducible_per_seed() {
        let a = sample_trajectory(&exp_cfg(0.3, 1e4, 11)).unwrap();
        let b = sample_trajectory(&exp_cfg(0.3, 1e4, 11)).unwrap();
        let c = sample_trajectory(&exp_cfg(0.3, 1e4, 12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        a.validate().unwrap();
    }

    #[test]
    fn path_is_directed_and_bounded() {
        let s = sample_trajectory(&exp_cfg(0.5, 2e3, 3)).unwrap();
        assert!(s.jumps.iter().all(|&r| r > 0.0));
        assert!(s.times.iter().all(|&t| t > 0.0 && t <= 2e3));
        let mut last = 0.0;
        for t in [0.0, 1.0, 10.0, 500.0, 2e3] {
            let x = s.position(t);
            assert!(x >= last);
            last = x;
        }
    }

    #[test]
    fn near_one_memory_makes_long_runs() {
        let s = sample_trajectory(&exp_cfg(0.999, 5e3, 5)).unwrap();
        let repeats = s.jumps.windows(2).filter(|w| w[0] == w[1]).count();
        assert!(repeats as f64 > 0.99 * (s.len() - 1) as f64);
    }

    #[test]
    fn empty_when_horizon_precedes_first_jump() {
        let cfg = SimConfig::new(
            WaitingTimeModel::exponential(1e6).unwrap(),
            JumpModel::new(MagnitudeDist::Degenerate { r0: 1.0 }, 0.0).unwrap(),
            1e-3,
            1,
        )
        .unwrap();
        let s = sample_trajectory(&cfg).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.position(1e-3), 0.0);
    }

    #[test]
    fn seasonal_horizon_must_be_whole_days() {
        let season = SeasonalityModel::with_mean_wait(50.0, 400.0, 100.0, 1.0).unwrap();
        let base = exp_cfg(0.0, 250.0, 1);
        assert!(base.clone().with_seasonality(season).is_err());
        let ok = SimConfig { horizon: 300.0, ..base }.with_seasonality(season).unwrap();
        let days = sample_trajectory_seasonal(&ok).unwrap();
        assert_eq!(days.len(), 3);
        assert!(days.iter().all(|d| d.horizon == 100.0));
        assert!(sample_trajectory(&ok).is_err());
    }

    #[test]
    fn waits_start_from_origin() {
        let s = EventSeries::new(vec![2.0, 3.5], vec![0.5, 1.0], 0.0, 5.0).unwrap();
        assert_eq!(s.waits(), vec![2.0, 1.5]);
        assert!(EventSeries::new(vec![3.0, 2.0], vec![1.0, 1.0], 0.0, 5.0).is_err());
        assert!(EventSeries::new(vec![6.0], vec![1.0], 0.0, 5.0).is_err());
    }
}
