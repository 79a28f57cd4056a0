use serde::{Deserialize, Serialize};

use super::{sample_trajectory_stream, SimConfig};
use crate::analytic::validate_lag_grid;
use crate::error::{Error, Result};
use crate::par::ordered_fold;

/// Ensemble estimates of m₁(t) = E[X(t)] and m₂(t) = E[X(t)²].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMoments {
    pub times: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub m1_stderr: Vec<f64>,
    pub m2_stderr: Vec<f64>,
    pub n_traj: usize,
    /// Mean and standard error of the per-trajectory least-squares slope of
    /// X(t) through the origin over `times`.
    pub drift_slope: f64,
    pub drift_slope_stderr: f64,
}

#[derive(Clone)]
struct Sums {
    x: Vec<f64>,
    x2: Vec<f64>,
    x4: Vec<f64>,
    slope: f64,
    slope2: f64,
}

impl Sums {
    fn zero(n: usize) -> Self {
        Sums { x: vec![0.0; n], x2: vec![0.0; n], x4: vec![0.0; n], slope: 0.0, slope2: 0.0 }
    }

    fn merge(mut self, other: Sums) -> Self {
        for i in 0..self.x.len() {
            self.x[i] += other.x[i];
            self.x2[i] += other.x2[i];
            self.x4[i] += other.x4[i];
        }
        self.slope += other.slope;
        self.slope2 += other.slope2;
        self
    }
}

fn stderr(sum: f64, sum_sq: f64, n: usize) -> f64 {
    if n < 2 {
        return f64::NAN;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    (var / nf).sqrt()
}

/// Runs `n_traj` independent stationary trajectories (stream `i` for
/// trajectory `i`) out to the last grid time and averages X(t) and X(t)².
pub fn ensemble_moments(cfg: &SimConfig, n_traj: usize, t_grid: &[f64]) -> Result<EnsembleMoments> {
    if n_traj == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory".into()));
    }
    if cfg.seasonality.is_some() {
        return Err(Error::InvalidArgument("ensemble moments are defined for the stationary walk".into()));
    }
    validate_lag_grid(t_grid)?;
    let t_max = *t_grid.last().ok_or_else(|| Error::InvalidArgument("empty time grid".into()))?;
    let run = SimConfig { horizon: t_max, ..cfg.clone() };
    run.validate()?;
    let grid_sq: f64 = t_grid.iter().map(|t| t * t).sum();
    let n = t_grid.len();

    let sums = ordered_fold(
        n_traj,
        || Sums::zero(n),
        |acc, stream| -> Result<Sums> {
            let path = sample_trajectory_stream(&run, stream as u64)?;
            let mut s = Sums::zero(n);
            // positions on the grid by a single merge pass
            let mut idx = 0;
            let mut x = 0.0;
            let mut cross = 0.0;
            for (k, &t) in t_grid.iter().enumerate() {
                while idx < path.times.len() && path.times[idx] <= t {
                    x += path.jumps[idx];
                    idx += 1;
                }
                s.x[k] = x;
                s.x2[k] = x * x;
                s.x4[k] = x * x * x * x;
                cross += t * x;
            }
            let b = cross / grid_sq;
            s.slope = b;
            s.slope2 = b * b;
            Ok(acc.merge(s))
        },
        |a, b| Ok(a.merge(b)),
    )?;

    let nf = n_traj as f64;
    Ok(EnsembleMoments {
        times: t_grid.to_vec(),
        m1: sums.x.iter().map(|v| v / nf).collect(),
        m2: sums.x2.iter().map(|v| v / nf).collect(),
        m1_stderr: (0..n).map(|k| stderr(sums.x[k], sums.x2[k], n_traj)).collect(),
        m2_stderr: (0..n).map(|k| stderr(sums.x2[k], sums.x4[k], n_traj)).collect(),
        n_traj,
        drift_slope: sums.slope / nf,
        drift_slope_stderr: stderr(sums.slope, sums.slope2, n_traj),
    })
}
