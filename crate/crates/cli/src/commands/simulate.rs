use std::path::{Path, PathBuf};

use clap::Args;
use dctrw::estimator::write_ticks;
use dctrw::model::{JumpModel, MagnitudeDist, SeasonalityModel, WaitingTimeModel};
use dctrw::simulator::{sample_trajectory, sample_trajectory_seasonal, FirstWaitMode, SimConfig};
use serde::{Deserialize, Serialize};

use super::{default_manifest, fill_from, load_config, required, Artifact, Execution, FirstWait, Run};
use crate::error::{CliError, Result};
use crate::spec::{parse_jumps, parse_season, parse_wtd};
use crate::table::VERSION;

#[derive(Debug, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SimulateArgs {
    /// Waiting-time law: exp:MEAN or dexp:TAU1,TAU2,WEIGHT
    #[arg(long)]
    pub wtd: Option<String>,
    /// Memory parameter ε in [0, 1)
    #[arg(long)]
    pub eps: Option<f64>,
    /// Jump magnitudes: exp:MEAN, const:R or table:V1=P1,V2=P2,...
    #[arg(long)]
    pub jumps: Option<String>,
    /// Simulated time; with --season, up to one day or a whole number of days
    #[arg(long)]
    pub horizon: Option<f64>,
    /// RNG seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// How the wait before the first jump is drawn [default: equilibrium]
    #[arg(long, value_enum)]
    pub first_wait: Option<FirstWait>,
    /// Intraday pattern P,Q: local rate ∝ (t − P)² + Q
    #[arg(long)]
    pub season: Option<String>,
    /// Trading-day length for --season
    #[arg(long)]
    pub day_length: Option<f64>,
    /// Price of the reference tick opening each session [default: 100]
    #[arg(long)]
    pub base_price: Option<f64>,
    /// Tick CSV to write [default: ticks.csv]
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
pub struct SimulateRun {
    pub wtd: WaitingTimeModel,
    pub epsilon: f64,
    pub jumps: MagnitudeDist,
    pub horizon: f64,
    pub seed: u64,
    pub first_wait: FirstWaitMode,
    pub seasonality: Option<SeasonalityModel>,
    pub base_price: f64,
    pub output: PathBuf,
    pub manifest: PathBuf,
}

impl SimulateArgs {
    pub fn resolve(mut self) -> Result<SimulateRun> {
        let file: SimulateArgs = load_config(self.config.as_deref())?;
        fill_from!(self, file; wtd, eps, jumps, horizon, seed, first_wait, season, day_length, base_price, out, manifest);
        let wtd = parse_wtd(&required(self.wtd, "wtd")?)?;
        let seasonality = match (self.season, self.day_length) {
            (Some(s), Some(day)) => {
                let (p, q) = parse_season(&s)?;
                Some(SeasonalityModel::with_mean_wait(p, q, day, wtd.mean_wait())?)
            }
            (None, None) => None,
            _ => return Err(CliError::Validation("--season and --day-length go together".into())),
        };
        let output = self.out.unwrap_or_else(|| PathBuf::from("ticks.csv"));
        let run = SimulateRun {
            wtd,
            epsilon: required(self.eps, "eps")?,
            jumps: parse_jumps(&required(self.jumps, "jumps")?)?,
            horizon: required(self.horizon, "horizon")?,
            seed: self.seed.unwrap_or(0),
            first_wait: match self.first_wait.unwrap_or(FirstWait::Equilibrium) {
                FirstWait::Equilibrium => FirstWaitMode::Equilibrium,
                FirstWait::Ordinary => FirstWaitMode::Ordinary,
            },
            seasonality,
            base_price: self.base_price.unwrap_or(100.0),
            manifest: self.manifest.unwrap_or_else(|| default_manifest(&output)),
            output,
        };
        run.sim_config()?;
        Ok(run)
    }
}

impl SimulateRun {
    fn sim_config(&self) -> Result<SimConfig> {
        let jumps = JumpModel::new(self.jumps.clone(), self.epsilon)?;
        let mut cfg = SimConfig::new(self.wtd, jumps, self.horizon, self.seed)?.with_first_wait(self.first_wait);
        if let Some(season) = self.seasonality {
            cfg = cfg.with_seasonality(season)?;
        }
        if !(self.base_price.is_finite() && self.base_price > 0.0) {
            return Err(CliError::Validation(format!("base price must be > 0, got {}", self.base_price)));
        }
        Ok(cfg)
    }
}

impl Run for SimulateRun {
    const NAME: &'static str = "simulate";

    fn seed(&self) -> Option<u64> {
        Some(self.seed)
    }

    fn manifest_path(&self) -> &Path {
        &self.manifest
    }

    fn execute(&self) -> Result<Execution> {
        let cfg = self.sim_config()?;
        let series = match cfg.seasonality {
            Some(_) => sample_trajectory_seasonal(&cfg)?,
            None => vec![sample_trajectory(&cfg)?],
        };
        let mut bytes = format!("# version={VERSION}\n# seed={}\n", self.seed).into_bytes();
        write_ticks(&mut bytes, &series, self.base_price)?;
        let events: usize = series.iter().map(|s| s.len()).sum();
        Ok(Execution {
            inputs: Vec::new(),
            artifacts: vec![Artifact { path: self.output.clone(), bytes }],
            summary: format!("{events} events in {} session(s) written to {}", series.len(), self.output.display()),
        })
    }
}
