use std::path::{Path, PathBuf};

use clap::Args;
use dctrw::analytic::{seasonal_value, stationary_coefficients, SeasonalForm, VafCoefficients};
use dctrw::estimator::FittedModel;
use dctrw::laplace::{
    invert_laplace, vaf_abscissa_from_epsilon, vaf_continuous_laplace_from_ratio, InversionMethod, LaplaceFunction,
};
use dctrw::model::{JumpModel, SeasonalityModel, WaitingTimeModel};
use serde::{Deserialize, Serialize};

use super::{default_manifest, fill_from, load_config, read_input, required, Artifact, Execution, Form, Run};
use crate::error::{CliError, Result};
use crate::spec::{parse_jumps, parse_lags, parse_season, parse_wtd};
use crate::table::Table;

/// Sub-points per bin when averaging the seasonal curve.
const SEASONAL_SUBPOINTS: usize = 16;

#[derive(Debug, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct CurvesArgs {
    /// Fitted model JSON from `analyze` (instead of --wtd/--eps/--m)
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Waiting-time law: exp:MEAN or dexp:TAU1,TAU2,WEIGHT
    #[arg(long)]
    pub wtd: Option<String>,
    /// Memory parameter ε in [0, 1)
    #[arg(long)]
    pub eps: Option<f64>,
    /// Moment ratio M = M₁²/M₂ in (0, 1]
    #[arg(long, conflicts_with = "jumps")]
    pub m: Option<f64>,
    /// Jump law to take M from: exp:MEAN, const:R or table:V=P,...
    #[arg(long)]
    pub jumps: Option<String>,
    /// Intraday pattern P,Q; adds the nvaf_seasonal column
    #[arg(long)]
    pub season: Option<String>,
    /// Trading-day length for --season
    #[arg(long)]
    pub day_length: Option<f64>,
    /// Lag grid START:STOP:STEP or a comma list [default: 1:100:1]
    #[arg(long)]
    pub lags: Option<String>,
    /// Day-end term of the seasonal curve [default: reference]
    #[arg(long, value_enum)]
    pub form: Option<Form>,
    /// Add a column from numerical Laplace inversion
    #[arg(long)]
    #[serde(default)]
    pub oracle: bool,
    /// Report averages over [lag − w/2, lag + w/2] to match binned estimates
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Curve CSV to write [default: curves.csv]
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
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSource {
    Model { path: PathBuf },
    Params { wtd: WaitingTimeModel, epsilon: f64, m: f64, seasonality: Option<SeasonalityModel> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvesRun {
    pub source: CurveSource,
    pub lags: String,
    pub form: SeasonalForm,
    pub oracle: bool,
    pub bin_width: Option<f64>,
    pub output: PathBuf,
    pub manifest: PathBuf,
}

impl CurvesArgs {
    pub fn resolve(mut self) -> Result<CurvesRun> {
        let file: CurvesArgs = load_config(self.config.as_deref())?;
        fill_from!(self, file; model, wtd, eps, m, jumps, season, day_length, lags, form, bin_width, out, manifest);
        self.oracle |= file.oracle;
        let source = match self.model {
            Some(path) => {
                if self.wtd.is_some()
                    || self.eps.is_some()
                    || self.m.is_some()
                    || self.jumps.is_some()
                    || self.season.is_some()
                {
                    return Err(CliError::Validation(
                        "--model excludes --wtd, --eps, --m, --jumps and --season".into(),
                    ));
                }
                CurveSource::Model { path }
            }
            None => {
                let wtd = parse_wtd(&required(self.wtd, "wtd")?)?;
                let epsilon = required(self.eps, "eps")?;
                let m = match (self.m, self.jumps) {
                    (Some(m), None) => m,
                    (None, Some(j)) => dctrw::analytic::moment_ratio(&JumpModel::new(parse_jumps(&j)?, epsilon)?)?,
                    _ => return Err(CliError::Validation("give exactly one of --m and --jumps".into())),
                };
                let seasonality = match (self.season, self.day_length) {
                    (Some(s), Some(day)) => {
                        let (p, q) = parse_season(&s)?;
                        Some(SeasonalityModel::with_mean_wait(p, q, day, wtd.mean_wait())?)
                    }
                    (None, None) => None,
                    _ => return Err(CliError::Validation("--season and --day-length go together".into())),
                };
                stationary_coefficients(epsilon, &wtd, m)?;
                CurveSource::Params { wtd, epsilon, m, seasonality }
            }
        };
        let lags = self.lags.unwrap_or_else(|| "1:100:1".into());
        parse_lags(&lags)?;
        if self.oracle && self.bin_width.is_some() {
            return Err(CliError::Validation("--oracle reports point values; drop --bin-width".into()));
        }
        let output = self.out.unwrap_or_else(|| PathBuf::from("curves.csv"));
        Ok(CurvesRun {
            source,
            lags,
            form: match self.form.unwrap_or(Form::Reference) {
                Form::Reference => SeasonalForm::Reference,
                Form::TimeChange => SeasonalForm::TimeChange,
            },
            oracle: self.oracle,
            bin_width: self.bin_width,
            manifest: self.manifest.unwrap_or_else(|| default_manifest(&output)),
            output,
        })
    }
}

struct Params {
    wtd: WaitingTimeModel,
    epsilon: f64,
    m: f64,
    seasonality: Option<SeasonalityModel>,
}

fn bin_mean(f: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64) -> Result<f64> {
    let h = (hi - lo) / SEASONAL_SUBPOINTS as f64;
    let mut sum = 0.0;
    for i in 0..SEASONAL_SUBPOINTS {
        sum += f(lo + (i as f64 + 0.5) * h)?;
    }
    Ok(sum / SEASONAL_SUBPOINTS as f64)
}

fn oracle_column(p: &Params, lags: &[f64]) -> Result<(Vec<f64>, f64)> {
    let abscissa = vaf_abscissa_from_epsilon(p.epsilon, &p.wtd)?;
    let (wtd, eps, m) = (p.wtd, p.epsilon, p.m);
    let f = LaplaceFunction::try_new(abscissa, move |s| vaf_continuous_laplace_from_ratio(eps, m, &wtd, s));
    let inv = invert_laplace(&f, lags, InversionMethod::talbot())?;
    if inv.values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numeric("numerical inversion produced non-finite values".into()));
    }
    let worst = inv.errors.iter().copied().fold(0.0, f64::max);
    Ok((inv.values, worst))
}

impl Run for CurvesRun {
    const NAME: &'static str = "curves";

    fn manifest_path(&self) -> &Path {
        &self.manifest
    }

    fn execute(&self) -> Result<Execution> {
        let mut inputs = Vec::new();
        let params = match &self.source {
            CurveSource::Model { path } => {
                let (bytes, digest) = read_input(path)?;
                inputs.push(digest);
                let text = String::from_utf8(bytes)
                    .map_err(|_| CliError::Schema { path: path.clone(), message: "not UTF-8".into() })?;
                let model = FittedModel::from_json(&text).map_err(|e| CliError::in_file(path, e))?;
                Params { wtd: model.wtd, epsilon: model.epsilon, m: model.m, seasonality: model.seasonality }
            }
            CurveSource::Params { wtd, epsilon, m, seasonality } => {
                Params { wtd: *wtd, epsilon: *epsilon, m: *m, seasonality: *seasonality }
            }
        };
        let lags = parse_lags(&self.lags)?;
        let coeffs: VafCoefficients = stationary_coefficients(params.epsilon, &params.wtd, params.m)?;
        let half = self.bin_width.map(|w| 0.5 * w);
        if let Some(h) = half {
            if !(h > 0.0 && h.is_finite()) || lags[0] < h {
                return Err(CliError::Validation("bin width must be > 0 and at most twice the first lag".into()));
            }
        }

        let mut columns = vec!["lag", "nvaf_stationary"];
        if params.seasonality.is_some() {
            columns.push("nvaf_seasonal");
        }
        if self.oracle {
            columns.push("oracle");
        }
        let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let mut table = Table::new(&columns)
            .meta("delta_weight", 1.0)
            .meta("epsilon", params.epsilon)
            .meta("M", params.m)
            .meta("mean_wait", params.wtd.mean_wait())
            .meta("amplitudes", join(&coeffs.amplitudes))
            .meta("rates", join(&coeffs.rates));
        if let Some(w) = self.bin_width {
            table = table.meta("bin_width", w);
        }
        if let Some(s) = &params.seasonality {
            table = table.meta("p", s.p).meta("q", s.q).meta("day_length", s.day_length).meta(
                "form",
                match self.form {
                    SeasonalForm::Reference => "reference",
                    SeasonalForm::TimeChange => "time-change",
                },
            );
        }
        let oracle = if self.oracle {
            let (values, worst) = oracle_column(&params, &lags)?;
            table = table.meta("oracle_error_estimate", worst);
            Some(values)
        } else {
            None
        };

        for (i, &t) in lags.iter().enumerate() {
            let mut row = vec![t];
            row.push(match half {
                Some(h) => coeffs.bin_average(t - h, t + h),
                None => coeffs.evaluate(t),
            });
            if let Some(season) = &params.seasonality {
                let at = |x: f64| Ok(seasonal_value(&coeffs, season, self.form, x)?);
                row.push(match half {
                    Some(h) => bin_mean(at, t - h, t + h)?,
                    None => at(t)?,
                });
            }
            if let Some(o) = &oracle {
                row.push(o[i]);
            }
            table.rows.push(row);
        }
        Ok(Execution {
            inputs,
            artifacts: vec![Artifact { path: self.output.clone(), bytes: table.to_csv().into_bytes() }],
            summary: format!(
                "{} lags written to {}; rates v = [{:.4}, {:.4}, {:.4}]",
                lags.len(),
                self.output.display(),
                coeffs.rates[0],
                coeffs.rates[1],
                coeffs.rates[2]
            ),
        })
    }
}
