//! Compact string forms used on the command line and in config files.

use dctrw::model::{MagnitudeDist, WaitingTimeModel};

use crate::error::{CliError, Result};

fn numbers(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|x| {
            x.trim().parse::<f64>().map_err(|_| CliError::Validation(format!("{what}: cannot read {x:?} as a number")))
        })
        .collect()
}

fn split_kind<'a>(text: &'a str, what: &str) -> Result<(&'a str, &'a str)> {
    text.split_once(':').ok_or_else(|| CliError::Validation(format!("{what} {text:?} should look like KIND:PARAMS")))
}

/// `exp:MEAN` or `dexp:TAU1,TAU2,WEIGHT`.
pub fn parse_wtd(text: &str) -> Result<WaitingTimeModel> {
    let (kind, rest) = split_kind(text, "waiting-time law")?;
    let xs = numbers(rest, "waiting-time law")?;
    let model = match (kind, xs.as_slice()) {
        ("exp", &[mean]) => WaitingTimeModel::exponential(mean)?,
        ("dexp", &[t1, t2, w]) => WaitingTimeModel::double_exponential(t1, t2, w)?,
        _ => {
            return Err(CliError::Validation(format!(
                "unknown waiting-time law {text:?}; expected exp:MEAN or dexp:TAU1,TAU2,WEIGHT"
            )))
        }
    };
    Ok(model)
}

/// `exp:MEAN`, `const:R` or `table:V1=P1,V2=P2,...`.
pub fn parse_jumps(text: &str) -> Result<MagnitudeDist> {
    let (kind, rest) = split_kind(text, "jump law")?;
    let dist = match kind {
        "exp" => match numbers(rest, "jump law")?.as_slice() {
            &[mean] => MagnitudeDist::Exponential { mean },
            _ => return Err(CliError::Validation("exp jump law takes one parameter".into())),
        },
        "const" => match numbers(rest, "jump law")?.as_slice() {
            &[r0] => MagnitudeDist::Degenerate { r0 },
            _ => return Err(CliError::Validation("const jump law takes one parameter".into())),
        },
        "table" => {
            let mut values = Vec::new();
            let mut weights = Vec::new();
            for pair in rest.split(',') {
                let (v, p) = pair
                    .split_once('=')
                    .ok_or_else(|| CliError::Validation(format!("table entry {pair:?} should be VALUE=WEIGHT")))?;
                values.push(numbers(v, "jump table")?[0]);
                weights.push(numbers(p, "jump table")?[0]);
            }
            MagnitudeDist::empirical(&values, &weights)?
        }
        _ => {
            return Err(CliError::Validation(format!(
                "unknown jump law {text:?}; expected exp:MEAN, const:R or table:V=P,..."
            )))
        }
    };
    dist.validate()?;
    Ok(dist)
}

/// `P,Q` of the intraday pattern.
pub fn parse_season(text: &str) -> Result<(f64, f64)> {
    match numbers(text, "seasonality")?.as_slice() {
        &[p, q] => Ok((p, q)),
        _ => Err(CliError::Validation(format!("seasonality {text:?} should be P,Q"))),
    }
}

/// `START:STOP:STEP` (inclusive) or a comma-separated list.
pub fn parse_lags(text: &str) -> Result<Vec<f64>> {
    let lags = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, b, h] = parts.as_slice() else {
            return Err(CliError::Validation(format!("lag grid {text:?} should be START:STOP:STEP")));
        };
        let (a, b, h) = (numbers(a, "lag grid")?[0], numbers(b, "lag grid")?[0], numbers(h, "lag grid")?[0]);
        if !(h > 0.0 && b >= a && a.is_finite() && b.is_finite()) {
            return Err(CliError::Validation(format!("lag grid {text:?} needs STEP > 0 and STOP >= START")));
        }
        let n = ((b - a) / h * (1.0 + 1e-12)).floor() as usize + 1;
        if n > 1_000_000 {
            return Err(CliError::Validation(format!("lag grid {text:?} has {n} points")));
        }
        (0..n).map(|i| a + i as f64 * h).collect()
    } else {
        numbers(text, "lag grid")?
    };
    dctrw::analytic::validate_lag_grid(&lags)?;
    Ok(lags)
}
