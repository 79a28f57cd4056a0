//! Closed-form moments and normalized velocity autocorrelation (nVAF) of the
//! directed walk.
//!
//! The normalized VAF always has the shape `δ(t) + Σ A_j exp(−v_j t)`; the
//! delta weight is kept as a separate scalar and only the continuous part is
//! sampled on the lag grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{JumpModel, SeasonalityModel, WaitingTimeModel};

/// Normalized VAF: a Dirac weight at lag zero plus a continuous part on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VafCurve {
    pub delta_weight: f64,
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
}

impl VafCurve {
    pub fn new(delta_weight: f64, lags: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_lag_grid(&lags)?;
        if lags.len() != values.len() {
            return Err(Error::InvalidArgument(format!("{} lags but {} values", lags.len(), values.len())));
        }
        Ok(VafCurve { delta_weight, lags, values })
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }
}

/// Lag grids must be strictly increasing and start above zero.
pub fn validate_lag_grid(lags: &[f64]) -> Result<()> {
    if let Some(&first) = lags.first() {
        if !(first.is_finite() && first > 0.0) {
            return Err(Error::InvalidArgument(format!("first lag must be > 0, got {first}")));
        }
    }
    if lags.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(Error::InvalidArgument("lags must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// M = M₁²/M₂, the squared-mean to second-moment ratio of the magnitudes.
pub fn moment_ratio(jumps: &JumpModel) -> Result<f64> {
    jumps.magnitudes.validate()?;
    let (m1, m2) = (jumps.m1(), jumps.m2());
    if !(m1.is_finite() && m2.is_finite() && m1 > 0.0 && m2 > 0.0) {
        return Err(Error::InvalidModel(format!("non-finite or non-positive moments M1={m1}, M2={m2}")));
    }
    // Cauchy-Schwarz keeps this in (0, 1]; clip the rounding excess of the
    // degenerate case.
    Ok((m1 * m1 / m2).min(1.0))
}

/// Slope of the mean position m₁(t) = (M₁/⟨t⟩)·t. Carries no dependence on ε.
pub fn mean_drift(jumps: &JumpModel, wtd: &WaitingTimeModel) -> Result<f64> {
    jumps.validate()?;
    wtd.validate()?;
    Ok(jumps.m1() / wtd.mean_wait())
}

fn check_epsilon_and_ratio(epsilon: f64, m: f64) -> Result<()> {
    if !(epsilon.is_finite() && (0.0..1.0).contains(&epsilon)) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in [0,1), got {epsilon}")));
    }
    if !(m.is_finite() && m > 0.0 && m <= 1.0) {
        return Err(Error::InvalidArgument(format!("moment ratio M must lie in (0,1], got {m}")));
    }
    Ok(())
}

/// Amplitudes and decay rates of the continuous nVAF, ordered as
/// `[A₀, A₁, A₂]` / `[v₀, v₁, v₂]`.
///
/// `v₀` belongs to the memory-free term produced by the spread of waiting
/// times; `v₁ ≥ v₂` are the roots of `s² − (w₁ + w₂ − εv)s + w₁w₂(1 − ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VafCoefficients {
    pub amplitudes: [f64; 3],
    pub rates: [f64; 3],
    /// Weighted mean rate v = w·w₁ + (1 − w)·w₂.
    pub mean_rate: f64,
}

impl VafCoefficients {
    pub fn evaluate(&self, t: f64) -> f64 {
        self.amplitudes.iter().zip(&self.rates).map(|(a, v)| a * (-v * t).exp()).sum()
    }

    /// Exact average of the continuous part over the lag bin `[lo, hi)`.
    pub fn bin_average(&self, lo: f64, hi: f64) -> f64 {
        let width = hi - lo;
        self.amplitudes
            .iter()
            .zip(&self.rates)
            .map(|(&a, &v)| {
                if a == 0.0 {
                    0.0
                } else {
                    // (e^{-v lo} - e^{-v hi}) / (v width), written with exp_m1
                    a * (-v * lo).exp() * (-(-v * width).exp_m1()) / (v * width)
                }
            })
            .sum()
    }

    pub fn curve(&self, t_grid: &[f64]) -> Result<VafCurve> {
        validate_lag_grid(t_grid)?;
        Ok(VafCurve {
            delta_weight: 1.0,
            lags: t_grid.to_vec(),
            values: t_grid.iter().map(|&t| self.evaluate(t)).collect(),
        })
    }
}

fn exponential_coefficients(epsilon: f64, mean_wait: f64, m: f64) -> VafCoefficients {
    let rate = 1.0 / mean_wait;
    VafCoefficients {
        amplitudes: [0.0, 0.0, 2.0 * epsilon * (1.0 - m) * rate],
        rates: [rate, rate, (1.0 - epsilon) * rate],
        mean_rate: rate,
    }
}

/// Continuous nVAF for the exponential WTD:
/// `2ε(1 − M)/⟨t⟩ · exp(−(1 − ε)t/⟨t⟩)`.
pub fn nvaf_exponential(t_grid: &[f64], epsilon: f64, wtd: &WaitingTimeModel, m: f64) -> Result<VafCurve> {
    check_epsilon_and_ratio(epsilon, m)?;
    match *wtd {
        WaitingTimeModel::Exponential { mean_wait } => {
            wtd.validate()?;
            exponential_coefficients(epsilon, mean_wait, m).curve(t_grid)
        }
        WaitingTimeModel::DoubleExponential { .. } => {
            Err(Error::InvalidArgument("nvaf_exponential needs an exponential waiting-time model".into()))
        }
    }
}

/// Three-exponential coefficients for the double-exponential WTD.
///
/// Degenerate mixtures (equal time scales or a weight of 0 or 1) are
/// delegated to the single-exponential form, reported as `A₂` with
/// `A₀ = A₁ = 0`.
pub fn double_exponential_coefficients(epsilon: f64, wtd: &WaitingTimeModel, m: f64) -> Result<VafCoefficients> {
    check_epsilon_and_ratio(epsilon, m)?;
    wtd.validate()?;
    let (tau1, tau2, weight) = match wtd.reduced() {
        WaitingTimeModel::Exponential { mean_wait } => {
            return Ok(exponential_coefficients(epsilon, mean_wait, m));
        }
        WaitingTimeModel::DoubleExponential { tau1, tau2, weight } => (tau1, tau2, weight),
    };
    let (w1, w2) = (1.0 / tau1, 1.0 / tau2);
    let v = weight * w1 + (1.0 - weight) * w2;
    let v0 = (1.0 - weight) * w1 + weight * w2;

    let b = w1 + w2 - epsilon * v;
    let c = w1 * w2 * (1.0 - epsilon);
    let mut disc = b * b - 4.0 * c;
    if disc < 0.0 {
        if disc > -1e-12 * b * b {
            disc = 0.0;
        } else {
            return Err(Error::Numeric(format!("negative discriminant {disc} in decay rates")));
        }
    }
    // larger root by addition, smaller one through the product v1·v2 = c
    let v1 = 0.5 * (b + disc.sqrt());
    let v2 = c / v1;

    let a0 = 2.0 * m / v0 * weight * (1.0 - weight) * (w1 - w2).powi(2);
    let scale = 2.0 * epsilon * (1.0 - m) / (v1 - v2);
    let a1 = -scale * (w1 * w2 - v * v1);
    let a2 = scale * (w1 * w2 - v * v2);
    if !(a1.is_finite() && a2.is_finite()) {
        return Err(Error::Numeric("coincident decay rates in double-exponential nVAF".into()));
    }
    Ok(VafCoefficients { amplitudes: [a0, a1, a2], rates: [v0, v1, v2], mean_rate: v })
}

/// Coefficients for either waiting-time family.
pub fn stationary_coefficients(epsilon: f64, wtd: &WaitingTimeModel, m: f64) -> Result<VafCoefficients> {
    match *wtd {
        WaitingTimeModel::Exponential { mean_wait } => {
            check_epsilon_and_ratio(epsilon, m)?;
            wtd.validate()?;
            Ok(exponential_coefficients(epsilon, mean_wait, m))
        }
        WaitingTimeModel::DoubleExponential { .. } => double_exponential_coefficients(epsilon, wtd, m),
    }
}

/// Continuous nVAF `A₀e^{−v₀t} + A₁e^{−v₁t} + A₂e^{−v₂t}` for the
/// double-exponential WTD.
pub fn nvaf_double_exponential(t_grid: &[f64], epsilon: f64, wtd: &WaitingTimeModel, m: f64) -> Result<VafCurve> {
    if !matches!(wtd, WaitingTimeModel::DoubleExponential { .. }) {
        return Err(Error::InvalidArgument(
            "nvaf_double_exponential needs a double-exponential waiting-time model".into(),
        ));
    }
    double_exponential_coefficients(epsilon, wtd, m)?.curve(t_grid)
}

/// Day-end term used in the seasonal nVAF.
///
/// `Reference` evaluates the boundary argument as `(t/2 − (p − T))²`.
/// `TimeChange` instead averages the stationary kernel over all start times
/// of a lag window inside the day, under the operational time
/// `φ(u) = ∫ ((x − p)² + q)/X dx`; this gives the signed arguments
/// `(T − p − t/2)` and `(p − t/2)` and tends to the stationary curve as
/// `q → ∞`. The two differ by `O(t/T)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeasonalForm {
    #[default]
    Reference,
    TimeChange,
}

/// Continuous nVAF under the rational intraday pattern:
///
/// `Σ_j A_j J v_j^{−1/2} e^{−v_j τ_min} [erf(√(v_j J₀)) + erf(√(v_j J_k))]`
///
/// with `J = √(πX/t) / (2(T − t))`, `J₀ = (t/X)(t/2 − p)²`,
/// `J_k = (t/X)(t/2 − (p − T))²`, `τ_min = t(t²/12 + q)/X` and
/// `X = T²/3 − pT + p² + q`. The normalization `a` cancels and is ignored.
pub fn nvaf_seasonal(
    t_grid: &[f64],
    epsilon: f64,
    wtd: &WaitingTimeModel,
    m: f64,
    season: &SeasonalityModel,
    form: SeasonalForm,
) -> Result<VafCurve> {
    validate_lag_grid(t_grid)?;
    season.validate()?;
    let coeffs = stationary_coefficients(epsilon, wtd, m)?;
    let values = t_grid.iter().map(|&t| seasonal_value(&coeffs, season, form, t)).collect::<Result<Vec<_>>>()?;
    Ok(VafCurve { delta_weight: 1.0, lags: t_grid.to_vec(), values })
}

/// Single-lag evaluation of the seasonal nVAF.
pub fn seasonal_value(coeffs: &VafCoefficients, season: &SeasonalityModel, form: SeasonalForm, t: f64) -> Result<f64> {
    let (p, q, day) = (season.p, season.q, season.day_length);
    if !(t > 0.0 && t < day) {
        return Err(Error::Domain(format!("lag {t} outside (0, T = {day})")));
    }
    let x = season.mean_quadratic();
    let j = (std::f64::consts::PI * x / t).sqrt() / (2.0 * (day - t));
    let tau_min = t * (t * t / 12.0 + q) / x;
    let scale = (t / x).sqrt();
    let mut total = 0.0;
    for (&a, &v) in coeffs.amplitudes.iter().zip(&coeffs.rates) {
        if a == 0.0 {
            continue;
        }
        let sv = v.sqrt();
        let bracket = match form {
            SeasonalForm::Reference => {
                // sqrt(v J0) = sqrt(v t / X) |t/2 - p|
                libm::erf(sv * scale * (0.5 * t - p).abs()) + libm::erf(sv * scale * (0.5 * t - (p - day)).abs())
            }
            SeasonalForm::TimeChange => {
                libm::erf(sv * scale * (p - 0.5 * t)) + libm::erf(sv * scale * (day - p - 0.5 * t))
            }
        };
        total += a * j / sv * (-v * tau_min).exp() * bracket;
    }
    Ok(total)
}
