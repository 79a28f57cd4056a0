//! Parameter types for the directed walk: waiting-time law, jump magnitudes
//! with one-step memory, and the rational intraday activity pattern.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative gap below which two time scales are treated as equal.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Largest accepted memory strength. Values closer to 1 freeze the magnitude
/// for ~1/(1 − ε) jumps and leave nothing resolvable in double precision.
pub const EPSILON_MAX: f64 = 1.0 - 1e-9;

/// Waiting-time distribution between consecutive jumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WaitingTimeModel {
    Exponential { mean_wait: f64 },
    DoubleExponential { tau1: f64, tau2: f64, weight: f64 },
}

impl WaitingTimeModel {
    pub fn exponential(mean_wait: f64) -> Result<Self> {
        let m = WaitingTimeModel::Exponential { mean_wait };
        m.validate()?;
        Ok(m)
    }

    pub fn double_exponential(tau1: f64, tau2: f64, weight: f64) -> Result<Self> {
        let m = WaitingTimeModel::DoubleExponential { tau1, tau2, weight };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidModel(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        match *self {
            WaitingTimeModel::Exponential { mean_wait } => positive("mean_wait", mean_wait),
            WaitingTimeModel::DoubleExponential { tau1, tau2, weight } => {
                positive("tau1", tau1)?;
                positive("tau2", tau2)?;
                if !(0.0..=1.0).contains(&weight) {
                    return Err(Error::InvalidModel(format!("weight must lie in [0,1], got {weight}")));
                }
                Ok(())
            }
        }
    }

    /// Mixture components as `(weight, time scale)` pairs.
    pub fn components(&self) -> Vec<(f64, f64)> {
        match *self {
            WaitingTimeModel::Exponential { mean_wait } => vec![(1.0, mean_wait)],
            WaitingTimeModel::DoubleExponential { tau1, tau2, weight } => {
                vec![(weight, tau1), (1.0 - weight, tau2)]
            }
        }
    }

    /// Mean waiting time ⟨t⟩.
    pub fn mean_wait(&self) -> f64 {
        self.components().iter().map(|(w, tau)| w * tau).sum()
    }

    /// Second raw moment ∫ t² ψ(t) dt.
    pub fn second_moment(&self) -> f64 {
        self.components().iter().map(|(w, tau)| 2.0 * w * tau * tau).sum()
    }

    pub fn density(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        self.components().iter().map(|(w, tau)| w / tau * (-t / tau).exp()).sum()
    }

    /// Sojourn probability Ψ(t) = P(wait > t).
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        self.components().iter().map(|(w, tau)| w * (-t / tau).exp()).sum()
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.components().iter().map(|(w, tau)| -w * (-t / tau).exp_m1()).sum()
    }

    /// Laplace transform ψ̃(s).
    pub fn laplace(&self, s: Complex64) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (w, tau) in self.components() {
            if w == 0.0 {
                continue;
            }
            let denom = Complex64::new(1.0, 0.0) + s * tau;
            if denom.norm() < 1e-300 {
                return Err(Error::Pole(format!("{s}")));
            }
            acc += w / denom;
        }
        Ok(acc)
    }

    /// Rightmost pole of ψ̃(s), i.e. −1/max(τ).
    pub fn pole_abscissa(&self) -> f64 {
        let tau_max = self.components().iter().filter(|(w, _)| *w > 0.0).map(|(_, tau)| *tau).fold(0.0, f64::max);
        -1.0 / tau_max
    }

    /// Mixture of the equilibrium first-wait density ψ₁(t) = Ψ(t)/⟨t⟩.
    ///
    /// For a mixture of exponentials ψ₁ is again a mixture over the same time
    /// scales with weights reweighted by `w·τ/⟨t⟩`.
    pub fn equilibrium_components(&self) -> Vec<(f64, f64)> {
        let mean = self.mean_wait();
        self.components().into_iter().map(|(w, tau)| (w * tau / mean, tau)).collect()
    }

    /// Collapses a double exponential whose components coincide (equal time
    /// scales, or weight 0 or 1) to the equivalent single exponential.
    pub fn reduced(&self) -> WaitingTimeModel {
        match *self {
            WaitingTimeModel::DoubleExponential { tau1, tau2, weight } => {
                if weight <= 0.0 {
                    WaitingTimeModel::Exponential { mean_wait: tau2 }
                } else if weight >= 1.0 {
                    WaitingTimeModel::Exponential { mean_wait: tau1 }
                } else if ((tau1 - tau2) / tau1.max(tau2)).abs() < DEGENERACY_TOL {
                    WaitingTimeModel::Exponential { mean_wait: weight * tau1 + (1.0 - weight) * tau2 }
                } else {
                    *self
                }
            }
            other => other,
        }
    }

    /// Same family with every time scale multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> WaitingTimeModel {
        match *self {
            WaitingTimeModel::Exponential { mean_wait } => {
                WaitingTimeModel::Exponential { mean_wait: mean_wait * factor }
            }
            WaitingTimeModel::DoubleExponential { tau1, tau2, weight } => {
                WaitingTimeModel::DoubleExponential { tau1: tau1 * factor, tau2: tau2 * factor, weight }
            }
        }
    }
}

/// Distribution of the (strictly positive) jump magnitudes H(R).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MagnitudeDist {
    Degenerate { r0: f64 },
    Exponential { mean: f64 },
    Empirical { values: Vec<f64>, probabilities: Vec<f64> },
}

impl MagnitudeDist {
    /// Builds a discrete law from weighted support points. Duplicate values are
    /// merged and the weights normalized.
    pub fn empirical(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::InvalidModel(
                "empirical distribution needs equally sized, non-empty value and weight tables".into(),
            ));
        }
        let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
        if pairs.iter().any(|&(v, w)| !v.is_finite() || !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidModel("empirical table holds non-finite or negative entries".into()));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (v, w) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += w,
                _ => merged.push((v, w)),
            }
        }
        merged.retain(|&(_, w)| w > 0.0);
        let total: f64 = merged.iter().map(|&(_, w)| w).sum();
        if total <= 0.0 {
            return Err(Error::InvalidModel("empirical weights sum to zero".into()));
        }
        let dist = MagnitudeDist::Empirical {
            values: merged.iter().map(|&(v, _)| v).collect(),
            probabilities: merged.iter().map(|&(_, w)| w / total).collect(),
        };
        dist.validate()?;
        Ok(dist)
    }

    /// Empirical law of observed magnitudes, each sample weighted equally.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let ones = vec![1.0; samples.len()];
        Self::empirical(samples, &ones)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MagnitudeDist::Degenerate { r0 } => {
                if !(r0.is_finite() && *r0 > 0.0) {
                    return Err(Error::InvalidModel(format!("jump size must be > 0, got {r0}")));
                }
            }
            MagnitudeDist::Exponential { mean } => {
                if !(mean.is_finite() && *mean > 0.0) {
                    return Err(Error::InvalidModel(format!("jump mean must be > 0, got {mean}")));
                }
            }
            MagnitudeDist::Empirical { values, probabilities } => {
                if values.is_empty() || values.len() != probabilities.len() {
                    return Err(Error::InvalidModel("empirical jump table is empty or ragged".into()));
                }
                if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::InvalidModel("directed walk needs strictly positive jump magnitudes".into()));
                }
                if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(Error::InvalidModel("invalid probability in empirical table".into()));
                }
                let total: f64 = probabilities.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidModel(format!("probabilities sum to {total}, expected 1")));
                }
            }
        }
        Ok(())
    }

    /// Raw moment E[R^k].
    pub fn raw_moment(&self, k: u32) -> f64 {
        match self {
            MagnitudeDist::Degenerate { r0 } => r0.powi(k as i32),
            MagnitudeDist::Exponential { mean } => {
                let fact: f64 = (1..=k).map(f64::from).product();
                fact * mean.powi(k as i32)
            }
            MagnitudeDist::Empirical { values, probabilities } => {
                values.iter().zip(probabilities).map(|(v, p)| p * v.powi(k as i32)).sum()
            }
        }
    }

    /// Characteristic function H̃(K) = E[exp(iKR)]; an exact finite sum for
    /// the empirical law.
    pub fn characteristic(&self, k: f64) -> Complex64 {
        match self {
            MagnitudeDist::Degenerate { r0 } => Complex64::from_polar(1.0, k * r0),
            MagnitudeDist::Exponential { mean } => Complex64::new(1.0, 0.0) / Complex64::new(1.0, -k * mean),
            MagnitudeDist::Empirical { values, probabilities } => {
                values.iter().zip(probabilities).map(|(v, p)| Complex64::from_polar(*p, k * v)).sum()
            }
        }
    }

    pub fn is_degenerate(&self) -> bool {
        match self {
            MagnitudeDist::Degenerate { .. } => true,
            MagnitudeDist::Exponential { .. } => false,
            MagnitudeDist::Empirical { values, .. } => values.len() == 1,
        }
    }
}

/// Jump magnitudes together with the one-step memory strength ε.
///
/// With probability ε a jump repeats the previous magnitude exactly,
/// otherwise it is drawn afresh from the magnitude law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpModel {
    pub magnitudes: MagnitudeDist,
    pub epsilon: f64,
}

impl JumpModel {
    pub fn new(magnitudes: MagnitudeDist, epsilon: f64) -> Result<Self> {
        let m = JumpModel { magnitudes, epsilon };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.magnitudes.validate()?;
        if !(self.epsilon.is_finite() && (0.0..=EPSILON_MAX).contains(&self.epsilon)) {
            return Err(Error::InvalidModel(format!(
                "memory strength epsilon must lie in [0, 1 - 1e-9], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// M₁, the mean jump magnitude.
    pub fn m1(&self) -> f64 {
        self.magnitudes.raw_moment(1)
    }

    /// M₂, the second raw moment of the magnitudes.
    pub fn m2(&self) -> f64 {
        self.magnitudes.raw_moment(2)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        JumpModel::new(self.magnitudes.clone(), epsilon)
    }
}

/// Rational intraday pattern θ(t) = 1 / (a·((t − p)² + q)) interpreted as the
/// local mean waiting time at time of day `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonalityModel {
    pub p: f64,
    pub q: f64,
    pub day_length: f64,
    pub normalization: f64,
}

impl SeasonalityModel {
    pub fn new(p: f64, q: f64, day_length: f64, normalization: f64) -> Result<Self> {
        let m = SeasonalityModel { p, q, day_length, normalization };
        m.validate()?;
        Ok(m)
    }

    /// Chooses `a` so that the day-averaged event rate 1/θ equals 1/⟨t⟩,
    /// which keeps the expected number of events per day equal to the
    /// stationary walk with the same waiting-time law.
    pub fn with_mean_wait(p: f64, q: f64, day_length: f64, mean_wait: f64) -> Result<Self> {
        let probe = SeasonalityModel { p, q, day_length, normalization: 1.0 };
        probe.validate()?;
        if !(mean_wait.is_finite() && mean_wait > 0.0) {
            return Err(Error::InvalidModel(format!("mean wait must be > 0, got {mean_wait}")));
        }
        SeasonalityModel::new(p, q, day_length, 1.0 / (mean_wait * probe.mean_quadratic()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q.is_finite() && self.q > 0.0) {
            return Err(Error::InvalidModel(format!("seasonality q must be > 0, got {}", self.q)));
        }
        if !(self.day_length.is_finite() && self.day_length > 0.0) {
            return Err(Error::InvalidModel(format!("day length must be > 0, got {}", self.day_length)));
        }
        if !self.p.is_finite() {
            return Err(Error::InvalidModel("seasonality p must be finite".into()));
        }
        if !(self.normalization.is_finite() && self.normalization > 0.0) {
            return Err(Error::InvalidModel(format!(
                "seasonality normalization must be > 0, got {}",
                self.normalization
            )));
        }
        Ok(())
    }

    /// Local mean waiting time θ(t).
    pub fn theta(&self, t: f64) -> f64 {
        let d = t - self.p;
        1.0 / (self.normalization * (d * d + self.q))
    }

    /// Day average X = T²/3 − pT + p² + q of the quadratic (t − p)² + q.
    pub fn mean_quadratic(&self) -> f64 {
        let t = self.day_length;
        t * t / 3.0 - self.p * t + self.p * self.p + self.q
    }

    /// Activity relative to the day average: ((t − p)² + q) / X. Integrates to
    /// `day_length` over one day.
    pub fn relative_intensity(&self, t: f64) -> f64 {
        let d = t - self.p;
        (d * d + self.q) / self.mean_quadratic()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_wtd() -> WaitingTimeModel {
        WaitingTimeModel::double_exponential(3.63, 32.57, 0.586).unwrap()
    }

    #[test]
    fn mean_wait_of_mixture() {
        assert_relative_eq!(reference_wtd().mean_wait(), 0.586 * 3.63 + 0.414 * 32.57, epsilon = 1e-12);
        assert_eq!(WaitingTimeModel::exponential(2.5).unwrap().mean_wait(), 2.5);
    }

    #[test]
    fn density_integrates_to_one() {
        // composite Simpson on [0, 50 <t>]
        for wtd in [reference_wtd(), WaitingTimeModel::exponential(1.7).unwrap()] {
            let upper = 50.0 * wtd.mean_wait();
            let n = 400_000;
            let h = upper / n as f64;
            let mut acc = wtd.density(0.0) + wtd.density(upper);
            for i in 1..n {
                let c = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += c * wtd.density(i as f64 * h);
            }
            let integral = acc * h / 3.0;
            // mass beyond 50<t> is below 1e-9 for both laws
            assert!((integral - 1.0).abs() < 1e-9, "integral {integral}");
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(WaitingTimeModel::exponential(0.0).is_err());
        assert!(WaitingTimeModel::double_exponential(1.0, -2.0, 0.5).is_err());
        assert!(WaitingTimeModel::double_exponential(1.0, 2.0, 1.5).is_err());
        assert!(JumpModel::new(MagnitudeDist::Exponential { mean: 1.0 }, 1.0).is_err());
        assert!(JumpModel::new(MagnitudeDist::Exponential { mean: 1.0 }, 1.0 - 1e-15).is_err());
        assert!(JumpModel::new(MagnitudeDist::Exponential { mean: 1.0 }, 0.999).is_ok());
        assert!(MagnitudeDist::empirical(&[1.0, -1.0], &[1.0, 1.0]).is_err());
        assert!(MagnitudeDist::empirical(&[], &[]).is_err());
        assert!(SeasonalityModel::new(1.0, 0.0, 10.0, 1.0).is_err());
    }

    #[test]
    fn empirical_merges_duplicates() {
        let d = MagnitudeDist::from_samples(&[2.0, 1.0, 2.0, 2.0]).unwrap();
        match d {
            MagnitudeDist::Empirical { values, probabilities } => {
                assert_eq!(values, vec![1.0, 2.0]);
                assert_relative_eq!(probabilities[1], 0.75);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn characteristic_function_derivative_gives_mean() {
        let d = MagnitudeDist::empirical(&[1.0, 3.0], &[0.25, 0.75]).unwrap();
        let h = 1e-5;
        let deriv = (d.characteristic(h) - d.characteristic(-h)) / (2.0 * h);
        assert_relative_eq!(deriv.im, d.raw_moment(1), epsilon = 1e-8);
        let e = MagnitudeDist::Exponential { mean: 2.0 };
        let deriv = (e.characteristic(h) - e.characteristic(-h)) / (2.0 * h);
        assert_relative_eq!(deriv.im, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn equilibrium_weights_for_reference_mixture() {
        let comps = reference_wtd().equilibrium_components();
        assert_relative_eq!(comps[0].0, 0.586 * 3.63 / 15.611_16, epsilon = 1e-6);
        assert_relative_eq!(comps[0].0 + comps[1].0, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn seasonal_normalization_matches_event_count() {
        let s = SeasonalityModel::with_mean_wait(14986.0, 2.25e8, 28800.0, 15.611).unwrap();
        // day average of 1/theta must equal 1/<t>
        let n = 10_000;
        let h = s.day_length / n as f64;
        let avg: f64 = (0..n).map(|i| 1.0 / s.theta((i as f64 + 0.5) * h)).sum::<f64>() / n as f64;
        assert_relative_eq!(avg, 1.0 / 15.611, max_relative = 1e-8);
        assert!(s.theta(s.p) > s.theta(0.0));
    }
}
