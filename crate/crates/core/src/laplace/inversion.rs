use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A transform `F(s)` together with the real part of its rightmost
/// singularity. Both methods work on `F(s + σ)` with `σ` that abscissa, so a
/// negative value moves the nodes onto the slowest decay and keeps the
/// relative accuracy in the far tail.
pub struct LaplaceFunction<'a> {
    eval: Box<dyn Fn(Complex64) -> Complex64 + Send + Sync + 'a>,
    abscissa: f64,
}

impl<'a> LaplaceFunction<'a> {
    pub fn new<F>(abscissa: f64, f: F) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'a,
    {
        LaplaceFunction { eval: Box::new(f), abscissa }
    }

    /// Wraps a fallible evaluator; errors surface as NaN and are reported by
    /// the inversion routine.
    pub fn try_new<F>(abscissa: f64, f: F) -> Self
    where
        F: Fn(Complex64) -> Result<Complex64> + Send + Sync + 'a,
    {
        LaplaceFunction::new(abscissa, move |s| f(s).unwrap_or(Complex64::new(f64::NAN, f64::NAN)))
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        (self.eval)(s)
    }

    pub fn abscissa(&self) -> f64 {
        self.abscissa
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum InversionMethod {
    /// Gaver–Stehfest on the real axis; `order` must be even.
    GaverStehfest { order: usize },
    /// Fixed Talbot contour with `nodes` quadrature points.
    Talbot { nodes: usize },
}

impl InversionMethod {
    pub fn gaver_stehfest() -> Self {
        InversionMethod::GaverStehfest { order: 14 }
    }

    pub fn talbot() -> Self {
        InversionMethod::Talbot { nodes: 32 }
    }
}

impl Default for InversionMethod {
    fn default() -> Self {
        InversionMethod::talbot()
    }
}

/// Time-domain values with a per-point error estimate taken from the
/// difference against a lower-order run of the same method.
#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

/// Numerically inverts `f` on every point of `t_grid`.
pub fn invert_laplace(f: &LaplaceFunction<'_>, t_grid: &[f64], method: InversionMethod) -> Result<Inversion> {
    if t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidArgument("inversion times must be finite and > 0".into()));
    }
    let points: Vec<(f64, f64)> = match method {
        InversionMethod::GaverStehfest { order } => {
            if order < 4 || order % 2 != 0 || order > 30 {
                return Err(Error::InvalidArgument(format!(
                    "Gaver-Stehfest order must be even and within [4, 30], got {order}"
                )));
            }
            let hi = stehfest_weights(order);
            let lo = stehfest_weights(order - 2);
            t_grid.par_iter().map(|&t| gaver_stehfest_point(f, t, &hi, &lo)).collect::<Result<_>>()?
        }
        InversionMethod::Talbot { nodes } => {
            if nodes < 8 {
                return Err(Error::InvalidArgument(format!("Talbot needs at least 8 nodes, got {nodes}")));
            }
            let coarse = (nodes * 3 / 4).max(6);
            t_grid
                .par_iter()
                .map(|&t| {
                    let fine = talbot_point(f, t, nodes)?;
                    let rough = talbot_point(f, t, coarse)?;
                    Ok((fine, (fine - rough).abs()))
                })
                .collect::<Result<_>>()?
        }
    };
    let (values, errors) = points.into_iter().unzip();
    Ok(Inversion { values, errors })
}

/// Stehfest weights V_k, k = 1..=n.
fn stehfest_weights(n: usize) -> Vec<f64> {
    let half = n / 2;
    let fact = |m: usize| -> f64 { (1..=m).map(|i| i as f64).product() };
    (1..=n)
        .map(|k| {
            let mut acc = 0.0;
            for j in k.div_ceil(2)..=k.min(half) {
                acc += (j as f64).powi(half as i32) * fact(2 * j)
                    / (fact(half - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
            }
            if (k + half).is_multiple_of(2) {
                acc
            } else {
                -acc
            }
        })
        .collect()
}

fn gaver_stehfest_point(f: &LaplaceFunction<'_>, t: f64, hi: &[f64], lo: &[f64]) -> Result<(f64, f64)> {
    let shift = f.abscissa();
    let ln2t = std::f64::consts::LN_2 / t;
    let samples: Vec<f64> = (1..=hi.len()).map(|k| f.eval(Complex64::new(k as f64 * ln2t + shift, 0.0)).re).collect();
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::MethodFailure(format!(
            "transform not finite on the Gaver-Stehfest nodes at t = {t}; try Talbot"
        )));
    }
    let growth = (shift * t).exp();
    let sum = |w: &[f64]| -> f64 { w.iter().zip(&samples).map(|(a, b)| a * b).sum::<f64>() * ln2t * growth };
    let fine = sum(hi);
    let rough = sum(lo);
    let scale = hi.iter().zip(&samples).map(|(a, b)| (a * b).abs()).fold(0.0, f64::max) * ln2t * growth;
    let err = (fine - rough).abs();
    if !fine.is_finite() || err > 1e-2 * fine.abs() + 1e-12 * scale {
        return Err(Error::MethodFailure(format!(
            "Gaver-Stehfest terms cancel catastrophically at t = {t} (estimate {fine:e}, \
             order disagreement {err:e}); use the Talbot contour"
        )));
    }
    Ok((fine, err))
}

fn talbot_point(f: &LaplaceFunction<'_>, t: f64, nodes: usize) -> Result<f64> {
    let shift = f.abscissa();
    let m = nodes as f64;
    let r = 2.0 * m / (5.0 * t);
    let mut acc = 0.5 * (f.eval(Complex64::new(r + shift, 0.0)) * (r * t).exp()).re;
    for k in 1..nodes {
        let theta = k as f64 * std::f64::consts::PI / m;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let term = (s * t).exp() * f.eval(s + shift) * Complex64::new(1.0, sigma);
        acc += term.re;
    }
    let value = acc * r / m * (shift * t).exp();
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::MethodFailure(format!("non-finite Talbot sum at t = {t}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stehfest_weights_sum_to_zero() {
        for n in [8, 14, 18] {
            let w = stehfest_weights(n);
            let total: f64 = w.iter().sum();
            assert!(total.abs() < 1e-6 * w.iter().map(|v| v.abs()).sum::<f64>());
        }
        // classic N = 4 weights: -2, 26, -48, 24
        assert_eq!(stehfest_weights(4), vec![-2.0, 26.0, -48.0, 24.0]);
    }

    #[test]
    fn textbook_pairs() {
        let exp = LaplaceFunction::new(-0.5, |s| 1.0 / (s + 0.5));
        let ramp = LaplaceFunction::new(0.0, |s| 1.0 / (s * s));
        // Gaver-Stehfest at order 14 carries a truncation error of ~1.5e-7 here
        for (method, tol) in [(InversionMethod::talbot(), 1e-8), (InversionMethod::gaver_stehfest(), 1e-6)] {
            let a = invert_laplace(&exp, &[1.0], method).unwrap();
            assert!((a.values[0] - (-0.5f64).exp()).abs() < tol, "{method:?}: {}", a.values[0]);
            let b = invert_laplace(&ramp, &[3.0], method).unwrap();
            assert!((b.values[0] - 3.0).abs() < 3.0 * tol, "{method:?}: {}", b.values[0]);
        }
    }

    #[test]
    fn decaying_tail_keeps_relative_accuracy() {
        let f = LaplaceFunction::new(-0.7, |s| 1.0 / (s + 0.7));
        let v = invert_laplace(&f, &[40.0], InversionMethod::talbot()).unwrap();
        assert_relative_eq!(v.values[0], (-28.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn growing_functions_use_the_shift() {
        let f = LaplaceFunction::new(0.3, |s| 1.0 / (s - 0.3));
        let v = invert_laplace(&f, &[2.0, 5.0], InversionMethod::talbot()).unwrap();
        assert_relative_eq!(v.values[0], (0.6f64).exp(), max_relative = 1e-9);
        assert_relative_eq!(v.values[1], (1.5f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn oscillatory_transform_breaks_gaver_stehfest() {
        let f = LaplaceFunction::new(0.0, |s| 1.0 / (s * s + 1.0));
        let err = invert_laplace(&f, &[25.0], InversionMethod::gaver_stehfest()).unwrap_err();
        assert!(matches!(err, Error::MethodFailure(_)));
        let ok = invert_laplace(&f, &[2.0], InversionMethod::talbot()).unwrap();
        assert!((ok.values[0] - 2f64.sin()).abs() < 1e-6, "{}", ok.values[0]);
    }

    #[test]
    fn error_estimates_are_small_for_smooth_inputs() {
        let f = LaplaceFunction::new(-1.0, |s| 1.0 / (s + 1.0));
        let v = invert_laplace(&f, &[0.5, 1.0, 4.0], InversionMethod::talbot()).unwrap();
        assert!(v.errors.iter().all(|e| *e < 1e-8));
    }

    #[test]
    fn rejects_bad_arguments() {
        let f = LaplaceFunction::new(-1.0, |s| 1.0 / (s + 1.0));
        assert!(invert_laplace(&f, &[0.0], InversionMethod::talbot()).is_err());
        assert!(invert_laplace(&f, &[1.0], InversionMethod::GaverStehfest { order: 7 }).is_err());
    }
}
