use num_complex::Complex64;

use crate::analytic::moment_ratio;
use crate::error::{Error, Result};
use crate::model::{JumpModel, WaitingTimeModel};

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn require_right_half_plane(s: Complex64) -> Result<()> {
    if s.re > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("transform variable {s} must satisfy Re(s) > 0")))
    }
}

/// The moment and VAF transforms are rational in `s` and `ψ̃(s)`, so they are
/// evaluated as their analytic continuation anywhere off the poles; the
/// Talbot contour needs points with `Re(s) < 0`.
fn require_regular(s: Complex64) -> Result<()> {
    if !s.is_finite() {
        return Err(Error::Domain(format!("transform variable {s} is not finite")));
    }
    if s == Complex64::new(0.0, 0.0) {
        return Err(Error::Pole("0".into()));
    }
    Ok(())
}

fn finite_or_pole(value: Complex64, s: Complex64) -> Result<Complex64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Pole(format!("{s}")))
    }
}

/// ψ̃(s) for the waiting-time law.
pub fn wtd_laplace(wtd: &WaitingTimeModel, s: Complex64) -> Result<Complex64> {
    wtd.validate()?;
    wtd.laplace(s)
}

/// ψ̃₁(s) = (1 − ψ̃(s)) / (⟨t⟩s), the transform of the equilibrium first wait.
///
/// For exponential mixtures this equals `Σ (wτ/⟨t⟩) / (1 + τs)`, which is
/// evaluated directly and stays exact as `s → 0`.
pub fn first_wait_laplace(wtd: &WaitingTimeModel, s: Complex64) -> Result<Complex64> {
    wtd.validate()?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (w, tau) in wtd.equilibrium_components() {
        if w == 0.0 {
            continue;
        }
        let denom = one() + s * tau;
        if denom.norm() < 1e-300 {
            return Err(Error::Pole(format!("{s}")));
        }
        acc += w / denom;
    }
    Ok(acc)
}

/// Ψ̃(s) = (1 − ψ̃(s)) / s.
pub fn sojourn_laplace(wtd: &WaitingTimeModel, s: Complex64) -> Result<Complex64> {
    // (1 - psi)/s = <t> psi1
    Ok(first_wait_laplace(wtd, s)? * wtd.mean_wait())
}

/// Ψ̃₁(s) = (1 − ψ̃₁(s)) / s.
pub fn first_sojourn_laplace(wtd: &WaitingTimeModel, s: Complex64) -> Result<Complex64> {
    if s == Complex64::new(0.0, 0.0) {
        return Err(Error::Pole("0".into()));
    }
    Ok((one() - first_wait_laplace(wtd, s)?) / s)
}

/// Soft propagator in the Fourier–Laplace domain, with the series
/// `S(K;s) = Σ_{n≥1} (εψ̃(s))^{n−1} H̃(nK)` summed to a relative tolerance.
#[derive(Debug, Clone)]
pub struct PropagatorEvaluator {
    pub wtd: WaitingTimeModel,
    pub jumps: JumpModel,
    pub series_tolerance: f64,
    pub max_terms: usize,
}

impl PropagatorEvaluator {
    pub fn new(wtd: WaitingTimeModel, jumps: JumpModel) -> Result<Self> {
        wtd.validate()?;
        jumps.validate()?;
        Ok(PropagatorEvaluator { wtd, jumps, series_tolerance: 1e-12, max_terms: 100_000 })
    }

    pub fn with_tolerance(mut self, series_tolerance: f64, max_terms: usize) -> Self {
        self.series_tolerance = series_tolerance;
        self.max_terms = max_terms;
        self
    }

    /// S(K;s), stopping once a term drops below `series_tolerance` times the
    /// partial sum.
    pub fn memory_series(&self, k: f64, psi: Complex64) -> Result<Complex64> {
        let ratio = psi * self.jumps.epsilon;
        let mut weight = one();
        let mut sum = Complex64::new(0.0, 0.0);
        for n in 1..=self.max_terms {
            let term = weight * self.jumps.magnitudes.characteristic(n as f64 * k);
            sum += term;
            if term.norm() <= self.series_tolerance * sum.norm() {
                return Ok(sum);
            }
            weight *= ratio;
        }
        Err(Error::Convergence { terms: self.max_terms, last_term: weight.norm() })
    }
}

/// P̃(K;s) = 1/s − (1 − ψ̃)/(⟨t⟩s²) + (1 − ψ̃)²/(⟨t⟩s²) · S / (1 − (1 − ε)ψ̃S).
pub fn propagator(k: f64, s: Complex64, eval: &PropagatorEvaluator) -> Result<Complex64> {
    require_right_half_plane(s)?;
    let psi = eval.wtd.laplace(s)?;
    let mean = eval.wtd.mean_wait();
    let series = eval.memory_series(k, psi)?;
    let eps = eval.jumps.epsilon;
    let s2 = s * s;
    let gap = one() - psi;
    Ok(one() / s - gap / (s2 * mean) + gap * gap / (s2 * mean) * series / (one() - psi * (1.0 - eps) * series))
}

/// m̃₁(s) = M₁ / (⟨t⟩s²).
pub fn moment1_laplace(jumps: &JumpModel, wtd: &WaitingTimeModel, s: Complex64) -> Result<Complex64> {
    require_regular(s)?;
    finite_or_pole(jumps.m1() / (s * s * wtd.mean_wait()), s)
}

/// m̃₂(s) = M₂(1 + εψ̃)/(⟨t⟩s²(1 − εψ̃)) + 2(1 − ε)ψ̃M₁²/(⟨t⟩s²(1 − ψ̃)(1 − εψ̃)).
pub fn moment2_laplace(jumps: &JumpModel, wtd: &WaitingTimeModel, s: Complex64) -> Result<Complex64> {
    require_regular(s)?;
    let psi = wtd.laplace(s)?;
    let (m1, m2, eps) = (jumps.m1(), jumps.m2(), jumps.epsilon);
    let base = s * s * wtd.mean_wait();
    let mem = one() - psi * eps;
    let value =
        m2 * (one() + psi * eps) / (base * mem) + 2.0 * (1.0 - eps) * m1 * m1 * psi / (base * (one() - psi) * mem);
    finite_or_pole(value, s)
}

/// Single-fraction form of m̃₂(s):
/// (M₂ + (1 − ε)(2M₁² − M₂)ψ̃ − εM₂ψ̃²) / (⟨t⟩s²(1 − ψ̃)(1 − εψ̃)).
pub fn moment2_laplace_factored(jumps: &JumpModel, wtd: &WaitingTimeModel, s: Complex64) -> Result<Complex64> {
    require_regular(s)?;
    let psi = wtd.laplace(s)?;
    let (m1, m2, eps) = (jumps.m1(), jumps.m2(), jumps.epsilon);
    let num = m2 + psi * (1.0 - eps) * (2.0 * m1 * m1 - m2) - psi * psi * eps * m2;
    finite_or_pole(num / (s * s * wtd.mean_wait() * (one() - psi) * (one() - psi * eps)), s)
}

/// Transform of the normalized VAF, delta included:
/// `(1 − M)(1 + εψ̃)/(1 − εψ̃) + M[(1 + ψ̃)/(1 − ψ̃) − 2/(⟨t⟩s)]`.
pub fn vaf_laplace(jumps: &JumpModel, wtd: &WaitingTimeModel, s: Complex64) -> Result<Complex64> {
    Ok(vaf_continuous_laplace(jumps, wtd, s)? + 1.0)
}

/// Transform of the continuous part only, i.e. [`vaf_laplace`] minus the
/// constant that carries the unit delta at lag zero.
pub fn vaf_continuous_laplace(jumps: &JumpModel, wtd: &WaitingTimeModel, s: Complex64) -> Result<Complex64> {
    jumps.validate()?;
    vaf_continuous_laplace_from_ratio(jumps.epsilon, moment_ratio(jumps)?, wtd, s)
}

/// [`vaf_continuous_laplace`] parameterized by `ε` and `M = M₁²/M₂`
/// directly, for fitted models that carry no magnitude law.
pub fn vaf_continuous_laplace_from_ratio(eps: f64, m: f64, wtd: &WaitingTimeModel, s: Complex64) -> Result<Complex64> {
    require_regular(s)?;
    if !(0.0..1.0).contains(&eps) || !(m > 0.0 && m <= 1.0) {
        return Err(Error::InvalidArgument(format!("need 0 <= epsilon < 1 and 0 < M <= 1, got {eps}, {m}")));
    }
    let psi = wtd.laplace(s)?;
    let memory = 2.0 * eps * psi / (one() - psi * eps);
    finite_or_pole(memory * (1.0 - m) + spread_bracket(wtd, s)? * m, s)
}

/// `2ψ̃/(1 − ψ̃) − 2/(⟨t⟩s)` without the cancellation of its two terms.
///
/// With `1 − ψ̃ = ⟨t⟩sψ̃₁` the bracket equals `2(ψ̃ − ψ̃₁)/(⟨t⟩sψ̃₁)`, and
/// since the weights `w(⟨t⟩ − τ)` sum to zero the division by `s` is done
/// analytically: `−2 Σ wτ(⟨t⟩ − τ)/(1 + τs) / (⟨t⟩²ψ̃₁)`. It vanishes
/// identically for a single exponential.
fn spread_bracket(wtd: &WaitingTimeModel, s: Complex64) -> Result<Complex64> {
    let mean = wtd.mean_wait();
    let mut num = Complex64::new(0.0, 0.0);
    for (w, tau) in wtd.components() {
        let gap = mean - tau;
        if w == 0.0 || gap == 0.0 {
            continue;
        }
        num += w * tau * gap / (one() + s * tau);
    }
    if num == Complex64::new(0.0, 0.0) {
        return Ok(num);
    }
    Ok(-2.0 * num / (mean * mean * first_wait_laplace(wtd, s)?))
}

/// Real part of the rightmost singularity of [`vaf_continuous_laplace`].
///
/// For `ε > 0` this is the root of `εψ̃(s) = 1` on `(−1/τ_max, 0)`, found by
/// bisection; `ψ̃` falls monotonically from `+∞` to 1 there. Every other
/// singularity lies left of `−1/τ_max`, which is returned for `ε = 0`.
pub fn vaf_abscissa(jumps: &JumpModel, wtd: &WaitingTimeModel) -> Result<f64> {
    jumps.validate()?;
    vaf_abscissa_from_epsilon(jumps.epsilon, wtd)
}

/// [`vaf_abscissa`] for a bare memory parameter.
pub fn vaf_abscissa_from_epsilon(eps: f64, wtd: &WaitingTimeModel) -> Result<f64> {
    wtd.validate()?;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in [0, 1), got {eps}")));
    }
    let left = wtd.pole_abscissa();
    if eps == 0.0 {
        return Ok(left);
    }
    let g = |x: f64| -> Result<f64> { Ok(eps * wtd.laplace(Complex64::new(x, 0.0))?.re - 1.0) };
    let (mut lo, mut hi) = (left, 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        // g > 0 left of the root
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // the right end of the bracket keeps the pole inside the contour
    Ok(hi)
}
