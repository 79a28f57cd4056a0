//! Thin adapter from closure-based residuals to the MINPACK-style
//! Levenberg–Marquardt solver, with a central-difference Jacobian.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::storage::Owned;
use nalgebra::{DMatrix, DVector, Dyn};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LsFit {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub cost: f64,
    pub converged: bool,
}

struct Problem<'a> {
    residuals: &'a (dyn Fn(&[f64]) -> Option<Vec<f64>> + Sync),
    x: DVector<f64>,
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.x.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.x.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let r = (self.residuals)(self.x.as_slice())?;
        r.iter().all(|v| v.is_finite()).then(|| DVector::from_vec(r))
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let n = self.x.len();
        let mut x = self.x.as_slice().to_vec();
        let mut cols = Vec::with_capacity(n);
        for i in 0..n {
            let h = 1e-6 * x[i].abs().max(1e-3);
            let x0 = x[i];
            x[i] = x0 + h;
            let up = (self.residuals)(&x)?;
            x[i] = x0 - h;
            let down = (self.residuals)(&x)?;
            x[i] = x0;
            cols.push(DVector::from_iterator(up.len(), up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * h))));
        }
        let m = cols.first()?.len();
        let jac = DMatrix::from_fn(m, n, |r, c| cols[c][r]);
        jac.iter().all(|v| v.is_finite()).then_some(jac)
    }
}

/// Minimizes `Σ r(x)²` from `x0`. Returns `None` if the residuals cannot be
/// evaluated at the starting point.
pub(crate) fn least_squares(residuals: &(dyn Fn(&[f64]) -> Option<Vec<f64>> + Sync), x0: &[f64]) -> Option<LsFit> {
    residuals(x0)?;
    let problem = Problem { residuals, x: DVector::from_column_slice(x0) };
    let (solved, report) = LevenbergMarquardt::new().with_patience(400).minimize(problem);
    let x = solved.x.as_slice().to_vec();
    let r = residuals(&x)?;
    let cost = r.iter().map(|v| v * v).sum::<f64>();
    cost.is_finite().then_some(LsFit { x, cost, converged: report.termination.was_successful() })
}
