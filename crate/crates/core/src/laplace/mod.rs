//! Transform-domain evaluators for the general walk and numerical inverse
//! Laplace transforms used to cross-check the closed forms.

mod inversion;
mod transforms;

pub use inversion::{invert_laplace, Inversion, InversionMethod, LaplaceFunction};
pub use transforms::{
    first_sojourn_laplace, first_wait_laplace, moment1_laplace, moment2_laplace, moment2_laplace_factored, propagator,
    sojourn_laplace, vaf_abscissa, vaf_abscissa_from_epsilon, vaf_continuous_laplace,
    vaf_continuous_laplace_from_ratio, vaf_laplace, wtd_laplace, PropagatorEvaluator,
};
