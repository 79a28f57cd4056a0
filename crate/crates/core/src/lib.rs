#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod estimator;
pub mod laplace;
pub mod model;
mod par;
pub mod simulator;
