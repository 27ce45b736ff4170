//! Tail dependence estimation for bivariate loss data: a pool of parametric
//! copulas, nonparametric estimators, BIC-weighted model averaging and
//! finite mixtures of copula regressions fitted by EM.

// `!(x > 0.0)` style guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;

pub mod bma;
pub mod copula;
pub mod data;
pub mod empirical;
pub mod fitting;
pub mod mixture;
pub mod optim;
pub mod quad;
pub mod sampling;
pub mod special;
pub mod studies;

pub use error::{Error, Result};
