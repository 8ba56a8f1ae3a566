//! Tests of functional inequality hypotheses `max_j v_{τ,j}(x) ≤ 0` over a
//! region of covariates and indices, using one-sided `L_p` functionals of
//! kernel estimators and bootstrap critical values built on estimated
//! contact sets.
//!
//! Layout:
//!
//! - [`numerics`]: kernels, evaluation grids, quadrature, quantiles and the
//!   seeded random stream contract.
//! - [`estimators`]: local constant mean regression and exact local
//!   polynomial quantile regression.
//! - [`engine`]: `Λ_p` functionals, the statistic, contact sets, the `ĉ_n`
//!   rule and the bootstrap test.
//! - [`applications`]: field builders for the mean, auction and
//!   differences-in-differences problems.
//! - [`montecarlo`]: the coverage simulation harness.

pub mod applications;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod montecarlo;
pub mod numerics;

pub use error::{Error, Result};
