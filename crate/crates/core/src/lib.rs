//! Estimation of high-dimensional time-series models
//! `y_t = D z_t + A x_t + e_t` with observed regressors `z_t` and latent,
//! serially correlated factors `x_t`.
//!
//! The pipeline regresses `y` on `z` (least squares, instrumental variables
//! or a polynomial sieve), then estimates the loading space of `A` from the
//! eigenvectors of an accumulated lag-autocovariance statistic of the
//! residuals, and picks the number of factors by an eigenvalue-ratio rule.

pub mod cli;
pub mod dgp;
pub mod error;
pub mod factorspace;
pub mod io;
pub mod metrics;
pub mod montecarlo;
pub mod numerics;
pub mod panel;
pub mod regress;

pub use error::{Error, Result};
pub use factorspace::{fit_factor_model, FactorCount, FitOptions, Penalty, Regression};
pub use panel::{FactorFit, FitMethod, Panel};
