//! Joint Value-at-Risk / Expected Shortfall modeling with the FZ0 loss.
//!
//! The crate covers the full workflow for semiparametric tail-risk models:
//!
//! - [`loss`]: the FZ loss family, the zero-homogeneous FZ0 member, its
//!   logistic-smoothed variant, gradients, forcing variables and the tick loss.
//! - [`dist`]: standardized innovation distributions (Normal, Hansen skew-t,
//!   empirical) and their `(VaR, ES)` tail pairs.
//! - [`models`]: filters mapping parameters and returns to VaR/ES paths
//!   (two- and one-factor GAS, GARCH-FZ, hybrid, rolling window,
//!   location-scale GARCH), news impact curves.
//! - [`estimate`]: M-estimation by FZ0 minimization with smoothing
//!   continuation, QMLE and CAViaR comparators, sandwich covariances.
//! - [`backtest`]: out-of-sample losses, Diebold-Mariano and DQ/DES tests.
//! - [`simulate`]: GARCH(1,1) data generating processes and the Monte Carlo
//!   study driver.
//! - [`cli`]: the command-line front end used by the `fzrisk` binary.
//!
//! Returns are handled in percent units throughout.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod cli;
pub mod dist;
pub mod error;
pub mod estimate;
pub mod loss;
pub mod models;
pub mod optim;
pub mod quad;
pub mod series;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use series::{AlphaLevel, ReturnSeries, RiskPath, SampleSplit};
