//! FZ loss family for joint (VaR, ES) forecasts.
//!
//! The FZ0 member used everywhere downstream is
//!
//! ```text
//! L(Y, v, e; α) = -1/(α e) · 1{Y <= v} (v - Y) + v/e + log(-e) - 1
//! ```
//!
//! which requires `e < 0` and, for consistency, `e <= v`. Loss differences
//! between two forecasts are invariant to rescaling `(Y, v, e)` by `k > 0`,
//! while loss levels shift by `log k`.
//!
//! The smoothed variant replaces the indicator with the logistic weight
//! `Γ(Y, v; τ) = 1 / (1 + exp(τ (Y - v)))`, which makes the loss (and any model
//! whose forcing variable uses the same weight) differentiable in `(v, e)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{AlphaLevel, ReturnSeries, RiskPath};
use crate::stats::{compensated_sum, norm_cdf, norm_pdf};

/// Realized return and joint forecast at tail level `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSample {
    pub y: f64,
    pub v: f64,
    pub e: f64,
    pub alpha: AlphaLevel,
}

impl LossSample {
    /// Checks `e <= v`, `e < 0` and finiteness.
    pub fn new(y: f64, v: f64, e: f64, alpha: AlphaLevel) -> Result<Self> {
        if !(y.is_finite() && v.is_finite() && e.is_finite()) {
            return Err(Error::domain(format!("non-finite sample ({y}, {v}, {e})")));
        }
        if e >= 0.0 {
            return Err(Error::domain(format!("ES must be negative, got {e}")));
        }
        if e > v {
            return Err(Error::domain(format!("ES {e} above VaR {v}")));
        }
        Ok(Self { y, v, e, alpha })
    }

    fn a(&self) -> f64 {
        self.alpha.value()
    }
}

/// Indicator smoothing: exact `1{Y <= v}` or a logistic weight with slope `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    Exact,
    Logistic(f64),
}

impl Smoothing {
    pub fn logistic(tau: f64) -> Result<Self> {
        if tau > 0.0 && tau.is_finite() {
            Ok(Smoothing::Logistic(tau))
        } else if tau == f64::INFINITY {
            Ok(Smoothing::Exact)
        } else {
            Err(Error::validation(format!("smoothing tau must be positive, got {tau}")))
        }
    }

    /// Weight on the tail event `Y <= v`.
    #[inline]
    pub fn weight(self, y: f64, v: f64) -> f64 {
        match self {
            Smoothing::Exact => {
                if y <= v {
                    1.0
                } else {
                    0.0
                }
            }
            Smoothing::Logistic(tau) => 1.0 / (1.0 + (tau * (y - v)).exp()),
        }
    }

    /// Derivative of [`Smoothing::weight`] with respect to `v` (zero when exact).
    #[inline]
    pub fn weight_dv(self, y: f64, v: f64) -> f64 {
        match self {
            Smoothing::Exact => 0.0,
            Smoothing::Logistic(tau) => {
                let g = self.weight(y, v);
                tau * g * (1.0 - g)
            }
        }
    }
}

impl std::fmt::Display for Smoothing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Smoothing::Exact => write!(f, "exact"),
            Smoothing::Logistic(t) => write!(f, "{t}"),
        }
    }
}

/// FZ0 loss without input validation. Used in hot loops; caller ensures `e < 0`.
#[inline]
pub fn fz0_value(y: f64, v: f64, e: f64, alpha: f64, smoothing: Smoothing) -> f64 {
    let w = smoothing.weight(y, v);
    -w * (v - y) / (alpha * e) + v / e + (-e).ln() - 1.0
}

pub fn fz0_loss(s: &LossSample) -> f64 {
    fz0_value(s.y, s.v, s.e, s.a(), Smoothing::Exact)
}

pub fn fz0_smoothed(s: &LossSample, smoothing: Smoothing) -> f64 {
    fz0_value(s.y, s.v, s.e, s.a(), smoothing)
}

/// General FZ loss with caller-supplied `G1`, `G2` and an antiderivative of `G2`.
///
/// `G1 = 0`, `G2(x) = -1/x`, `calG2(x) = -log(-x)` reproduces [`fz0_loss`].
pub fn fz_loss_general<G1, G2, CG2>(s: &LossSample, g1: G1, g2: G2, cal_g2: CG2) -> Result<f64>
where
    G1: Fn(f64) -> f64,
    G2: Fn(f64) -> f64,
    CG2: Fn(f64) -> f64,
{
    let a = s.a();
    let hit = if s.y <= s.v { 1.0 } else { 0.0 };
    let g2e = g2(s.e);
    if !(g2e > 0.0) {
        return Err(Error::domain(format!("G2(e) = {g2e} is not positive")));
    }
    Ok((hit - a) * (g1(s.v) - g1(s.y) + g2e * s.v / a) - g2e * (hit * s.y / a - s.e) - cal_g2(s.e))
}

/// Partial derivatives of the exact FZ0 loss in `(v, e)`; undefined at `Y = v`.
pub fn fz0_gradient(s: &LossSample) -> Result<(f64, f64)> {
    if s.y == s.v {
        return Err(Error::domain("FZ0 gradient undefined at Y = v"));
    }
    let f = forcing_vars(s, Smoothing::Exact);
    let (a, v, e) = (s.a(), s.v, s.e);
    Ok((f.lambda_v / (a * v * e), -(f.lambda_v + a * f.lambda_e) / (a * e * e)))
}

/// Partial derivatives of the smoothed FZ0 loss in `(v, e)`.
///
/// Includes the derivative of the logistic weight, so it is the exact gradient
/// of [`fz0_smoothed`] for finite `tau`. In exact mode it matches
/// [`fz0_gradient`] away from `Y = v`.
pub fn fz0_smoothed_gradient(s: &LossSample, smoothing: Smoothing) -> (f64, f64) {
    let (y, v, e, a) = (s.y, s.v, s.e, s.a());
    let w = smoothing.weight(y, v);
    let dw = smoothing.weight_dv(y, v);
    let d_v = -(dw * (v - y) + w) / (a * e) + 1.0 / e;
    let d_e = w * (v - y) / (a * e * e) - v / (e * e) + 1.0 / e;
    (d_v, d_e)
}

/// Score-based forcing variables of the FZ0 loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingVars {
    pub lambda_v: f64,
    pub lambda_e: f64,
}

/// `λ_v = -v (1{Y<=v} - α)`, `λ_e = 1{Y<=v} Y / α - e`, with the indicator
/// optionally smoothed.
pub fn forcing_vars(s: &LossSample, smoothing: Smoothing) -> ForcingVars {
    forcing_raw(s.y, s.v, s.e, s.a(), smoothing)
}

#[inline]
pub(crate) fn forcing_raw(y: f64, v: f64, e: f64, alpha: f64, smoothing: Smoothing) -> ForcingVars {
    let w = smoothing.weight(y, v);
    ForcingVars {
        lambda_v: -v * (w - alpha),
        lambda_e: w * y / alpha - e,
    }
}

/// Hessian of the expected FZ0 loss in `(v, e)` when `Y ~ N(0, 1)`.
pub fn expected_loss_hessian_normal(v: f64, e: f64, alpha: AlphaLevel) -> Result<[[f64; 2]; 2]> {
    if !(e < 0.0) {
        return Err(Error::domain(format!("ES must be negative, got {e}")));
    }
    let a = alpha.value();
    let f = norm_pdf(v);
    let cdf = norm_cdf(v);
    // E[1{Y <= v} Y] = -φ(v) for the standard Normal
    let partial_mean = -f;
    let vv = -f / (a * e);
    let ve = (cdf - a) / (a * e * e);
    let ee = 1.0 / (e * e) - 2.0 / (a * e * e * e) * ((cdf - a) * v - (partial_mean - a * e));
    Ok([[vv, ve], [ve, ee]])
}

/// Quantile ("tick") loss `(1{y <= v} - α)(v - y)`.
pub fn tick_loss(y: f64, v: f64, alpha: AlphaLevel) -> f64 {
    tick_value(y, v, alpha.value(), Smoothing::Exact)
}

#[inline]
pub fn tick_value(y: f64, v: f64, alpha: f64, smoothing: Smoothing) -> f64 {
    (smoothing.weight(y, v) - alpha) * (v - y)
}

/// Mean FZ0 loss over a sample, summed in index order with compensation.
pub fn average_loss(
    y: &ReturnSeries,
    path: &RiskPath,
    alpha: AlphaLevel,
    smoothing: Smoothing,
) -> Result<f64> {
    average_loss_raw(y.values(), path.v(), path.e(), alpha.value(), smoothing)
}

pub fn average_loss_raw(y: &[f64], v: &[f64], e: &[f64], alpha: f64, smoothing: Smoothing) -> Result<f64> {
    if y.len() != v.len() || v.len() != e.len() {
        return Err(Error::validation(format!(
            "length mismatch: {} returns, {} VaR, {} ES",
            y.len(),
            v.len(),
            e.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::validation("empty sample"));
    }
    let total = compensated_sum((0..y.len()).map(|t| fz0_value(y[t], v[t], e[t], alpha, smoothing)));
    Ok(total / y.len() as f64)
}

/// Per-observation FZ0 losses.
pub fn loss_series(y: &[f64], v: &[f64], e: &[f64], alpha: f64) -> Vec<f64> {
    (0..y.len())
        .map(|t| fz0_value(y[t], v[t], e[t], alpha, Smoothing::Exact))
        .collect()
}
