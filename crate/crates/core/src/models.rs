//! Filters mapping parameters and a return series to VaR/ES paths.
//!
//! Every filter produces forecasts for `t = 0..T` from information up to
//! `t - 1`; the `*_extended` variants also return the one-step-ahead forecast
//! for `t = T`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::{TailPair, TailSource};
use crate::error::{Error, Result};
use crate::loss::{forcing_raw, Smoothing};
use crate::series::{first_invalid, AlphaLevel, RiskPath};
use crate::stats::{sorted_tail_pair, tail_rank, variance};

const KAPPA_MAX: f64 = 700.0;
const LOG_FLOOR: f64 = 1e-8;

/// Where a raw filter stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stop {
    NonFinite(usize),
    Invalid(usize),
}

fn stop_to_error(stop: Stop, v: &[f64], e: &[f64]) -> Error {
    match stop {
        Stop::NonFinite(t) => Error::Numeric {
            t,
            msg: "filter produced a non-finite value".into(),
        },
        Stop::Invalid(t) => Error::validation(format!(
            "risk path invariant e <= v < 0 violated at t={t}: v={}, e={}",
            v[t], e[t]
        )),
    }
}

#[inline]
fn check(t: usize, v: f64, e: f64) -> std::result::Result<(), Stop> {
    if !(v.is_finite() && e.is_finite()) {
        Err(Stop::NonFinite(t))
    } else if !(v < 0.0 && e <= v) {
        Err(Stop::Invalid(t))
    } else {
        Ok(())
    }
}

/// Two-factor GAS: `(v, e)_t = w + diag(b) (v, e)_{t-1} + A λ_{t-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gas2fParams {
    pub w: [f64; 2],
    pub b: [f64; 2],
    /// Row `i` holds the loadings of equation `i` (VaR, ES) on `(λ_v, λ_e)`.
    pub a: [[f64; 2]; 2],
}

impl Gas2fParams {
    pub const NAMES: [&'static str; 8] = ["w_v", "w_e", "b_v", "b_e", "a_vv", "a_ve", "a_ev", "a_ee"];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.w[0], self.w[1], self.b[0], self.b[1], self.a[0][0], self.a[0][1], self.a[1][0], self.a[1][1],
        ]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            w: [x[0], x[1]],
            b: [x[2], x[3]],
            a: [[x[4], x[5]], [x[6], x[7]]],
        }
    }

    /// Fixed point `w / (1 - b)` of the recursion with the mean-zero forcing removed.
    pub fn unconditional_mean(&self) -> (f64, f64) {
        (self.w[0] / (1.0 - self.b[0]), self.w[1] / (1.0 - self.b[1]))
    }

    #[inline]
    pub fn step(&self, y: f64, v: f64, e: f64, alpha: f64, smoothing: Smoothing) -> (f64, f64) {
        let lam = forcing_raw(y, v, e, alpha, smoothing);
        (
            self.w[0] + self.b[0] * v + self.a[0][0] * lam.lambda_v + self.a[0][1] * lam.lambda_e,
            self.w[1] + self.b[1] * e + self.a[1][0] * lam.lambda_v + self.a[1][1] * lam.lambda_e,
        )
    }
}

/// One-factor GAS: `v_t = a exp(κ_t)`, `e_t = b exp(κ_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gas1fParams {
    pub beta: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
}

impl Gas1fParams {
    pub const NAMES: [&'static str; 4] = ["beta", "gamma", "a", "b"];

    pub fn validate(&self) -> Result<()> {
        check_tail(self.a, self.b)?;
        if !(self.beta.is_finite() && self.gamma.is_finite()) {
            return Err(Error::validation("non-finite GAS-1F parameter"));
        }
        Ok(())
    }
}

fn check_tail(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && b <= a && a < 0.0) {
        return Err(Error::validation(format!("tail scale factors need b <= a < 0, got a={a}, b={b}")));
    }
    Ok(())
}

/// GARCH(1,1) volatility with `(v, e) = (a, b) σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub omega: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tail: TailPair,
}

impl GarchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::validation(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.beta >= 0.0 && self.gamma >= 0.0) {
            return Err(Error::validation("GARCH beta and gamma must be non-negative"));
        }
        if !(self.beta + self.gamma < 1.0) {
            return Err(Error::validation(format!(
                "GARCH beta + gamma = {} is not covariance stationary",
                self.beta + self.gamma
            )));
        }
        check_tail(self.tail.a, self.tail.b)
    }

    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.beta - self.gamma)
    }
}

/// One-factor GAS with an extra `δ log|Y_{t-1}|` term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridParams {
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub tail: TailPair,
}

impl HybridParams {
    pub const NAMES: [&'static str; 5] = ["beta", "gamma", "delta", "a", "b"];
}

/// Expected-shortfall convention for the rolling window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RollingMode {
    /// Each in-window return is compared with its own historical VaR forecast.
    #[default]
    AsPrinted,
    /// All in-window returns are compared with the current VaR forecast.
    FixedT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingParams {
    pub window: usize,
    #[serde(default)]
    pub mode: RollingMode,
}

impl RollingParams {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            mode: RollingMode::AsPrinted,
        }
    }
}

// ---------------------------------------------------------------------------
// raw filters writing `y.len() + 1` forecasts

pub(crate) fn gas2f_raw(
    y: &[f64],
    p: &Gas2fParams,
    alpha: f64,
    init: (f64, f64),
    smoothing: Smoothing,
    v: &mut Vec<f64>,
    e: &mut Vec<f64>,
) -> std::result::Result<(), Stop> {
    v.clear();
    e.clear();
    let (mut vt, mut et) = init;
    for t in 0..=y.len() {
        if t > 0 {
            (vt, et) = p.step(y[t - 1], vt, et, alpha, smoothing);
        }
        v.push(vt);
        e.push(et);
        check(t, vt, et)?;
    }
    Ok(())
}

#[inline]
fn one_factor_forcing(y: f64, v: f64, e: f64, alpha: f64, smoothing: Smoothing) -> f64 {
    -(smoothing.weight(y, v) * y / alpha - e) / e
}

pub(crate) fn gas1f_raw(
    y: &[f64],
    p: &Gas1fParams,
    alpha: f64,
    smoothing: Smoothing,
    v: &mut Vec<f64>,
    e: &mut Vec<f64>,
) -> std::result::Result<(), Stop> {
    one_factor_raw(y, p.beta, p.gamma, 0.0, p.a, p.b, alpha, smoothing, v, e)
}

pub(crate) fn hybrid_raw(
    y: &[f64],
    p: &HybridParams,
    alpha: f64,
    smoothing: Smoothing,
    v: &mut Vec<f64>,
    e: &mut Vec<f64>,
) -> std::result::Result<(), Stop> {
    one_factor_raw(y, p.beta, p.gamma, p.delta, p.tail.a, p.tail.b, alpha, smoothing, v, e)
}

#[allow(clippy::too_many_arguments)]
fn one_factor_raw(
    y: &[f64],
    beta: f64,
    gamma: f64,
    delta: f64,
    a: f64,
    b: f64,
    alpha: f64,
    smoothing: Smoothing,
    v: &mut Vec<f64>,
    e: &mut Vec<f64>,
) -> std::result::Result<(), Stop> {
    v.clear();
    e.clear();
    let mut kappa = 0.0f64;
    for t in 0..=y.len() {
        if t > 0 {
            let yp = y[t - 1];
            let mut next = beta * kappa + gamma * one_factor_forcing(yp, v[t - 1], e[t - 1], alpha, smoothing);
            if delta != 0.0 {
                next += delta * yp.abs().max(LOG_FLOOR).ln();
            }
            kappa = next;
        }
        if !(kappa.abs() < KAPPA_MAX) {
            return Err(Stop::NonFinite(t));
        }
        let s = kappa.exp();
        v.push(a * s);
        e.push(b * s);
        check(t, a * s, b * s)?;
    }
    Ok(())
}

/// GARCH recursion for `σ_t`, `t = 0..=T`.
pub(crate) fn garch_sigma_raw(
    y: &[f64],
    omega: f64,
    beta: f64,
    gamma: f64,
    sigma2_init: f64,
    sigma: &mut Vec<f64>,
) -> std::result::Result<(), Stop> {
    sigma.clear();
    let mut s2 = sigma2_init;
    for t in 0..=y.len() {
        if t > 0 {
            s2 = omega + beta * s2 + gamma * y[t - 1] * y[t - 1];
        }
        if !(s2 > 0.0 && s2.is_finite()) {
            return Err(Stop::NonFinite(t));
        }
        sigma.push(s2.sqrt());
    }
    Ok(())
}

fn finish(v: Vec<f64>, e: Vec<f64>, stop: std::result::Result<(), Stop>, n: usize) -> Result<RiskPath> {
    if let Err(s) = stop {
        return Err(stop_to_error(s, &v, &e));
    }
    let (mut v, mut e) = (v, e);
    v.truncate(n);
    e.truncate(n);
    RiskPath::new(v, e)
}

// ---------------------------------------------------------------------------
// public filters

pub fn gas2f_filter(
    y: &[f64],
    p: &Gas2fParams,
    alpha: AlphaLevel,
    init: (f64, f64),
    smoothing: Smoothing,
) -> Result<RiskPath> {
    check(0, init.0, init.1).map_err(|_| {
        Error::validation(format!("initial state needs e <= v < 0, got ({}, {})", init.0, init.1))
    })?;
    let (mut v, mut e) = (Vec::new(), Vec::new());
    let r = gas2f_raw(y, p, alpha.value(), init, smoothing, &mut v, &mut e);
    finish(v, e, r, y.len())
}

pub fn gas1f_filter(y: &[f64], p: &Gas1fParams, alpha: AlphaLevel, smoothing: Smoothing) -> Result<RiskPath> {
    p.validate()?;
    let (mut v, mut e) = (Vec::new(), Vec::new());
    let r = gas1f_raw(y, p, alpha.value(), smoothing, &mut v, &mut e);
    finish(v, e, r, y.len())
}

pub fn hybrid_filter(y: &[f64], p: &HybridParams, alpha: AlphaLevel, smoothing: Smoothing) -> Result<RiskPath> {
    check_tail(p.tail.a, p.tail.b)?;
    let (mut v, mut e) = (Vec::new(), Vec::new());
    let r = hybrid_raw(y, p, alpha.value(), smoothing, &mut v, &mut e);
    finish(v, e, r, y.len())
}

/// GARCH volatility path and the implied `(a σ_t, b σ_t)`.
///
/// `sigma2_init` defaults to the sample variance of `y`.
pub fn garch_filter(y: &[f64], p: &GarchParams, sigma2_init: Option<f64>) -> Result<(Vec<f64>, RiskPath)> {
    if !(p.omega > 0.0) || p.beta < 0.0 || p.gamma < 0.0 {
        return Err(Error::validation("GARCH needs omega > 0 and non-negative beta, gamma"));
    }
    check_tail(p.tail.a, p.tail.b)?;
    let s2 = sigma2_init.unwrap_or_else(|| variance(y));
    let mut sigma = Vec::new();
    if let Err(Stop::NonFinite(t) | Stop::Invalid(t)) = garch_sigma_raw(y, p.omega, p.beta, p.gamma, s2, &mut sigma) {
        return Err(Error::Numeric {
            t,
            msg: "GARCH variance not positive and finite".into(),
        });
    }
    sigma.truncate(y.len());
    let v = sigma.iter().map(|s| p.tail.a * s).collect();
    let e = sigma.iter().map(|s| p.tail.b * s).collect();
    Ok((sigma, RiskPath::new(v, e)?))
}

/// Rolling-window historical simulation forecasts for `y[m..]` plus the next
/// period (length `T - m + 1`).
pub(crate) fn rolling_raw(y: &[f64], p: &RollingParams, alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = p.window;
    let n = y.len();
    if m == 0 || (m as f64) * alpha < 1.0 - 1e-9 {
        return Err(Error::validation(format!("window {m} too short for alpha {alpha}")));
    }
    if n < m {
        return Err(Error::validation(format!("window {m} longer than the {n} available returns")));
    }
    let k = tail_rank(m, alpha);
    let mut window: Vec<f64> = y[..m].to_vec();
    window.sort_by(f64::total_cmp);
    // vhat[i] forecasts y[m + i]
    let mut vhat = Vec::with_capacity(n - m + 1);
    for t in m..=n {
        if t > m {
            let old = y[t - m - 1];
            let pos = window.partition_point(|x| x.total_cmp(&old).is_lt());
            window.remove(pos);
            let new = y[t - 1];
            let pos = window.partition_point(|x| x.total_cmp(&new).is_lt());
            window.insert(pos, new);
        }
        vhat.push(window[k - 1]);
    }
    let scale = 1.0 / (alpha * m as f64);
    let mut ehat = Vec::with_capacity(vhat.len());
    for (i, &vt) in vhat.iter().enumerate() {
        let t = m + i;
        let sum: f64 = (t - m..t)
            .map(|s| {
                let thr = match p.mode {
                    RollingMode::FixedT => vt,
                    RollingMode::AsPrinted if s >= m => vhat[s - m],
                    RollingMode::AsPrinted => vt,
                };
                if y[s] <= thr {
                    y[s]
                } else {
                    0.0
                }
            })
            .sum();
        let mut et = sum * scale;
        if et > vt {
            et = vt - 1e-8;
        }
        ehat.push(et);
    }
    Ok((vhat, ehat))
}

/// Rolling-window forecasts aligned with `y[m..]`.
pub fn rolling_forecast(y: &[f64], p: &RollingParams, alpha: AlphaLevel) -> Result<RiskPath> {
    let (mut v, mut e) = rolling_raw(y, p, alpha.value())?;
    v.pop();
    e.pop();
    RiskPath::new(v, e)
}

/// `(μ, σ)` such that `μ + a σ = v` and `μ + b σ = e`.
pub fn locscale_from_risk(v: f64, e: f64, tail: TailPair) -> Result<(f64, f64)> {
    let d = tail.b - tail.a;
    if d == 0.0 {
        return Err(Error::Singular("tail pair has a == b".into()));
    }
    Ok(((tail.b * v - tail.a * e) / d, (e - v) / d))
}

/// Location-scale GARCH filter: `v_t = μ + a σ_t`, `e_t = μ + b σ_t`.
pub fn locscale_path(
    y: &[f64],
    mu: f64,
    omega: f64,
    beta: f64,
    gamma: f64,
    tail: TailPair,
    sigma2_init: f64,
) -> Result<RiskPath> {
    let (v, e) = locscale_raw(y, mu, omega, beta, gamma, tail, sigma2_init)?;
    finish(v, e, Ok(()), y.len())
}

fn locscale_raw(
    y: &[f64],
    mu: f64,
    omega: f64,
    beta: f64,
    gamma: f64,
    tail: TailPair,
    sigma2_init: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut sigma = Vec::new();
    let eps: Vec<f64> = y.iter().map(|x| x - mu).collect();
    if let Err(Stop::NonFinite(t) | Stop::Invalid(t)) = garch_sigma_raw(&eps, omega, beta, gamma, sigma2_init, &mut sigma) {
        return Err(Error::Numeric {
            t,
            msg: "GARCH variance not positive and finite".into(),
        });
    }
    let v: Vec<f64> = sigma.iter().map(|s| mu + tail.a * s).collect();
    let e: Vec<f64> = sigma.iter().map(|s| mu + tail.b * s).collect();
    if let Some(t) = first_invalid(&v, &e) {
        return Err(stop_to_error(Stop::Invalid(t), &v, &e));
    }
    Ok((v, e))
}

/// GARCH(1,1) by Gaussian QMLE with constant mean, combined with a tail pair
/// from the chosen residual distribution.
pub fn armagarch_forecast(y: &[f64], source: TailSource, alpha: AlphaLevel) -> Result<RiskPath> {
    let fitted = crate::estimate::fit_locscale(y, source, alpha)?;
    fitted.path(y, alpha)
}

// ---------------------------------------------------------------------------
// model specifications and fitted models

/// A model family, as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelSpec {
    Gas2f,
    Gas1f,
    GarchFz,
    Hybrid,
    Rolling { window: usize },
    GarchQmle { tail: TailSource },
    Caviar,
}

impl ModelSpec {
    /// The ten models of the out-of-sample comparison, in report order.
    pub fn backtest_set() -> Vec<ModelSpec> {
        vec![
            ModelSpec::Rolling { window: 125 },
            ModelSpec::Rolling { window: 250 },
            ModelSpec::Rolling { window: 500 },
            ModelSpec::GarchQmle { tail: TailSource::Normal },
            ModelSpec::GarchQmle { tail: TailSource::SkewT },
            ModelSpec::GarchQmle { tail: TailSource::Edf },
            ModelSpec::Gas2f,
            ModelSpec::Gas1f,
            ModelSpec::GarchFz,
            ModelSpec::Hybrid,
        ]
    }

    /// Short label used in report tables.
    pub fn label(&self) -> String {
        match self {
            ModelSpec::Rolling { window } => format!("RW-{window}"),
            ModelSpec::GarchQmle { tail: TailSource::Normal } => "GCH-N".into(),
            ModelSpec::GarchQmle { tail: TailSource::SkewT } => "GCH-Skt".into(),
            ModelSpec::GarchQmle { tail: TailSource::Edf } => "GCH-EDF".into(),
            ModelSpec::Gas2f => "FZ-2F".into(),
            ModelSpec::Gas1f => "FZ-1F".into(),
            ModelSpec::GarchFz => "GCH-FZ".into(),
            ModelSpec::Hybrid => "Hybrid".into(),
            ModelSpec::Caviar => "CAViaR".into(),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Gas2f => write!(f, "gas2f"),
            ModelSpec::Gas1f => write!(f, "gas1f"),
            ModelSpec::GarchFz => write!(f, "garch-fz"),
            ModelSpec::Hybrid => write!(f, "hybrid"),
            ModelSpec::Rolling { window } => write!(f, "rw-{window}"),
            ModelSpec::GarchQmle { tail } => {
                let t = match tail {
                    TailSource::Normal => "normal",
                    TailSource::SkewT => "skewt",
                    TailSource::Edf => "edf",
                };
                write!(f, "garch-qmle-{t}")
            }
            ModelSpec::Caviar => write!(f, "caviar"),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ok(match s.as_str() {
            "gas2f" | "fz-2f" => ModelSpec::Gas2f,
            "gas1f" | "fz-1f" => ModelSpec::Gas1f,
            "garch-fz" | "gch-fz" => ModelSpec::GarchFz,
            "hybrid" => ModelSpec::Hybrid,
            "garch-qmle-normal" | "gch-n" => ModelSpec::GarchQmle { tail: TailSource::Normal },
            "garch-qmle-skewt" | "gch-skt" => ModelSpec::GarchQmle { tail: TailSource::SkewT },
            "garch-qmle-edf" | "gch-edf" => ModelSpec::GarchQmle { tail: TailSource::Edf },
            "caviar" => ModelSpec::Caviar,
            other => {
                let window = other
                    .strip_prefix("rw-")
                    .or_else(|| other.strip_prefix("rolling-"))
                    .and_then(|w| w.parse::<usize>().ok())
                    .ok_or_else(|| Error::validation(format!("unknown model '{other}'")))?;
                ModelSpec::Rolling { window }
            }
        })
    }
}

/// A model with frozen parameters and initial state, able to filter any series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FittedModel {
    Gas2f {
        params: Gas2fParams,
        init: (f64, f64),
    },
    Gas1f {
        params: Gas1fParams,
    },
    GarchFz {
        params: GarchParams,
        sigma2_init: f64,
    },
    Hybrid {
        params: HybridParams,
    },
    Rolling {
        params: RollingParams,
    },
    /// Location-scale GARCH; also used for CAViaR with an ES factor from residuals.
    LocScale {
        mu: f64,
        omega: f64,
        beta: f64,
        gamma: f64,
        tail: TailPair,
        sigma2_init: f64,
    },
}

impl FittedModel {
    /// First index of `y` that receives a forecast.
    pub fn warmup(&self) -> usize {
        match self {
            FittedModel::Rolling { params } => params.window,
            _ => 0,
        }
    }

    /// Forecasts for `y[warmup..]` plus the next period.
    pub fn extended(&self, y: &[f64], alpha: AlphaLevel) -> Result<(Vec<f64>, Vec<f64>)> {
        let al = alpha.value();
        let (mut v, mut e) = (Vec::new(), Vec::new());
        let r = match self {
            FittedModel::Gas2f { params, init } => gas2f_raw(y, params, al, *init, Smoothing::Exact, &mut v, &mut e),
            FittedModel::Gas1f { params } => gas1f_raw(y, params, al, Smoothing::Exact, &mut v, &mut e),
            FittedModel::Hybrid { params } => hybrid_raw(y, params, al, Smoothing::Exact, &mut v, &mut e),
            FittedModel::GarchFz { params, sigma2_init } => {
                let mut sigma = Vec::new();
                let r = garch_sigma_raw(y, params.omega, params.beta, params.gamma, *sigma2_init, &mut sigma);
                v = sigma.iter().map(|s| params.tail.a * s).collect();
                e = sigma.iter().map(|s| params.tail.b * s).collect();
                r
            }
            FittedModel::Rolling { params } => return rolling_raw(y, params, al),
            FittedModel::LocScale {
                mu,
                omega,
                beta,
                gamma,
                tail,
                sigma2_init,
            } => return locscale_raw(y, *mu, *omega, *beta, *gamma, *tail, *sigma2_init),
        };
        if let Err(s) = r {
            return Err(stop_to_error(s, &v, &e));
        }
        Ok((v, e))
    }

    /// Forecasts aligned with `y[warmup..]`.
    pub fn path(&self, y: &[f64], alpha: AlphaLevel) -> Result<RiskPath> {
        let (mut v, mut e) = self.extended(y, alpha)?;
        v.pop();
        e.pop();
        RiskPath::new(v, e)
    }

    /// One-step-ahead `(v, e)` after observing all of `y`.
    pub fn forecast_next(&self, y: &[f64], alpha: AlphaLevel) -> Result<(f64, f64)> {
        let (v, e) = self.extended(y, alpha)?;
        Ok((*v.last().expect("non-empty"), *e.last().expect("non-empty")))
    }
}

/// Next-period `(v, e)` as a function of today's return, holding the state fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsImpactRow {
    pub y: f64,
    pub v_next: f64,
    pub e_next: f64,
}

/// News impact curve of a fitted dynamic model from state `(v, e)`.
pub fn news_impact_curve(
    model: &FittedModel,
    state: (f64, f64),
    alpha: AlphaLevel,
    y_grid: &[f64],
) -> Result<Vec<NewsImpactRow>> {
    let (v, e) = state;
    check(0, v, e).map_err(|_| Error::validation(format!("state needs e <= v < 0, got ({v}, {e})")))?;
    let al = alpha.value();
    let one_factor = |beta: f64, gamma: f64, delta: f64, a: f64, b: f64, y: f64| {
        let kappa = (v / a).ln();
        let mut next = beta * kappa + gamma * one_factor_forcing(y, v, e, al, Smoothing::Exact);
        if delta != 0.0 {
            next += delta * y.abs().max(LOG_FLOOR).ln();
        }
        (a * next.exp(), b * next.exp())
    };
    let garch = |mu: f64, omega: f64, beta: f64, gamma: f64, tail: TailPair, y: f64| {
        let sigma = (v - mu) / tail.a;
        let s2 = omega + beta * sigma * sigma + gamma * (y - mu) * (y - mu);
        (mu + tail.a * s2.sqrt(), mu + tail.b * s2.sqrt())
    };
    y_grid
        .iter()
        .map(|&y| {
            let (vn, en) = match model {
                FittedModel::Gas2f { params, .. } => params.step(y, v, e, al, Smoothing::Exact),
                FittedModel::Gas1f { params: p } => one_factor(p.beta, p.gamma, 0.0, p.a, p.b, y),
                FittedModel::Hybrid { params: p } => one_factor(p.beta, p.gamma, p.delta, p.tail.a, p.tail.b, y),
                FittedModel::GarchFz { params: p, .. } => garch(0.0, p.omega, p.beta, p.gamma, p.tail, y),
                FittedModel::LocScale {
                    mu,
                    omega,
                    beta,
                    gamma,
                    tail,
                    ..
                } => garch(*mu, *omega, *beta, *gamma, *tail, y),
                FittedModel::Rolling { .. } => {
                    return Err(Error::validation("news impact curve is undefined for the rolling window"))
                }
            };
            Ok(NewsImpactRow {
                y,
                v_next: vn,
                e_next: en,
            })
        })
        .collect()
}

/// Empirical `(VaR, ES)` of a sample, used to start the two-factor recursion.
pub fn empirical_tail_state(y: &[f64], alpha: AlphaLevel) -> Result<(f64, f64)> {
    let mut s = y.to_vec();
    s.sort_by(f64::total_cmp);
    let (a, b) = sorted_tail_pair(&s, alpha.value());
    check(0, a, b).map_err(|_| Error::validation(format!("sample tail pair ({a}, {b}) is not negative")))?;
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn al(a: f64) -> AlphaLevel {
        AlphaLevel::new(a).unwrap()
    }

    fn table_gas2f() -> Gas2fParams {
        Gas2fParams {
            w: [-0.046, -0.069],
            b: [0.977, 0.973],
            a: [[0.001, 0.001], [0.007, 0.011]],
        }
    }

    fn noise(n: usize) -> Vec<f64> {
        // deterministic pseudo-returns with occasional large losses
        (0..n)
            .map(|i| {
                let x = ((i as f64) * 12.9898).sin() * 43758.5453;
                let u = x - x.floor();
                2.0 * (u - 0.5) * if i % 17 == 0 { 3.0 } else { 1.0 }
            })
            .collect()
    }

    #[test]
    fn gas2f_fixed_point() {
        let p = Gas2fParams {
            w: [0.0, 0.0],
            b: [1.0, 1.0],
            a: [[0.0, 0.0], [0.0, 0.0]],
        };
        let path = gas2f_filter(&noise(50), &p, al(0.05), (-1.5, -2.0), Smoothing::Exact).unwrap();
        assert!(path.v().iter().all(|&v| v == -1.5));
        assert!(path.e().iter().all(|&e| e == -2.0));
    }

    #[test]
    fn gas2f_unconditional_mean() {
        let (v, e) = table_gas2f().unconditional_mean();
        assert!((v + 2.0).abs() < 0.01, "{v}");
        assert!((e + 2.556).abs() < 0.01, "{e}");
    }

    #[test]
    fn gas2f_hand_step() {
        let p = table_gas2f();
        let (v, e, y, a) = (-2.0, -2.5, -3.0, 0.05);
        let lv = -v * (1.0 - a);
        let le = y / a - e;
        let v2 = -0.046 + 0.977 * v + 0.001 * lv + 0.001 * le;
        let e2 = -0.069 + 0.973 * e + 0.007 * lv + 0.011 * le;
        let path = gas2f_filter(&[y], &p, al(a), (v, e), Smoothing::Exact).unwrap();
        assert_eq!(path.len(), 1);
        let m = FittedModel::Gas2f { params: p, init: (v, e) };
        let (vn, en) = m.forecast_next(&[y], al(a)).unwrap();
        assert!((vn - v2).abs() < 1e-14 && (en - e2).abs() < 1e-14);
        assert!((vn + 2.0556).abs() < 1e-10);
    }

    #[test]
    fn gas1f_constant_when_no_feedback() {
        let p = Gas1fParams {
            beta: 1.0,
            gamma: 0.0,
            a: -1.6,
            b: -2.1,
        };
        let path = gas1f_filter(&noise(100), &p, al(0.05), Smoothing::Exact).unwrap();
        assert!(path.v().iter().all(|&v| v == -1.6));
        assert!(path.e().iter().all(|&e| e == -2.1));
    }

    #[test]
    fn gas1f_single_step() {
        let p = Gas1fParams {
            beta: 0.9,
            gamma: 0.05,
            a: -1.64,
            b: -2.06,
        };
        let m = FittedModel::Gas1f { params: p };
        let (v2, e2) = m.forecast_next(&[-4.0], al(0.05)).unwrap();
        let forcing: f64 = (-1.0 / -2.06) * ((1.0 / 0.05) * -4.0 - -2.06);
        assert!((forcing + 37.835).abs() < 1e-3);
        let kappa = 0.05 * forcing;
        assert!((kappa + 1.8917).abs() < 1e-4);
        assert!((v2 - (-1.64) * kappa.exp()).abs() < 1e-14);
        assert!((e2 - (-2.06) * kappa.exp()).abs() < 1e-14);
    }

    #[test]
    fn gas1f_table_parameters_are_stable() {
        let p = Gas1fParams {
            beta: 0.990,
            gamma: -0.010,
            a: -1.490,
            b: -2.089,
        };
        let y = noise(2500);
        let path = gas1f_filter(&y, &p, al(0.05), Smoothing::Exact).unwrap();
        assert_eq!(path.len(), 2500);
    }

    #[test]
    fn gas1f_overflow_is_numeric_error() {
        let p = Gas1fParams {
            beta: 1.5,
            gamma: 0.5,
            a: -1.0,
            b: -2.0,
        };
        let y = vec![-10.0; 500];
        assert!(matches!(gas1f_filter(&y, &p, al(0.05), Smoothing::Exact), Err(Error::Numeric { .. })));
    }

    #[test]
    fn hybrid_reduces_to_gas1f() {
        let y = noise(300);
        let g = Gas1fParams {
            beta: 0.95,
            gamma: -0.02,
            a: -1.5,
            b: -2.0,
        };
        let h = HybridParams {
            beta: 0.95,
            gamma: -0.02,
            delta: 0.0,
            tail: TailPair { a: -1.5, b: -2.0 },
        };
        let p1 = gas1f_filter(&y, &g, al(0.05), Smoothing::Exact).unwrap();
        let p2 = hybrid_filter(&y, &h, al(0.05), Smoothing::Exact).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn hybrid_unit_return_step() {
        let h = HybridParams {
            beta: 0.968,
            gamma: -0.011,
            delta: 0.018,
            tail: TailPair { a: -2.443, b: -3.389 },
        };
        let m = FittedModel::Hybrid { params: h };
        let (v, _) = m.forecast_next(&[-1.0], al(0.05)).unwrap();
        // y = -1 is above v = -2.443, so the forcing is -(0 - b)/b = 1
        let kappa = -0.011 * 1.0;
        assert!((v - (-2.443) * f64::exp(kappa)).abs() < 1e-14);
        let path = hybrid_filter(&noise(2500), &h, al(0.05), Smoothing::Exact).unwrap();
        assert_eq!(path.len(), 2500);
    }

    #[test]
    fn garch_examples() {
        let p = GarchParams {
            omega: 1.0,
            beta: 0.0,
            gamma: 0.0,
            tail: TailPair { a: -1.645, b: -2.063 },
        };
        let (sigma, path) = garch_filter(&noise(10), &p, Some(4.0)).unwrap();
        assert_eq!(sigma[0], 2.0);
        assert!(sigma[1..].iter().all(|&s| s == 1.0));
        assert!(path.v()[1..].iter().all(|&v| v == -1.645));

        let p = GarchParams {
            omega: 0.05,
            beta: 0.9,
            gamma: 0.05,
            tail: TailPair { a: -1.645, b: -2.063 },
        };
        assert!((p.unconditional_variance() - 1.0).abs() < 1e-12);
        let (sigma, _) = garch_filter(&[2.0, 0.0], &p, Some(1.0)).unwrap();
        assert!((sigma[1] * sigma[1] - 1.15).abs() < 1e-12);
        let bad = GarchParams { beta: 1.2, gamma: 0.0, ..p };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rolling_small_window() {
        let y = [-1.0, -2.0, -3.0, -4.0, 5.0];
        let p = RollingParams {
            window: 4,
            mode: RollingMode::FixedT,
        };
        let path = rolling_forecast(&y, &p, al(0.25)).unwrap();
        assert_eq!(path.len(), 1);
        assert_eq!(path.v()[0], -4.0);
        assert_eq!(path.e()[0], -4.0);
        assert!(rolling_forecast(&y[..3], &p, al(0.25)).is_err());
    }

    #[test]
    fn rolling_constant_series() {
        let y = vec![-0.5; 12];
        let path = rolling_forecast(&y, &RollingParams::new(4), al(0.25)).unwrap();
        assert!(path.v().iter().all(|&v| v == -0.5));
        assert!(path.e().iter().all(|&e| e == -2.0));
        let pos = vec![0.5; 12];
        assert!(rolling_forecast(&pos, &RollingParams::new(4), al(0.25)).is_err());
    }

    #[test]
    fn rolling_matches_naive_quantile() {
        let y = noise(400);
        let m = 50;
        let (v, _) = rolling_raw(&y, &RollingParams::new(m), 0.1).unwrap();
        for (i, &vt) in v.iter().enumerate() {
            let mut w = y[i..i + m].to_vec();
            w.sort_by(f64::total_cmp);
            assert_eq!(vt, w[4]);
        }
    }

    #[test]
    fn rolling_mean_var_on_normal_draws() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let y: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let path = rolling_forecast(&y, &RollingParams::new(500), al(0.05)).unwrap();
        let mean_v = crate::stats::mean(path.v());
        assert!((mean_v + 1.645).abs() < 0.1, "{mean_v}");
    }

    #[test]
    fn locscale_examples() {
        let tp = TailPair { a: -1.645, b: -2.063 };
        let (mu, s) = locscale_from_risk(tp.a, tp.b, tp).unwrap();
        assert!(mu.abs() < 1e-12 && (s - 1.0).abs() < 1e-12);
        let (mu, s) = locscale_from_risk(2.0 * tp.a, 2.0 * tp.b, tp).unwrap();
        assert!(mu.abs() < 1e-12 && (s - 2.0).abs() < 1e-12);
        let (mu, s) = locscale_from_risk(tp.a + 1.0, tp.b + 1.0, tp).unwrap();
        assert!((mu - 1.0).abs() < 1e-12 && (s - 1.0).abs() < 1e-12);
        assert!(locscale_from_risk(-1.0, -2.0, TailPair { a: -1.0, b: -1.0 }).is_err());
    }

    #[test]
    fn news_impact_flat_above_var() {
        let m = FittedModel::Gas1f {
            params: Gas1fParams {
                beta: 0.99,
                gamma: -0.01,
                a: -1.49,
                b: -2.089,
            },
        };
        let state = (-1.49 * 1.1, -2.089 * 1.1);
        let grid: Vec<f64> = (0..=40).map(|i| -5.0 + 0.25 * i as f64).collect();
        let nic = news_impact_curve(&m, state, al(0.05), &grid).unwrap();
        let above: Vec<_> = nic.iter().filter(|r| r.y > state.0).collect();
        assert!(above.windows(2).all(|w| w[0].v_next == w[1].v_next));
        // below VaR, κ is affine in y
        let below: Vec<_> = nic.iter().filter(|r| r.y <= state.0).collect();
        let k: Vec<f64> = below.iter().map(|r| (r.v_next / -1.49).ln()).collect();
        let slopes: Vec<f64> = k.windows(2).map(|w| (w[1] - w[0]) / 0.25).collect();
        let expected = -0.01 * (-1.0 / state.1) / 0.05;
        assert!(slopes.iter().all(|s| (s - expected).abs() < 1e-10));

        let flat = FittedModel::Gas2f {
            params: Gas2fParams {
                w: [0.0, 0.0],
                b: [1.0, 1.0],
                a: [[0.0, 0.0], [0.0, 0.0]],
            },
            init: (-1.0, -2.0),
        };
        let nic = news_impact_curve(&flat, (-1.0, -2.0), al(0.05), &grid).unwrap();
        assert!(nic.iter().all(|r| r.v_next == -1.0 && r.e_next == -2.0));
    }

    #[test]
    fn news_impact_jump_at_var() {
        let p = table_gas2f();
        let m = FittedModel::Gas2f { params: p, init: (-2.0, -2.5) };
        let (v, e) = (-2.0, -2.5);
        let eps = 1e-9;
        let nic = news_impact_curve(&m, (v, e), al(0.05), &[v - eps, v + eps]).unwrap();
        // λ_v jumps by -v, λ_e by v/α
        let jump_v = p.a[0][0] * (-v) + p.a[0][1] * (v / 0.05);
        assert!(((nic[0].v_next - nic[1].v_next) - jump_v).abs() < 1e-6);
    }

    #[test]
    fn model_spec_round_trip() {
        for m in ModelSpec::backtest_set().into_iter().chain([ModelSpec::Caviar]) {
            let s = m.to_string();
            assert_eq!(s.parse::<ModelSpec>().unwrap(), m);
            assert_eq!(m.label().parse::<ModelSpec>().unwrap(), m);
        }
        assert!("gas3f".parse::<ModelSpec>().is_err());
    }

    proptest! {
        #[test]
        fn one_factor_ratio_constant(beta in -0.99f64..0.99, gamma in -0.05f64..0.05, c in 0.3f64..0.95) {
            let p = Gas1fParams { beta, gamma, a: -2.0 * c, b: -2.0 };
            let y = noise(300);
            if let Ok(path) = gas1f_filter(&y, &p, al(0.05), Smoothing::Exact) {
                for (v, e) in path.v().iter().zip(path.e()) {
                    prop_assert!((e / v - 1.0 / c).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn filters_are_deterministic(beta in 0.5f64..0.99, gamma in -0.05f64..0.0) {
            let p = Gas1fParams { beta, gamma, a: -1.5, b: -2.0 };
            let y = noise(200);
            let a = gas1f_filter(&y, &p, al(0.05), Smoothing::Logistic(5.0));
            let b = gas1f_filter(&y, &p, al(0.05), Smoothing::Logistic(5.0));
            prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
        }

        #[test]
        fn locscale_round_trip(v in -5.0f64..-0.1, gap in 0.01f64..3.0) {
            let tp = TailPair { a: -1.645, b: -2.063 };
            let e = v - gap;
            let (mu, s) = locscale_from_risk(v, e, tp).unwrap();
            prop_assert!((mu + tp.a * s - v).abs() < 1e-12);
            prop_assert!((mu + tp.b * s - e).abs() < 1e-12);
        }
    }

    #[test]
    fn gas1f_geometric_decay() {
        let p = Gas1fParams {
            beta: 0.5,
            gamma: 0.0,
            a: -1.0,
            b: -2.0,
        };
        let path = gas1f_filter(&noise(60), &p, al(0.05), Smoothing::Exact).unwrap();
        assert!(path.v().iter().all(|&v| (v + 1.0).abs() < 1e-15));
    }
}
