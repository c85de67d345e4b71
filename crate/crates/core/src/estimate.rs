//! M-estimation by FZ0 loss minimization, plus QMLE and CAViaR comparators.
//!
//! FZ estimation minimizes the average FZ0 loss through a smoothing
//! continuation: each stage minimizes the logistic-smoothed loss at the next
//! `τ` of the schedule, warm-started at the previous stage's solution, and the
//! final stage uses the exact loss. Every stage uses the Nelder–Mead simplex.

use std::cell::RefCell;
use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dist::{TailPair, TailSource};
use crate::error::{Error, Result};
use crate::loss::{fz0_value, tick_value, Smoothing};
use crate::models::{
    empirical_tail_state, garch_sigma_raw, gas1f_raw, gas2f_raw, hybrid_raw, FittedModel, Gas1fParams,
    Gas2fParams, GarchParams, HybridParams, ModelSpec, RollingParams, Stop,
};
use crate::optim::NelderMead;
use crate::series::{AlphaLevel, RiskPath};
use crate::stats::{mean, sorted_tail_pair, variance};

const PENALTY: f64 = 1e10;
/// Shortest sample accepted by the estimators.
pub const MIN_OBS: usize = 250;

fn default_schedule() -> Vec<Smoothing> {
    vec![Smoothing::Logistic(5.0), Smoothing::Logistic(20.0), Smoothing::Exact]
}

fn default_tol_f() -> f64 {
    1e-8
}

fn default_tol_x() -> f64 {
    1e-6
}

fn default_multistart() -> usize {
    5
}

fn default_omega() -> f64 {
    1.0
}

/// Tuning for FZ and CAViaR estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    #[serde(default = "default_schedule")]
    pub tau_schedule: Vec<Smoothing>,
    /// Objective evaluations per stage; `None` scales with the parameter count.
    #[serde(default)]
    pub max_evals: Option<usize>,
    #[serde(default = "default_tol_f")]
    pub tol_f: f64,
    #[serde(default = "default_tol_x")]
    pub tol_x: f64,
    /// Number of starting points: one data-driven plus seeded perturbations.
    #[serde(default = "default_multistart")]
    pub multistart: usize,
    #[serde(default)]
    pub seed: u64,
    /// GARCH intercept held fixed by FZ and CAViaR estimation.
    #[serde(default = "default_omega")]
    pub omega: f64,
    /// Parameters frozen at the given values, by name.
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    /// Data-driven start override, in reported parameter order.
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    /// Kernel bandwidth for the covariance; `None` means `T^(-1/3)`.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default = "yes")]
    pub compute_vcov: bool,
}

fn yes() -> bool {
    true
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            tau_schedule: default_schedule(),
            max_evals: None,
            tol_f: default_tol_f(),
            tol_x: default_tol_x(),
            multistart: default_multistart(),
            seed: 0,
            omega: default_omega(),
            fixed: BTreeMap::new(),
            start: None,
            bandwidth: None,
            compute_vcov: true,
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_schedule.is_empty() {
            return Err(Error::validation("tau schedule is empty"));
        }
        if *self.tau_schedule.last().expect("non-empty") != Smoothing::Exact {
            return Err(Error::validation("tau schedule must end with exact"));
        }
        let mut prev = 0.0;
        for s in &self.tau_schedule[..self.tau_schedule.len() - 1] {
            match *s {
                Smoothing::Logistic(t) if t > prev && t.is_finite() => prev = t,
                _ => return Err(Error::validation("tau schedule must be positive and increasing")),
            }
        }
        if self.multistart == 0 {
            return Err(Error::validation("multistart must be at least 1"));
        }
        if !(self.omega > 0.0) {
            return Err(Error::validation("omega must be positive"));
        }
        if !(self.tol_f > 0.0 && self.tol_x > 0.0) {
            return Err(Error::validation("tolerances must be positive"));
        }
        if let Some(c) = self.bandwidth {
            if !(c > 0.0) {
                return Err(Error::validation("bandwidth must be positive"));
            }
        }
        Ok(())
    }

    /// Parses a schedule such as `"5,20,exact"`.
    pub fn parse_schedule(s: &str) -> Result<Vec<Smoothing>> {
        s.split(',')
            .map(|tok| {
                let tok = tok.trim();
                if tok.eq_ignore_ascii_case("exact") || tok.eq_ignore_ascii_case("inf") {
                    Ok(Smoothing::Exact)
                } else {
                    let t: f64 = tok
                        .parse()
                        .map_err(|_| Error::validation(format!("bad tau '{tok}' in schedule")))?;
                    Smoothing::logistic(t)
                }
            })
            .collect()
    }
}

/// Objective minimized by an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    Fz0,
    Tick,
    NegLogLik,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub smoothing: Smoothing,
    /// Objective at this stage's starting point, under this stage's smoothing.
    /// Infeasible starts are `+inf`, written as `null` in JSON.
    #[serde(with = "objective_or_null")]
    pub start_objective: f64,
    #[serde(with = "objective_or_null")]
    pub end_objective: f64,
    pub evals: usize,
    pub converged: bool,
}

mod objective_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub model: ModelSpec,
    pub alpha: f64,
    pub objective: ObjectiveKind,
    pub names: Vec<String>,
    pub theta_hat: Vec<f64>,
    pub avg_loss: f64,
    pub vcov: Option<Vec<Vec<f64>>>,
    pub std_errors: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vcov_error: Option<String>,
    pub converged: bool,
    pub n_obs: usize,
    pub stage_trace: Vec<StageTrace>,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    pub fitted: FittedModel,
}

impl EstimationResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.theta_hat[i]).or_else(|| self.fixed.get(name).copied())
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == name)?;
        self.std_errors.as_ref().map(|s| s[i])
    }

    /// In-sample (or any-sample) path implied by the fitted model.
    pub fn path(&self, y: &[f64]) -> Result<RiskPath> {
        self.fitted.path(y, AlphaLevel::new(self.alpha)?)
    }
}

// ---------------------------------------------------------------------------
// parameter coordinates

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tx {
    Raw,
    /// `(0, 1)` through the logistic function.
    Unit,
    /// `(-1, 1)` through a rescaled logistic.
    Sym,
}

impl Tx {
    fn to_natural(self, x: f64) -> f64 {
        match self {
            Tx::Raw => x,
            Tx::Unit => 1.0 / (1.0 + (-x).exp()),
            Tx::Sym => 2.0 / (1.0 + (-x).exp()) - 1.0,
        }
    }

    fn to_internal(self, t: f64) -> f64 {
        const EDGE: f64 = 1e-9;
        match self {
            Tx::Raw => t,
            Tx::Unit => {
                let t = t.clamp(EDGE, 1.0 - EDGE);
                (t / (1.0 - t)).ln()
            }
            Tx::Sym => {
                let u = ((t + 1.0) / 2.0).clamp(EDGE, 1.0 - EDGE);
                (u / (1.0 - u)).ln()
            }
        }
    }
}

/// Filter plus objective for one model family on one sample.
struct Problem<'a> {
    y: &'a [f64],
    spec: ModelSpec,
    alpha: f64,
    omega: f64,
    sigma2_init: f64,
    init2f: (f64, f64),
}

struct Bufs {
    v: Vec<f64>,
    e: Vec<f64>,
    s: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(y: &'a [f64], spec: ModelSpec, alpha: AlphaLevel, omega: f64) -> Result<Self> {
        if y.len() < MIN_OBS {
            return Err(Error::validation(format!(
                "estimation needs at least {MIN_OBS} observations, got {}",
                y.len()
            )));
        }
        let init2f = if spec == ModelSpec::Gas2f {
            empirical_tail_state(y, alpha)?
        } else {
            (-1.0, -1.0)
        };
        Ok(Self {
            y,
            spec,
            alpha: alpha.value(),
            omega,
            sigma2_init: variance(y),
            init2f,
        })
    }

    fn names(&self) -> Vec<&'static str> {
        match self.spec {
            ModelSpec::GarchFz => vec!["beta", "gamma", "b", "c"],
            ModelSpec::Gas1f => vec!["beta", "gamma", "b", "c"],
            ModelSpec::Hybrid => vec!["beta", "gamma", "delta", "b", "c"],
            ModelSpec::Gas2f => Gas2fParams::NAMES.to_vec(),
            ModelSpec::Caviar => vec!["beta", "gamma", "a"],
            _ => vec![],
        }
    }

    fn transforms(&self) -> Vec<Tx> {
        match self.spec {
            ModelSpec::GarchFz => vec![Tx::Raw, Tx::Raw, Tx::Raw, Tx::Unit],
            ModelSpec::Gas1f => vec![Tx::Sym, Tx::Raw, Tx::Raw, Tx::Unit],
            ModelSpec::Hybrid => vec![Tx::Sym, Tx::Raw, Tx::Raw, Tx::Raw, Tx::Unit],
            ModelSpec::Gas2f => vec![Tx::Raw; 8],
            ModelSpec::Caviar => vec![Tx::Raw, Tx::Raw, Tx::Raw],
            _ => vec![],
        }
    }

    fn objective_kind(&self) -> ObjectiveKind {
        if self.spec == ModelSpec::Caviar {
            ObjectiveKind::Tick
        } else {
            ObjectiveKind::Fz0
        }
    }

    /// Natural-scale simplex steps.
    fn steps(&self, theta: &[f64]) -> Vec<f64> {
        match self.spec {
            ModelSpec::GarchFz => vec![0.02, 0.01, 0.1 * theta[2].abs().max(0.1), 0.3],
            ModelSpec::Caviar => vec![0.02, 0.01, 0.1 * theta[2].abs().max(0.1)],
            ModelSpec::Gas1f => vec![0.5, 0.005, 0.1 * theta[2].abs().max(0.1), 0.3],
            ModelSpec::Hybrid => vec![0.5, 0.005, 0.005, 0.1 * theta[3].abs().max(0.1), 0.3],
            ModelSpec::Gas2f => theta
                .iter()
                .enumerate()
                .map(|(i, t)| match i {
                    0 | 1 => 0.2 * t.abs().max(0.01),
                    2 | 3 => 0.01,
                    _ => 0.002,
                })
                .collect(),
            _ => vec![],
        }
    }

    /// Fills `v`, `e` with `T + 1` forecasts; returns false on invalid parameters or paths.
    fn path_into(&self, theta: &[f64], smoothing: Smoothing, b: &mut Bufs) -> bool {
        let r: std::result::Result<(), Stop> = match self.spec {
            ModelSpec::GarchFz | ModelSpec::Caviar => {
                let (beta, gamma) = (theta[0], theta[1]);
                if !(beta >= 0.0 && gamma >= 0.0 && beta + gamma < 1.0) {
                    return false;
                }
                let (a, bb) = if self.spec == ModelSpec::GarchFz {
                    (theta[3] * theta[2], theta[2])
                } else {
                    (theta[2], theta[2])
                };
                if !(bb < 0.0 && a < 0.0) {
                    return false;
                }
                if garch_sigma_raw(self.y, self.omega, beta, gamma, self.sigma2_init, &mut b.s).is_err() {
                    return false;
                }
                b.v.clear();
                b.e.clear();
                b.v.extend(b.s.iter().map(|s| a * s));
                b.e.extend(b.s.iter().map(|s| bb * s));
                Ok(())
            }
            ModelSpec::Gas1f => {
                let p = gas1f_from(theta);
                if !(p.b < 0.0) {
                    return false;
                }
                gas1f_raw(self.y, &p, self.alpha, smoothing, &mut b.v, &mut b.e)
            }
            ModelSpec::Hybrid => {
                let p = hybrid_from(theta);
                if !(p.tail.b < 0.0) {
                    return false;
                }
                hybrid_raw(self.y, &p, self.alpha, smoothing, &mut b.v, &mut b.e)
            }
            ModelSpec::Gas2f => gas2f_raw(
                self.y,
                &Gas2fParams::from_slice(theta),
                self.alpha,
                self.init2f,
                smoothing,
                &mut b.v,
                &mut b.e,
            ),
            _ => return false,
        };
        r.is_ok()
    }

    fn objective(&self, theta: &[f64], smoothing: Smoothing, b: &mut Bufs) -> f64 {
        if !self.path_into(theta, smoothing, b) {
            return PENALTY;
        }
        let n = self.y.len();
        let mut sum = 0.0;
        match self.objective_kind() {
            ObjectiveKind::Tick => {
                for t in 0..n {
                    sum += tick_value(self.y[t], b.v[t], self.alpha, smoothing);
                }
            }
            _ => {
                for t in 0..n {
                    sum += fz0_value(self.y[t], b.v[t], b.e[t], self.alpha, smoothing);
                }
            }
        }
        let avg = sum / n as f64;
        if avg.is_finite() {
            avg
        } else {
            PENALTY
        }
    }

    fn fitted(&self, theta: &[f64]) -> Result<FittedModel> {
        Ok(match self.spec {
            ModelSpec::GarchFz => FittedModel::GarchFz {
                params: GarchParams {
                    omega: self.omega,
                    beta: theta[0],
                    gamma: theta[1],
                    tail: TailPair {
                        a: theta[3] * theta[2],
                        b: theta[2],
                    },
                },
                sigma2_init: self.sigma2_init,
            },
            ModelSpec::Gas1f => FittedModel::Gas1f { params: gas1f_from(theta) },
            ModelSpec::Hybrid => FittedModel::Hybrid { params: hybrid_from(theta) },
            ModelSpec::Gas2f => FittedModel::Gas2f {
                params: Gas2fParams::from_slice(theta),
                init: self.init2f,
            },
            ModelSpec::Caviar => {
                let mut s = Vec::new();
                garch_sigma_raw(self.y, self.omega, theta[0], theta[1], self.sigma2_init, &mut s)
                    .map_err(|_| Error::EstimationFailed("CAViaR variance path invalid".into()))?;
                let a = theta[2];
                let z: Vec<f64> = self.y.iter().zip(&s).map(|(y, s)| y / s).collect();
                let tail: Vec<f64> = z.iter().copied().filter(|&z| z <= a).collect();
                if tail.is_empty() {
                    return Err(Error::EstimationFailed("no residuals below the CAViaR quantile".into()));
                }
                FittedModel::LocScale {
                    mu: 0.0,
                    omega: self.omega,
                    beta: theta[0],
                    gamma: theta[1],
                    tail: TailPair { a, b: mean(&tail).min(a) },
                    sigma2_init: self.sigma2_init,
                }
            }
            _ => return Err(Error::validation(format!("{} is not estimated by loss minimization", self.spec))),
        })
    }

    /// Data-driven starting point, in natural coordinates.
    fn data_start(&self, alpha: AlphaLevel) -> Result<Vec<f64>> {
        let y = self.y;
        Ok(match self.spec {
            ModelSpec::GarchFz | ModelSpec::Caviar => {
                let (beta, gamma) = match qmle_core(y) {
                    Ok(q) if q.theta[2] + q.theta[3] < 0.999 => (q.theta[2], q.theta[3]),
                    _ => (0.9, 0.05),
                };
                let mut s = Vec::new();
                garch_sigma_raw(y, self.omega, beta, gamma, self.sigma2_init, &mut s)
                    .map_err(|_| Error::EstimationFailed("start variance path invalid".into()))?;
                let mut z: Vec<f64> = y.iter().zip(&s).map(|(y, s)| y / s).collect();
                z.sort_by(f64::total_cmp);
                let (a, b) = sorted_tail_pair(&z, alpha.value());
                let (a, b) = (a.min(-1e-3), b.min(a.min(-1e-3) - 1e-3));
                if self.spec == ModelSpec::GarchFz {
                    vec![beta, gamma, b, a / b]
                } else {
                    vec![beta, gamma, a]
                }
            }
            ModelSpec::Gas1f => {
                let (a, b) = empirical_tail_state(y, alpha)?;
                vec![0.95, -0.005, b, (a / b).min(0.999)]
            }
            ModelSpec::Hybrid => {
                let (a, b) = empirical_tail_state(y, alpha)?;
                vec![0.95, -0.005, 0.005, b, (a / b).min(0.999)]
            }
            ModelSpec::Gas2f => {
                let (v, e) = self.init2f;
                let b = 0.97;
                vec![(1.0 - b) * v, (1.0 - b) * e, b, b, 0.0005, 0.0005, 0.005, 0.005]
            }
            _ => return Err(Error::validation("no start for this model")),
        })
    }
}

fn gas1f_from(theta: &[f64]) -> Gas1fParams {
    Gas1fParams {
        beta: theta[0],
        gamma: theta[1],
        a: theta[3] * theta[2],
        b: theta[2],
    }
}

fn hybrid_from(theta: &[f64]) -> HybridParams {
    HybridParams {
        beta: theta[0],
        gamma: theta[1],
        delta: theta[2],
        tail: TailPair {
            a: theta[4] * theta[3],
            b: theta[3],
        },
    }
}

/// Maps between the optimizer's free internal coordinates and the full natural vector.
struct Coords {
    full: Vec<f64>,
    free: Vec<usize>,
    tx: Vec<Tx>,
}

impl Coords {
    fn natural(&self, x: &[f64]) -> Vec<f64> {
        let mut th = self.full.clone();
        for (k, &i) in self.free.iter().enumerate() {
            th[i] = self.tx[i].to_natural(x[k]);
        }
        th
    }

    fn internal(&self, theta: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| self.tx[i].to_internal(theta[i])).collect()
    }
}

// ---------------------------------------------------------------------------
// FZ / CAViaR estimation

/// Estimates a dynamic VaR/ES model by minimizing average FZ0 loss (or the
/// tick loss for [`ModelSpec::Caviar`]).
pub fn fz_estimate(
    y: &[f64],
    spec: ModelSpec,
    alpha: AlphaLevel,
    cfg: &EstimationConfig,
) -> Result<EstimationResult> {
    cfg.validate()?;
    let prob = Problem::new(y, spec, alpha, cfg.omega)?;
    let names = prob.names();
    if names.is_empty() {
        return Err(Error::validation(format!("{spec} is not estimated by loss minimization")));
    }
    for k in cfg.fixed.keys() {
        if !names.contains(&k.as_str()) {
            return Err(Error::validation(format!("unknown fixed parameter '{k}' for {spec}")));
        }
    }
    let p = names.len();
    let mut start = match &cfg.start {
        Some(s) if s.len() == p => s.clone(),
        Some(s) => {
            return Err(Error::validation(format!("start has {} values, {spec} needs {p}", s.len())));
        }
        None => prob.data_start(alpha)?,
    };
    for (i, n) in names.iter().enumerate() {
        if let Some(&v) = cfg.fixed.get(*n) {
            start[i] = v;
        }
    }
    let tx = prob.transforms();
    let free: Vec<usize> = (0..p).filter(|i| !cfg.fixed.contains_key(names[*i])).collect();
    if free.is_empty() {
        return Err(Error::validation("all parameters are fixed"));
    }
    let coords = Coords {
        full: start.clone(),
        free: free.clone(),
        tx: tx.clone(),
    };

    // internal-coordinate steps from natural steps via finite transform differences
    let nat_steps = prob.steps(&start);
    let x0 = coords.internal(&start);
    let steps: Vec<f64> = free
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let up = tx[i].to_internal(tx[i].to_natural(x0[k]) + nat_steps[i]);
            let d = (up - x0[k]).abs();
            if d.is_finite() && d > 1e-6 {
                d.min(2.0)
            } else {
                0.5
            }
        })
        .collect();

    let bufs = RefCell::new(Bufs {
        v: Vec::with_capacity(y.len() + 1),
        e: Vec::with_capacity(y.len() + 1),
        s: Vec::with_capacity(y.len() + 1),
    });
    let eval = |x: &[f64], sm: Smoothing| prob.objective(&coords.natural(x), sm, &mut bufs.borrow_mut());

    let max_evals = cfg.max_evals.unwrap_or(600 * free.len() + 1000);
    let nm = NelderMead::default()
        .with_tolerances(cfg.tol_f, cfg.tol_x)
        .with_max_evals(max_evals);

    // starting points
    let mut starts = vec![x0.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 1..cfg.multistart {
        let x: Vec<f64> = x0
            .iter()
            .zip(&steps)
            .map(|(x, s)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x + s * z
            })
            .collect();
        starts.push(x);
    }
    let exact_at_starts: Vec<f64> = starts.iter().map(|x| eval(x, Smoothing::Exact)).collect();

    let schedule = &cfg.tau_schedule;
    let first = schedule[0];
    let mut best: Option<(Vec<f64>, f64, StageTrace)> = None;
    for x in &starts {
        let f0 = eval(x, first);
        if f0 >= PENALTY {
            continue;
        }
        let mut res = nm.minimize(|x| eval(x, first), x, &steps);
        // the smoothed loss is unbounded below as e -> 0 with v close to e; a
        // stage that ends on a path the exact loss rejects has run off there
        if first != Smoothing::Exact && eval(&res.x, Smoothing::Exact) >= PENALTY {
            res.x = x.clone();
            res.f = f0;
            res.converged = false;
        }
        let trace = StageTrace {
            smoothing: first,
            start_objective: f0,
            end_objective: res.f,
            evals: res.evals,
            converged: res.converged,
        };
        if best.as_ref().is_none_or(|b| res.f < b.1) {
            best = Some((res.x, res.f, trace));
        }
    }
    let Some((mut x, _, trace0)) = best else {
        return Err(Error::EstimationFailed(format!(
            "all {} starting points give invalid {spec} paths",
            starts.len()
        )));
    };
    let mut traces = vec![trace0];
    let mut converged = traces[0].converged;
    for (k, &sm) in schedule.iter().enumerate().skip(1) {
        let f0 = eval(&x, sm);
        let mut res = nm.minimize(|x| eval(x, sm), &x, &steps);
        let mut evals = res.evals;
        if k == schedule.len() - 1 {
            // restart once: the exact objective is piecewise smooth and simplices stall on kinks
            let small: Vec<f64> = steps.iter().map(|s| 0.25 * s).collect();
            let again = nm.minimize(|x| eval(x, sm), &res.x, &small);
            evals += again.evals;
            if again.f <= res.f {
                res = again;
            }
        }
        let keeps_valid = sm == Smoothing::Exact || eval(&res.x, Smoothing::Exact) < PENALTY;
        let (xr, fr) = if res.f <= f0 && keeps_valid { (res.x, res.f) } else { (x.clone(), f0) };
        traces.push(StageTrace {
            smoothing: sm,
            start_objective: f0,
            end_objective: fr,
            evals,
            converged: res.converged,
        });
        converged = res.converged;
        x = xr;
    }
    let mut f_final = eval(&x, Smoothing::Exact);
    // never report something worse than a starting point
    for (xs, &fs) in starts.iter().zip(&exact_at_starts) {
        if fs < f_final {
            x = xs.clone();
            f_final = fs;
        }
    }
    if f_final >= PENALTY {
        return Err(Error::EstimationFailed(format!("{spec} estimation ended on an invalid path")));
    }
    let theta_full = coords.natural(&x);
    let fitted = prob.fitted(&theta_full)?;
    let names_free: Vec<String> = free.iter().map(|&i| names[i].to_string()).collect();
    let theta_hat: Vec<f64> = free.iter().map(|&i| theta_full[i]).collect();
    let fixed: BTreeMap<String, f64> = cfg.fixed.clone();

    let mut result = EstimationResult {
        model: spec,
        alpha: alpha.value(),
        objective: prob.objective_kind(),
        names: names_free,
        theta_hat,
        avg_loss: f_final,
        vcov: None,
        std_errors: None,
        vcov_error: None,
        converged,
        n_obs: y.len(),
        stage_trace: traces,
        fixed,
        fitted,
    };
    if cfg.compute_vcov {
        let bw = Bandwidth::new(cfg.bandwidth.unwrap_or_else(|| Bandwidth::default_for(y.len()).c_t))?;
        match vcov_for(&prob, &theta_full, &free, bw) {
            Ok(v) => {
                result.std_errors = Some(std_errors(&v.vcov, y.len()));
                result.vcov = Some(to_rows(&v.vcov));
            }
            Err(e) => result.vcov_error = Some(e.to_string()),
        }
    }
    Ok(result)
}

/// CAViaR: GARCH-implied VaR `a σ_t` estimated by tick-loss minimization.
pub fn caviar_estimate(y: &[f64], alpha: AlphaLevel, cfg: &EstimationConfig) -> Result<EstimationResult> {
    fz_estimate(y, ModelSpec::Caviar, alpha, cfg)
}

// ---------------------------------------------------------------------------
// covariance

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub c_t: f64,
}

impl Bandwidth {
    pub fn new(c_t: f64) -> Result<Self> {
        if c_t > 0.0 && c_t.is_finite() {
            Ok(Self { c_t })
        } else {
            Err(Error::validation(format!("bandwidth must be positive, got {c_t}")))
        }
    }

    /// `T^(-1/3)`.
    pub fn default_for(n: usize) -> Self {
        Self {
            c_t: (n as f64).powf(-1.0 / 3.0),
        }
    }
}

/// Sandwich covariance pieces.
#[derive(Debug, Clone)]
pub struct VcovParts {
    pub a_hat: DMatrix<f64>,
    pub d_hat: DMatrix<f64>,
    pub vcov: DMatrix<f64>,
}

/// Asymptotic covariance of an FZ (or CAViaR) estimate at `theta_hat`, over
/// the parameters named in `result.names`.
pub fn fz_vcov(y: &[f64], result: &EstimationResult, omega: f64, bw: Bandwidth) -> Result<VcovParts> {
    let alpha = AlphaLevel::new(result.alpha)?;
    let prob = Problem::new(y, result.model, alpha, omega)?;
    let names = prob.names();
    let mut full = vec![0.0; names.len()];
    let mut free = Vec::new();
    for (i, n) in names.iter().enumerate() {
        if let Some(k) = result.names.iter().position(|m| m == n) {
            full[i] = result.theta_hat[k];
            free.push(i);
        } else if let Some(&v) = result.fixed.get(*n) {
            full[i] = v;
        } else {
            return Err(Error::validation(format!("parameter '{n}' missing from result")));
        }
    }
    vcov_for(&prob, &full, &free, bw)
}

/// Central-difference gradients of `(v_t, e_t)` with respect to the free
/// parameters, falling back to a one-sided difference at a constraint boundary.
fn path_gradients(prob: &Problem, theta: &[f64], free: &[usize]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let n = prob.y.len();
    let mut bufs = Bufs {
        v: Vec::new(),
        e: Vec::new(),
        s: Vec::new(),
    };
    let mut run = |x: &[f64]| prob.path_into(x, Smoothing::Exact, &mut bufs).then(|| (bufs.v.clone(), bufs.e.clone()));
    let (v0, e0) = run(theta).ok_or_else(|| Error::Numeric {
        t: 0,
        msg: "path invalid at the estimate".into(),
    })?;
    let mut gv = vec![vec![0.0; free.len()]; n];
    let mut ge = vec![vec![0.0; free.len()]; n];
    for (k, &i) in free.iter().enumerate() {
        let h = 1e-5 * theta[i].abs().max(1.0);
        let mut tp = theta.to_vec();
        tp[i] += h;
        let mut tm = theta.to_vec();
        tm[i] -= h;
        let ((vp, ep), (vm, em), width) = match (run(&tp), run(&tm)) {
            (Some(p), Some(m)) => (p, m, 2.0 * h),
            (Some(p), None) => (p, (v0.clone(), e0.clone()), h),
            (None, Some(m)) => ((v0.clone(), e0.clone()), m, h),
            (None, None) => {
                return Err(Error::Numeric {
                    t: 0,
                    msg: format!("perturbed path invalid for parameter {i}"),
                })
            }
        };
        for t in 0..n {
            gv[t][k] = (vp[t] - vm[t]) / width;
            ge[t][k] = (ep[t] - em[t]) / width;
        }
    }
    Ok((gv, ge))
}

fn vcov_for(prob: &Problem, theta: &[f64], free: &[usize], bw: Bandwidth) -> Result<VcovParts> {
    let n = prob.y.len();
    let p = free.len();
    let (gv, ge) = path_gradients(prob, theta, free)?;
    let mut bufs = Bufs {
        v: Vec::new(),
        e: Vec::new(),
        s: Vec::new(),
    };
    if !prob.path_into(theta, Smoothing::Exact, &mut bufs) {
        return Err(Error::validation("covariance requested at an invalid parameter"));
    }
    let al = prob.alpha;
    let c = bw.c_t;
    let mut a_hat = DMatrix::<f64>::zeros(p, p);
    let mut d_hat = DMatrix::<f64>::zeros(p, p);
    let tick = prob.objective_kind() == ObjectiveKind::Tick;
    for t in 0..n {
        let (y, v, e) = (prob.y[t], bufs.v[t], bufs.e[t]);
        let hit = if y <= v { 1.0 } else { 0.0 };
        let dv = DVector::from_row_slice(&gv[t]);
        let kernel = if (y - v).abs() < c { 1.0 / (2.0 * c) } else { 0.0 };
        if tick {
            a_hat += &dv * dv.transpose() * (al * (1.0 - al));
            d_hat += &dv * dv.transpose() * kernel;
        } else {
            let de = DVector::from_row_slice(&ge[t]);
            let g = &dv * ((hit / al - 1.0) / (-e)) + &de * ((hit * (v - y) / al - v + e) / (e * e));
            a_hat += &g * g.transpose();
            d_hat += &dv * dv.transpose() * (kernel / (-al * e)) + &de * de.transpose() / (e * e);
        }
    }
    a_hat /= n as f64;
    d_hat /= n as f64;
    let d_inv = inverse_checked(&d_hat)?;
    let vcov = floor_psd(&(&d_inv * &a_hat * &d_inv));
    Ok(VcovParts { a_hat, d_hat, vcov })
}

/// Inverse of a square matrix, refusing condition numbers above `1e12`.
pub fn inverse_checked(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
    let cond = max / min;
    if !(cond.is_finite() && cond < 1e12) {
        return Err(Error::Singular(format!("matrix is near-singular (condition number {cond:.3e})")));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("matrix is not invertible (condition number {cond:.3e})")))
}

fn floor_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut eig = SymmetricEigen::new(sym);
    for l in eig.eigenvalues.iter_mut() {
        *l = l.max(1e-12);
    }
    let r = eig.recompose();
    (&r + r.transpose()) * 0.5
}

fn std_errors(vcov: &DMatrix<f64>, n: usize) -> Vec<f64> {
    (0..vcov.nrows()).map(|i| (vcov[(i, i)] / n as f64).sqrt()).collect()
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

// ---------------------------------------------------------------------------
// Gaussian QMLE

/// GARCH(1,1) QMLE output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmleFit {
    pub result: EstimationResult,
    pub sigma: Vec<f64>,
    pub std_resid: Vec<f64>,
}

struct QmleCore {
    /// `(μ, ω, β, γ)`
    theta: [f64; 4],
    avg_nll: f64,
    converged: bool,
    evals: usize,
}

fn qmle_nll(y: &[f64], th: &[f64], s2_init: f64) -> f64 {
    let (mu, omega, beta, gamma) = (th[0], th[1], th[2], th[3]);
    if !(omega > 0.0 && beta >= 0.0 && gamma >= 0.0 && beta + gamma < 1.0) {
        return PENALTY;
    }
    let mut s2 = s2_init;
    let mut sum = 0.0;
    for t in 0..y.len() {
        if t > 0 {
            let eps = y[t - 1] - mu;
            s2 = omega + beta * s2 + gamma * eps * eps;
        }
        let eps = y[t] - mu;
        sum += s2.ln() + eps * eps / s2;
    }
    let v = 0.5 * sum / y.len() as f64;
    if v.is_finite() {
        v
    } else {
        PENALTY
    }
}

/// Per-observation scores of the log-likelihood (not negated).
fn qmle_scores(y: &[f64], th: &[f64; 4], s2_init: f64) -> Vec<[f64; 4]> {
    let (mu, omega, beta, gamma) = (th[0], th[1], th[2], th[3]);
    let mut s2 = s2_init;
    let mut ds2 = [0.0f64; 4];
    let mut out = Vec::with_capacity(y.len());
    for t in 0..y.len() {
        if t > 0 {
            let eps = y[t - 1] - mu;
            let prev = s2;
            s2 = omega + beta * prev + gamma * eps * eps;
            ds2 = [
                -2.0 * gamma * eps + beta * ds2[0],
                1.0 + beta * ds2[1],
                prev + beta * ds2[2],
                eps * eps + beta * ds2[3],
            ];
        }
        let eps = y[t] - mu;
        let w = -0.5 * (1.0 / s2 - eps * eps / (s2 * s2));
        let mut g = [0.0; 4];
        for k in 0..4 {
            g[k] = w * ds2[k];
        }
        g[0] += eps / s2;
        out.push(g);
    }
    out
}

fn mean_score(y: &[f64], th: &[f64; 4], s2_init: f64) -> [f64; 4] {
    let sc = qmle_scores(y, th, s2_init);
    let mut m = [0.0; 4];
    for g in &sc {
        for k in 0..4 {
            m[k] += g[k];
        }
    }
    m.map(|v| v / y.len() as f64)
}

fn qmle_core(y: &[f64]) -> Result<QmleCore> {
    if y.len() < MIN_OBS {
        return Err(Error::validation(format!(
            "QMLE needs at least {MIN_OBS} observations, got {}",
            y.len()
        )));
    }
    let s2_init = variance(y);
    let mu0 = mean(y);
    // internal: (μ, log ω, β, γ)
    let nat = |x: &[f64]| [x[0], x[1].exp(), x[2], x[3]];
    let f = |x: &[f64]| qmle_nll(y, &nat(x), s2_init);
    let x0 = [mu0, (0.05 * s2_init).ln(), 0.9, 0.05];
    let sd = s2_init.sqrt();
    let nm = NelderMead::default().with_tolerances(1e-12, 1e-8).with_max_evals(6000);
    let mut res = nm.minimize(f, &x0, &[0.05 * sd, 0.5, 0.03, 0.02]);
    let again = nm.minimize(f, &res.x, &[0.01 * sd, 0.1, 0.01, 0.005]);
    let evals = res.evals + again.evals;
    if again.f <= res.f {
        res = again;
    }
    if res.f >= PENALTY {
        return Err(Error::EstimationFailed("QMLE found no valid variance path".into()));
    }
    let mut th = nat(&res.x);
    let mut best = res.f;
    // Newton polish with the analytic score
    for _ in 0..20 {
        let g = mean_score(y, &th, s2_init);
        let Ok(h) = score_jacobian(y, &th, s2_init) else { break };
        let Some(hinv) = h.try_inverse() else { break };
        let step = hinv * DVector::from_row_slice(&g);
        let mut lam = 1.0;
        let mut improved = false;
        while lam > 1e-4 {
            let cand = [
                th[0] - lam * step[0],
                th[1] - lam * step[1],
                th[2] - lam * step[2],
                th[3] - lam * step[3],
            ];
            let fc = qmle_nll(y, &cand, s2_init);
            if fc < best {
                th = cand;
                best = fc;
                improved = true;
                break;
            }
            lam *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(QmleCore {
        theta: th,
        avg_nll: best,
        converged: res.converged,
        evals,
    })
}

/// Jacobian of the average score by central differences.
fn score_jacobian(y: &[f64], th: &[f64; 4], s2_init: f64) -> Result<DMatrix<f64>> {
    let mut h = DMatrix::<f64>::zeros(4, 4);
    for j in 0..4 {
        let step = 1e-5 * th[j].abs().max(1e-3);
        let mut tp = *th;
        tp[j] += step;
        let mut tm = *th;
        tm[j] -= step;
        let gp = mean_score(y, &tp, s2_init);
        let gm = mean_score(y, &tm, s2_init);
        for i in 0..4 {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            t: 0,
            msg: "non-finite QMLE Hessian".into(),
        });
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// Gaussian quasi-maximum likelihood for GARCH(1,1) with constant mean.
pub fn qmle_garch(y: &[f64]) -> Result<QmleFit> {
    let core = qmle_core(y)?;
    let th = core.theta;
    let s2_init = variance(y);
    let n = y.len();
    let mut sigma = Vec::new();
    let eps: Vec<f64> = y.iter().map(|x| x - th[0]).collect();
    garch_sigma_raw(&eps, th[1], th[2], th[3], s2_init, &mut sigma).map_err(|_| Error::Numeric {
        t: 0,
        msg: "QMLE variance path invalid".into(),
    })?;
    sigma.truncate(n);
    let std_resid: Vec<f64> = eps.iter().zip(&sigma).map(|(e, s)| e / s).collect();

    let (vcov, std_errors, vcov_error) = match qmle_sandwich(y, &th, s2_init) {
        Ok(v) => (Some(to_rows(&v)), Some(std_errors(&v, n)), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    let result = EstimationResult {
        model: ModelSpec::GarchQmle { tail: TailSource::Normal },
        alpha: 0.05,
        objective: ObjectiveKind::NegLogLik,
        names: ["mu", "omega", "beta", "gamma"].map(String::from).to_vec(),
        theta_hat: th.to_vec(),
        avg_loss: core.avg_nll,
        vcov,
        std_errors,
        vcov_error,
        converged: core.converged,
        n_obs: n,
        stage_trace: vec![StageTrace {
            smoothing: Smoothing::Exact,
            start_objective: f64::NAN,
            end_objective: core.avg_nll,
            evals: core.evals,
            converged: core.converged,
        }],
        fixed: BTreeMap::new(),
        fitted: FittedModel::LocScale {
            mu: th[0],
            omega: th[1],
            beta: th[2],
            gamma: th[3],
            tail: TailPair { a: -1.0, b: -1.0 },
            sigma2_init: s2_init,
        },
    };
    Ok(QmleFit {
        result,
        sigma,
        std_resid,
    })
}

fn qmle_sandwich(y: &[f64], th: &[f64; 4], s2_init: f64) -> Result<DMatrix<f64>> {
    let sc = qmle_scores(y, th, s2_init);
    let mut b = DMatrix::<f64>::zeros(4, 4);
    for g in &sc {
        let v = DVector::from_row_slice(g);
        b += &v * v.transpose();
    }
    b /= y.len() as f64;
    let h = score_jacobian(y, th, s2_init)?;
    let hinv = inverse_checked(&h)?;
    Ok(floor_psd(&(&hinv * b * &hinv)))
}

/// QMLE GARCH combined with a tail pair from its standardized residuals.
pub fn fit_locscale(y: &[f64], source: TailSource, alpha: AlphaLevel) -> Result<FittedModel> {
    Ok(locscale_result(y, source, alpha)?.fitted)
}

/// Like [`qmle_garch`], with the fitted model carrying the chosen tail pair.
pub fn locscale_result(y: &[f64], source: TailSource, alpha: AlphaLevel) -> Result<EstimationResult> {
    let fit = qmle_garch(y)?;
    let tail = source.tail_pair(&fit.std_resid, alpha)?;
    let mut result = fit.result;
    result.model = ModelSpec::GarchQmle { tail: source };
    result.alpha = alpha.value();
    if let FittedModel::LocScale { tail: t, .. } = &mut result.fitted {
        *t = tail;
    }
    Ok(result)
}

/// Estimates any model family; rolling windows need no estimation.
pub fn estimate_model(
    y: &[f64],
    spec: ModelSpec,
    alpha: AlphaLevel,
    cfg: &EstimationConfig,
) -> Result<FittedModel> {
    match spec {
        ModelSpec::Rolling { window } => Ok(FittedModel::Rolling {
            params: RollingParams::new(window),
        }),
        ModelSpec::GarchQmle { tail } => fit_locscale(y, tail, alpha),
        _ => Ok(fz_estimate(y, spec, alpha, cfg)?.fitted),
    }
}

/// Mean absolute deviations `(MAE_v, MAE_e)` of an estimated path from the truth.
pub fn fitted_accuracy(est: &RiskPath, truth: &RiskPath) -> Result<(f64, f64)> {
    if est.len() != truth.len() {
        return Err(Error::validation(format!(
            "path lengths differ: {} vs {}",
            est.len(),
            truth.len()
        )));
    }
    let mae = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
    Ok((mae(est.v(), truth.v()), mae(est.e(), truth.e())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::normal_tail_pair;
    use crate::simulate::{simulate_dgp, DgpConfig};

    fn al(a: f64) -> AlphaLevel {
        AlphaLevel::new(a).unwrap()
    }

    fn iid_normal(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn transforms_round_trip() {
        for tx in [Tx::Raw, Tx::Unit, Tx::Sym] {
            for t in [0.1, 0.5, 0.9] {
                assert!((tx.to_natural(tx.to_internal(t)) - t).abs() < 1e-12);
            }
        }
        assert!((Tx::Sym.to_natural(0.0)).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let mut c = EstimationConfig::default();
        assert!(c.validate().is_ok());
        c.tau_schedule = vec![Smoothing::Logistic(5.0)];
        assert!(c.validate().is_err());
        c.tau_schedule = vec![Smoothing::Logistic(20.0), Smoothing::Logistic(5.0), Smoothing::Exact];
        assert!(c.validate().is_err());
        assert_eq!(
            EstimationConfig::parse_schedule("5, 20,exact").unwrap(),
            default_schedule()
        );
        let err = serde_json::from_str::<EstimationConfig>(r#"{"bogus": 1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn constant_model_on_iid_normal() {
        let y = iid_normal(100_000, 3);
        let mut cfg = EstimationConfig {
            multistart: 1,
            compute_vcov: false,
            ..Default::default()
        };
        cfg.fixed.insert("beta".into(), 0.0);
        cfg.fixed.insert("gamma".into(), 0.0);
        let r = fz_estimate(&y, ModelSpec::Gas1f, al(0.05), &cfg).unwrap();
        let FittedModel::Gas1f { params } = r.fitted else { panic!() };
        assert!((params.a + 1.645).abs() < 0.02, "{params:?}");
        assert!((params.b + 2.063).abs() < 0.02, "{params:?}");
        assert_eq!(r.names, vec!["b", "c"]);
        assert_eq!(r.param("beta"), Some(0.0));
    }

    #[test]
    fn short_sample_rejected() {
        let y = iid_normal(100, 1);
        assert!(fz_estimate(&y, ModelSpec::GarchFz, al(0.05), &EstimationConfig::default()).is_err());
        assert!(qmle_garch(&y).is_err());
    }

    fn dgp(seed: u64, n: usize) -> (Vec<f64>, RiskPath) {
        let cfg = DgpConfig {
            t: n,
            seed,
            ..DgpConfig::default()
        };
        let sim = simulate_dgp(&cfg, al(0.05)).unwrap();
        (sim.returns.values().to_vec(), sim.truth)
    }

    #[test]
    fn garch_fz_on_dgp() {
        let (y, truth) = dgp(17, 2500);
        let cfg = EstimationConfig {
            omega: 0.05,
            multistart: 2,
            ..Default::default()
        };
        let r = fz_estimate(&y, ModelSpec::GarchFz, al(0.05), &cfg).unwrap();
        // warm-start property of each stage
        for s in &r.stage_trace {
            assert!(s.end_objective <= s.start_objective);
        }
        let th = &r.theta_hat;
        assert!((th[0] - 0.9).abs() < 0.1, "{th:?}");
        assert!((th[3] - 0.797).abs() < 0.05, "{th:?}");
        let se = r.std_errors.as_ref().expect("vcov");
        assert!(se.iter().all(|s| s.is_finite() && *s > 0.0));
        let path = r.path(&y).unwrap();
        let (mv, me) = fitted_accuracy(&path, &truth).unwrap();
        assert!(mv < 0.3 && me < 0.4);
        // the reported optimum is at least as good as the truth's loss neighbourhood
        let tp = normal_tail_pair(al(0.05));
        let prob = Problem::new(&y, ModelSpec::GarchFz, al(0.05), 0.05).unwrap();
        let mut b = Bufs {
            v: vec![],
            e: vec![],
            s: vec![],
        };
        let at_truth = prob.objective(&[0.9, 0.05, tp.b, tp.a / tp.b], Smoothing::Exact, &mut b);
        assert!(r.avg_loss <= at_truth + 1e-9);
    }

    #[test]
    fn garch_fz_gradients_match_analytic() {
        let (y, _) = dgp(4, 400);
        let y = &y[..];
        let prob = Problem::new(y, ModelSpec::GarchFz, al(0.05), 0.05).unwrap();
        let theta = [0.9, 0.05, -2.0, 0.8];
        let (gv, ge) = path_gradients(&prob, &theta, &[0, 1, 2, 3]).unwrap();
        // analytic: dσ²_t = σ²_{t-1} + β dσ²_{t-1} (β), y²_{t-1} + β dσ²_{t-1} (γ)
        let s2_0 = variance(y);
        let (mut s2, mut db, mut dg) = (s2_0, 0.0, 0.0);
        for t in 0..y.len() {
            if t > 0 {
                let prev = s2;
                s2 = 0.05 + 0.9 * prev + 0.05 * y[t - 1] * y[t - 1];
                db = prev + 0.9 * db;
                dg = y[t - 1] * y[t - 1] + 0.9 * dg;
            }
            let s = s2.sqrt();
            let b = -2.0;
            let c = 0.8;
            let want_v = [c * b * db / (2.0 * s), c * b * dg / (2.0 * s), c * s, b * s];
            let want_e = [b * db / (2.0 * s), b * dg / (2.0 * s), s, 0.0];
            for k in 0..4 {
                let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-3);
                assert!(rel(gv[t][k], want_v[k]) < 1e-4, "v t={t} k={k}");
                assert!(rel(ge[t][k], want_e[k]) < 1e-4 || (ge[t][k] - want_e[k]).abs() < 1e-8, "e t={t} k={k}");
            }
        }
    }

    #[test]
    fn qmle_on_dgp() {
        let (y, _) = dgp(23, 5000);
        let q = qmle_garch(&y).unwrap();
        let th = &q.result.theta_hat;
        assert!(th[0].abs() < 0.1);
        assert!((th[2] - 0.9).abs() < 0.06, "{th:?}");
        assert!((th[3] - 0.05).abs() < 0.03, "{th:?}");
        let g = mean_score(&y, &[th[0], th[1], th[2], th[3]], variance(&y));
        assert!(g.iter().all(|v| v.abs() < 1e-6), "{g:?}");
        assert!(q.result.std_errors.unwrap().iter().all(|s| *s > 0.0));
        assert_eq!(q.std_resid.len(), 5000);
    }

    #[test]
    fn qmle_scores_match_finite_differences() {
        let (y, _) = dgp(9, 300);
        let th = [0.02, 0.06, 0.88, 0.07];
        let s2 = variance(&y);
        let g = mean_score(&y, &th, s2);
        for k in 0..4 {
            let h = 1e-6;
            let mut tp = th;
            tp[k] += h;
            let mut tm = th;
            tm[k] -= h;
            let fd = -(qmle_nll(&y, &tp, s2) - qmle_nll(&y, &tm, s2)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6 * g[k].abs().max(1.0), "k={k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn caviar_tick_objective_prefers_truth() {
        let (y, _) = dgp(31, 20_000);
        let prob = Problem::new(&y, ModelSpec::Caviar, al(0.05), 0.05).unwrap();
        let mut b = Bufs {
            v: vec![],
            e: vec![],
            s: vec![],
        };
        let a = normal_tail_pair(al(0.05)).a;
        let f_true = prob.objective(&[0.9, 0.05, a], Smoothing::Exact, &mut b);
        let f_pert = prob.objective(&[0.8, 0.05, a], Smoothing::Exact, &mut b);
        assert!(f_true < f_pert);
    }

    #[test]
    fn estimation_is_deterministic() {
        let (y, _) = dgp(2, 1000);
        let cfg = EstimationConfig {
            multistart: 3,
            seed: 9,
            ..Default::default()
        };
        let a = fz_estimate(&y, ModelSpec::Gas1f, al(0.05), &cfg).unwrap();
        let b = fz_estimate(&y, ModelSpec::Gas1f, al(0.05), &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn accuracy_examples() {
        let p = RiskPath::new(vec![-1.0, -2.0], vec![-2.0, -3.0]).unwrap();
        assert_eq!(fitted_accuracy(&p, &p).unwrap(), (0.0, 0.0));
        let q = RiskPath::new(vec![-0.9, -1.9], vec![-2.0, -3.0]).unwrap();
        let (mv, me) = fitted_accuracy(&q, &p).unwrap();
        assert!((mv - 0.1).abs() < 1e-12 && me == 0.0);
        assert!(fitted_accuracy(&p.slice(0, 1), &p).is_err());
    }
}
