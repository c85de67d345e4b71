//! GARCH(1,1) data generating processes and the Monte Carlo study driver.
//!
//! Every replication draws from its own ChaCha8 stream, selected by
//! `(seed, stream)`, so results do not depend on how replications are spread
//! over threads.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{Innovation, SkewT, SkewTParams, TailPair, TailSource};
use crate::error::{Error, Result};
use crate::estimate::{fitted_accuracy, fz_estimate, qmle_garch, EstimationConfig};
use crate::loss::Smoothing;
use crate::models::{garch_sigma_raw, FittedModel, Gas1fParams, ModelSpec};
use crate::series::{AlphaLevel, ReturnSeries, RiskPath};
use crate::stats::{mean, median, norm_quantile, std_dev, variance};

fn default_burn_in() -> usize {
    1000
}

/// GARCH(1,1) DGP `Y_t = σ_t η_t`, `σ²_t = ω + β σ²_{t-1} + γ Y²_{t-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpConfig {
    pub omega: f64,
    pub beta: f64,
    pub gamma: f64,
    pub innovation: Innovation,
    /// Sample length after burn-in.
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            omega: 0.05,
            beta: 0.9,
            gamma: 0.05,
            innovation: Innovation::Normal,
            t: 2500,
            burn_in: default_burn_in(),
            seed: 42,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::validation(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.beta >= 0.0 && self.gamma >= 0.0) {
            return Err(Error::validation("beta and gamma must be non-negative"));
        }
        if !(self.beta + self.gamma < 1.0) {
            return Err(Error::validation(format!(
                "beta + gamma = {} violates covariance stationarity",
                self.beta + self.gamma
            )));
        }
        if self.t < 250 {
            return Err(Error::validation(format!("T must be at least 250, got {}", self.t)));
        }
        self.innovation.validate()
    }
}

/// Simulated returns with their true conditional VaR/ES and volatility.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub returns: ReturnSeries,
    pub truth: RiskPath,
    pub sigma: Vec<f64>,
}

enum Sampler {
    Normal,
    SkewT(SkewT),
}

impl Sampler {
    fn new(inn: Innovation) -> Result<Self> {
        Ok(match inn {
            Innovation::Normal => Sampler::Normal,
            Innovation::SkewT { nu, lambda } => Sampler::SkewT(SkewT::new(SkewTParams { nu, lambda })?),
        })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Normal => StandardNormal.sample(rng),
            Sampler::SkewT(d) => d.sample(rng),
        }
    }
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn simulate_dgp(cfg: &DgpConfig, alpha: AlphaLevel) -> Result<Simulation> {
    simulate_dgp_stream(cfg, alpha, 0)
}

/// Draws from stream `stream` of the configured seed.
pub fn simulate_dgp_stream(cfg: &DgpConfig, alpha: AlphaLevel, stream: u64) -> Result<Simulation> {
    cfg.validate()?;
    let tail = cfg.innovation.tail_pair(alpha)?;
    let (y, sigma) = draw_garch(cfg, &Sampler::new(cfg.innovation)?, stream);
    garch_simulation(y, sigma, tail)
}

fn draw_garch(cfg: &DgpConfig, sampler: &Sampler, stream: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = rng_for(cfg.seed, stream);
    let mut s2 = cfg.omega / (1.0 - cfg.beta - cfg.gamma);
    let total = cfg.burn_in + cfg.t;
    let mut y = Vec::with_capacity(cfg.t);
    let mut sigma = Vec::with_capacity(cfg.t);
    for i in 0..total {
        let s = s2.sqrt();
        let yt = s * sampler.draw(&mut rng);
        if i >= cfg.burn_in {
            y.push(yt);
            sigma.push(s);
        }
        s2 = cfg.omega + cfg.beta * s2 + cfg.gamma * yt * yt;
    }
    (y, sigma)
}

fn garch_simulation(y: Vec<f64>, sigma: Vec<f64>, tail: TailPair) -> Result<Simulation> {
    let v = sigma.iter().map(|s| tail.a * s).collect();
    let e = sigma.iter().map(|s| tail.b * s).collect();
    Ok(Simulation {
        returns: ReturnSeries::new(y)?,
        truth: RiskPath::new(v, e)?,
        sigma,
    })
}

/// Markov-chain tail events with `P(hit | no hit) = p01`, `P(hit | hit) = p11`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitChain {
    pub p01: f64,
    pub p11: f64,
}

impl HitChain {
    /// Chain with stationary hit rate `alpha` and lag-one autocorrelation `rho`.
    pub fn with_autocorrelation(alpha: f64, rho: f64) -> Self {
        let p01 = alpha * (1.0 - rho);
        Self { p01, p11: p01 + rho }
    }
}

/// One-factor GAS DGP: `Y_t = exp(κ_t) η_t` with standard Normal `η_t`, so the
/// true `(VaR, ES)` are `(a, b) exp(κ_t)` for the Normal tail pair `(a, b)`.
///
/// With `clustering`, tail events follow a Markov chain instead of occurring
/// independently; the marginal hit rate stays `α` but hits are autocorrelated,
/// so the model is misspecified for calibration tests.
pub fn simulate_gas1f(
    beta: f64,
    gamma: f64,
    alpha: AlphaLevel,
    n: usize,
    seed: u64,
    stream: u64,
    clustering: Option<HitChain>,
) -> Result<(Vec<f64>, RiskPath)> {
    let al = alpha.value();
    let a = norm_quantile(al);
    let tail = crate::dist::normal_tail_pair(alpha);
    let p = Gas1fParams {
        beta,
        gamma,
        a,
        b: tail.b,
    };
    p.validate()?;
    let mut rng = rng_for(seed, stream);
    let mut y = Vec::with_capacity(n);
    let mut last_hit = false;
    for _ in 0..n {
        let eta: f64 = match clustering {
            None => StandardNormal.sample(&mut rng),
            Some(ch) => {
                let p_hit = if last_hit { ch.p11 } else { ch.p01 };
                let hit = rng.random::<f64>() < p_hit;
                last_hit = hit;
                let u: f64 = rng.random_range(f64::EPSILON..1.0);
                let q = if hit { u * al } else { al + u * (1.0 - al) };
                norm_quantile(q.clamp(1e-300, 1.0 - 1e-15))
            }
        };
        y.push(eta);
    }
    // scale by the recursion: κ depends on past returns only
    let mut kappa = 0.0f64;
    let (mut v, mut e): (Vec<f64>, Vec<f64>) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for t in 0..n {
        if t > 0 {
            let (yp, vp, ep) = (y[t - 1], v[t - 1], e[t - 1]);
            let hit = if yp <= vp { 1.0 } else { 0.0 };
            kappa = beta * kappa + gamma * (-(hit * yp / al - ep) / ep);
        }
        let s = kappa.exp();
        y[t] *= s;
        v.push(p.a * s);
        e.push(p.b * s);
    }
    Ok((y, RiskPath::new(v, e)?))
}

// ---------------------------------------------------------------------------
// Monte Carlo study

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Fz,
    Qmle,
    Caviar,
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Estimator::Fz => "FZ",
            Estimator::Qmle => "QMLE",
            Estimator::Caviar => "CAViaR",
        })
    }
}

fn default_reps() -> usize {
    200
}

fn default_alphas() -> Vec<f64> {
    vec![0.05]
}

fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Fz, Estimator::Qmle, Estimator::Caviar]
}

fn default_t_list() -> Vec<usize> {
    vec![2500]
}

fn default_mc_multistart() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default = "default_t_list", rename = "T_list")]
    pub t_list: Vec<usize>,
    #[serde(default = "default_mc_multistart")]
    pub multistart: usize,
    #[serde(default = "crate::simulate::default_schedule")]
    pub tau_schedule: Vec<Smoothing>,
}

pub(crate) fn default_schedule() -> Vec<Smoothing> {
    EstimationConfig::default().tau_schedule
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            replications: default_reps(),
            alphas: default_alphas(),
            estimators: default_estimators(),
            t_list: default_t_list(),
            multistart: default_mc_multistart(),
            tau_schedule: default_schedule(),
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::validation("replications must be at least 1"));
        }
        if self.alphas.is_empty() || self.t_list.is_empty() || self.estimators.is_empty() {
            return Err(Error::validation("alphas, T_list and estimators must be non-empty"));
        }
        for &a in &self.alphas {
            AlphaLevel::new(a)?;
        }
        for &t in &self.t_list {
            if t < 250 {
                return Err(Error::validation(format!("T must be at least 250, got {t}")));
            }
        }
        Ok(())
    }
}

/// Estimates from one replication for one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepEstimate {
    pub theta: Vec<f64>,
    pub se: Option<Vec<f64>>,
    pub mae_v: f64,
    pub mae_e: f64,
}

/// All estimates from one simulated world at one `(α, T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub alpha: f64,
    pub t: usize,
    pub rep: usize,
    pub estimates: Vec<(Estimator, std::result::Result<RepEstimate, String>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub alpha: f64,
    pub t: usize,
    pub estimator: Estimator,
    pub param: String,
    pub truth: f64,
    pub median: f64,
    pub avg_bias: f64,
    pub st_dev: f64,
    pub coverage: f64,
    pub n_ok: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeRow {
    pub alpha: f64,
    pub t: usize,
    pub estimator: Estimator,
    pub mae_v: f64,
    pub mae_e: f64,
    /// Relative to QMLE, when it was run.
    pub ratio_v: Option<f64>,
    pub ratio_e: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub alpha: f64,
    pub t: usize,
    pub estimator: Estimator,
    pub failed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub dgp: DgpConfig,
    pub config: McConfig,
    pub params: Vec<ParamRow>,
    pub mae: Vec<MaeRow>,
    pub failures: Vec<FailureRow>,
    /// True when some estimator failed in more than 2% of replications.
    pub flagged: bool,
    pub replications: Vec<Replication>,
}

/// Parameter names and true values for each estimator.
pub fn true_params(dgp: &DgpConfig, est: Estimator, tail: TailPair) -> (Vec<&'static str>, Vec<f64>) {
    match est {
        Estimator::Fz => (vec!["beta", "gamma", "b", "c"], vec![dgp.beta, dgp.gamma, tail.b, tail.a / tail.b]),
        Estimator::Qmle => (vec!["omega", "beta", "gamma"], vec![dgp.omega, dgp.beta, dgp.gamma]),
        Estimator::Caviar => (vec!["beta", "gamma", "a"], vec![dgp.beta, dgp.gamma, tail.a]),
    }
}

/// Runs every estimator on one world.
pub fn run_replication(
    dgp: &DgpConfig,
    mc: &McConfig,
    t: usize,
    t_index: usize,
    alpha: AlphaLevel,
    rep: usize,
) -> Result<Replication> {
    let cfg = DgpConfig { t, ..dgp.clone() };
    let stream = ((t_index as u64) << 32) | rep as u64;
    let sim = simulate_dgp_stream(&cfg, alpha, stream)?;
    let y = sim.returns.values();
    let mut estimates = Vec::new();
    let qmle = qmle_garch(y);
    let start_bg = match &qmle {
        Ok(q) if q.result.theta_hat[2] + q.result.theta_hat[3] < 0.999 => {
            (q.result.theta_hat[2], q.result.theta_hat[3])
        }
        _ => (0.9, 0.05),
    };
    let tail_start = garch_tail_start(y, dgp.omega, start_bg.0, start_bg.1, alpha);
    let est_cfg = EstimationConfig {
        tau_schedule: mc.tau_schedule.clone(),
        multistart: mc.multistart,
        seed: rep as u64,
        omega: dgp.omega,
        ..Default::default()
    };
    for &est in &mc.estimators {
        let r: Result<RepEstimate> = match est {
            Estimator::Qmle => qmle.as_ref().map_err(|e| Error::EstimationFailed(e.to_string())).and_then(|q| {
                let th = &q.result.theta_hat;
                let source = match dgp.innovation {
                    Innovation::Normal => TailSource::Normal,
                    Innovation::SkewT { .. } => TailSource::SkewT,
                };
                let tail = source.tail_pair(&q.std_resid, alpha)?;
                let fitted = FittedModel::LocScale {
                    mu: th[0],
                    omega: th[1],
                    beta: th[2],
                    gamma: th[3],
                    tail,
                    sigma2_init: variance(y),
                };
                let path = fitted.path(y, alpha)?;
                let (mae_v, mae_e) = fitted_accuracy(&path, &sim.truth)?;
                Ok(RepEstimate {
                    theta: th[1..].to_vec(),
                    se: q.result.std_errors.as_ref().map(|s| s[1..].to_vec()),
                    mae_v,
                    mae_e,
                })
            }),
            Estimator::Fz | Estimator::Caviar => {
                let (spec, start) = match (est, tail_start) {
                    (Estimator::Fz, Some((a, b))) => (ModelSpec::GarchFz, Some(vec![start_bg.0, start_bg.1, b, a / b])),
                    (_, Some((a, _))) => (ModelSpec::Caviar, Some(vec![start_bg.0, start_bg.1, a])),
                    (Estimator::Fz, None) => (ModelSpec::GarchFz, None),
                    _ => (ModelSpec::Caviar, None),
                };
                let c = EstimationConfig { start, ..est_cfg.clone() };
                fz_estimate(y, spec, alpha, &c).and_then(|r| {
                    let path = r.path(y)?;
                    let (mae_v, mae_e) = fitted_accuracy(&path, &sim.truth)?;
                    Ok(RepEstimate {
                        theta: r.theta_hat.clone(),
                        se: r.std_errors.clone(),
                        mae_v,
                        mae_e,
                    })
                })
            }
        };
        estimates.push((est, r.map_err(|e| e.to_string())));
    }
    Ok(Replication {
        alpha: alpha.value(),
        t,
        rep,
        estimates,
    })
}

/// Tail pair of `y / σ_t` under GARCH parameters, as an estimation start.
fn garch_tail_start(y: &[f64], omega: f64, beta: f64, gamma: f64, alpha: AlphaLevel) -> Option<(f64, f64)> {
    let mut s = Vec::new();
    garch_sigma_raw(y, omega, beta, gamma, variance(y), &mut s).ok()?;
    let mut z: Vec<f64> = y.iter().zip(&s).map(|(y, s)| y / s).collect();
    z.sort_by(f64::total_cmp);
    let (a, b) = crate::stats::sorted_tail_pair(&z, alpha.value());
    (b < a && a < 0.0).then_some((a, b))
}

/// Runs the study: replications in parallel, aggregation in replication order.
pub fn run_mc_study(mc: &McConfig, dgp: &DgpConfig) -> Result<McReport> {
    mc.validate()?;
    dgp.validate()?;
    let mut reps = Vec::new();
    for (ti, &t) in mc.t_list.iter().enumerate() {
        for &a in &mc.alphas {
            let alpha = AlphaLevel::new(a)?;
            let batch: Vec<Result<Replication>> = (0..mc.replications)
                .into_par_iter()
                .map(|r| run_replication(dgp, mc, t, ti, alpha, r))
                .collect();
            for r in batch {
                reps.push(r?);
            }
        }
    }
    summarize(mc, dgp, reps)
}

/// Aggregates replications into study tables.
pub fn summarize(mc: &McConfig, dgp: &DgpConfig, reps: Vec<Replication>) -> Result<McReport> {
    let mut params = Vec::new();
    let mut mae = Vec::new();
    let mut failures = Vec::new();
    let mut flagged = false;
    for &t in &mc.t_list {
        for &a in &mc.alphas {
            let alpha = AlphaLevel::new(a)?;
            let tail = dgp.innovation.tail_pair(alpha)?;
            let cell: Vec<&Replication> = reps.iter().filter(|r| r.t == t && r.alpha == a).collect();
            let mut qmle_mae = None;
            let mut cell_mae = Vec::new();
            for &est in &mc.estimators {
                let ok: Vec<&RepEstimate> = cell
                    .iter()
                    .filter_map(|r| r.estimates.iter().find(|(e, _)| *e == est))
                    .filter_map(|(_, r)| r.as_ref().ok())
                    .collect();
                let failed = cell.len() - ok.len();
                if failed as f64 > 0.02 * cell.len() as f64 {
                    flagged = true;
                }
                failures.push(FailureRow {
                    alpha: a,
                    t,
                    estimator: est,
                    failed,
                    total: cell.len(),
                });
                if ok.is_empty() {
                    continue;
                }
                let (names, truth) = true_params(dgp, est, tail);
                for (k, name) in names.iter().enumerate() {
                    let vals: Vec<f64> = ok.iter().map(|r| r.theta[k]).collect();
                    let covered: Vec<f64> = ok
                        .iter()
                        .filter_map(|r| r.se.as_ref().map(|s| (r.theta[k], s[k])))
                        .map(|(th, se)| if (th - truth[k]).abs() <= 1.96 * se { 1.0 } else { 0.0 })
                        .collect();
                    params.push(ParamRow {
                        alpha: a,
                        t,
                        estimator: est,
                        param: name.to_string(),
                        truth: truth[k],
                        median: median(&vals),
                        avg_bias: mean(&vals) - truth[k],
                        st_dev: std_dev(&vals),
                        coverage: if covered.is_empty() { f64::NAN } else { mean(&covered) },
                        n_ok: ok.len(),
                    });
                }
                let mv = mean(&ok.iter().map(|r| r.mae_v).collect::<Vec<_>>());
                let me = mean(&ok.iter().map(|r| r.mae_e).collect::<Vec<_>>());
                if est == Estimator::Qmle {
                    qmle_mae = Some((mv, me));
                }
                cell_mae.push((est, mv, me));
            }
            for (est, mv, me) in cell_mae {
                mae.push(MaeRow {
                    alpha: a,
                    t,
                    estimator: est,
                    mae_v: mv,
                    mae_e: me,
                    ratio_v: qmle_mae.map(|q| mv / q.0),
                    ratio_e: qmle_mae.map(|q| me / q.1),
                });
            }
        }
    }
    Ok(McReport {
        dgp: dgp.clone(),
        config: mc.clone(),
        params,
        mae,
        failures,
        flagged,
        replications: reps,
    })
}

impl McReport {
    /// One row per `(α, T, estimator, parameter, statistic)`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["alpha", "T", "estimator", "param", "statistic", "value"])?;
        for r in &self.params {
            for (stat, val) in [
                ("true", r.truth),
                ("median", r.median),
                ("avg_bias", r.avg_bias),
                ("st_dev", r.st_dev),
                ("coverage", r.coverage),
            ] {
                w.write_record([
                    r.alpha.to_string(),
                    r.t.to_string(),
                    r.estimator.to_string(),
                    r.param.clone(),
                    stat.to_string(),
                    val.to_string(),
                ])?;
            }
        }
        for r in &self.mae {
            let mut rows = vec![("mae_var", Some(r.mae_v)), ("mae_es", Some(r.mae_e))];
            rows.push(("mae_ratio_var", r.ratio_v));
            rows.push(("mae_ratio_es", r.ratio_e));
            for (stat, val) in rows {
                if let Some(v) = val {
                    w.write_record([
                        r.alpha.to_string(),
                        r.t.to_string(),
                        r.estimator.to_string(),
                        String::new(),
                        stat.to_string(),
                        v.to_string(),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// Aligned text tables: parameter rows per estimator, then accuracy.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for &t in &self.config.t_list {
            for &a in &self.config.alphas {
                let _ = writeln!(out, "alpha = {a}, T = {t}");
                for &est in &self.config.estimators {
                    let rows: Vec<&ParamRow> = self
                        .params
                        .iter()
                        .filter(|r| r.t == t && r.alpha == a && r.estimator == est)
                        .collect();
                    if rows.is_empty() {
                        let _ = writeln!(out, "  {est}: no successful replications");
                        continue;
                    }
                    let _ = write!(out, "  {:<10}", est.to_string());
                    for r in &rows {
                        let _ = write!(out, "{:>10}", r.param);
                    }
                    out.push('\n');
                    type Getter = fn(&ParamRow) -> f64;
                    let stats: [(&str, Getter); 5] = [
                        ("True", |r| r.truth),
                        ("Median", |r| r.median),
                        ("Avg bias", |r| r.avg_bias),
                        ("St dev", |r| r.st_dev),
                        ("Coverage", |r| r.coverage),
                    ];
                    for (label, f) in stats {
                        let _ = write!(out, "  {label:<10}");
                        for r in &rows {
                            let _ = write!(out, "{:>10.3}", f(r));
                        }
                        out.push('\n');
                    }
                }
                let _ = writeln!(out, "  {:<10}{:>10}{:>10}{:>10}{:>10}", "MAE", "VaR", "ES", "rel VaR", "rel ES");
                for r in self.mae.iter().filter(|r| r.t == t && r.alpha == a) {
                    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
                    let _ = writeln!(
                        out,
                        "  {:<10}{:>10.3}{:>10.3}{:>10}{:>10}",
                        r.estimator.to_string(),
                        r.mae_v,
                        r.mae_e,
                        fmt(r.ratio_v),
                        fmt(r.ratio_e)
                    );
                }
                out.push('\n');
            }
        }
        for f in self.failures.iter().filter(|f| f.failed > 0) {
            let _ = writeln!(
                out,
                "failures: {} at alpha={} T={}: {}/{}",
                f.estimator, f.alpha, f.t, f.failed, f.total
            );
        }
        if self.flagged {
            out.push_str("WARNING: failure rate above 2% in at least one cell\n");
        }
        out
    }
}
