//! Command-line front end.
//!
//! Every subcommand resolves a [`RunConfig`] from an optional JSON file and
//! its flags (flags win), runs, and echoes the resolved configuration into
//! its JSON outputs. Paths and thread counts are not echoed, so output bytes
//! depend only on the inputs and the seed.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::backtest::oos_harness;
use crate::dist::Innovation;
use crate::error::{Error, Result};
use crate::estimate::{caviar_estimate, fz_estimate, locscale_result, EstimationConfig, EstimationResult};
use crate::models::{news_impact_curve, FittedModel, ModelSpec};
use crate::series::{AlphaLevel, ReturnSeries, SampleSplit, Scale};
use crate::simulate::{run_mc_study, simulate_dgp, DgpConfig, Estimator, McConfig};
use crate::stats::{mean, std_dev};

#[derive(Debug, Parser)]
#[command(name = "fzrisk", version, about = "Joint VaR/ES modeling with the FZ0 loss")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a GARCH(1,1) return series with its true VaR/ES.
    Simulate(SimulateArgs),
    /// Estimate a model and write parameters, standard errors and the fitted path.
    Fit(FitArgs),
    /// Filter a series with a fitted model and forecast the next period.
    Forecast(ForecastArgs),
    /// Out-of-sample comparison of several models.
    Backtest(BacktestArgs),
    /// Monte Carlo study of the FZ, QMLE and CAViaR estimators.
    Mc(McArgs),
    /// News impact curve of a fitted model.
    Nic(NicArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Tail probability.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Smoothing continuation, e.g. `5,20,exact`.
    #[arg(long)]
    pub tau_schedule: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Return column name (default `return`).
    #[arg(long)]
    pub column: Option<String>,
    /// Units of the return column: percent or decimal.
    #[arg(long, value_parser = parse_scale)]
    pub scale: Option<Scale>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DgpArgs {
    /// Data generating process; only `garch` is available.
    #[arg(long)]
    pub dgp: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Innovation distribution: normal or skewt.
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub burn_in: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub dgp: DgpArgs,
    /// Sample length.
    #[arg(long = "T")]
    pub t: Option<usize>,
    /// Returns CSV (default `sim.csv` in the output directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub multistart: Option<usize>,
    /// Result JSON (default `fit.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: Option<String>,
    /// Reuse a `fit` result instead of estimating on the input.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    #[arg(long)]
    pub multistart: Option<usize>,
    /// Forecast JSON (default `forecast.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated models; defaults to the ten-model comparison set.
    #[arg(long)]
    pub models: Option<String>,
    /// Number of in-sample observations (default: half the sample).
    #[arg(long)]
    pub in_sample_end: Option<usize>,
    #[arg(long)]
    pub multistart: Option<usize>,
    /// Report JSON (default `backtest.json`); a text table is written alongside.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub dgp: DgpArgs,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma-separated sample sizes.
    #[arg(long = "T")]
    pub t_list: Option<String>,
    /// Comma-separated tail probabilities; overrides `--alpha`.
    #[arg(long)]
    pub alphas: Option<String>,
    /// Comma-separated subset of fz, qmle, caviar.
    #[arg(long)]
    pub estimators: Option<String>,
    #[arg(long)]
    pub multistart: Option<usize>,
    /// Summary CSV (default `mc.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NicArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// Relative shift of the state from its long-run average, e.g. `+0.10`.
    #[arg(long, allow_hyphen_values = true)]
    pub state_shift: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid_max: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub multistart: Option<usize>,
    /// Curve CSV (default `nic.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_scale(s: &str) -> std::result::Result<Scale, String> {
    match s.to_ascii_lowercase().as_str() {
        "percent" => Ok(Scale::Percent),
        "decimal" => Ok(Scale::Decimal),
        other => Err(format!("unknown scale '{other}' (expected percent or decimal)")),
    }
}

/// Resolved run parameters. Unset fields fall back to command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_schedule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub models: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub in_sample_end: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multistart: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dgp: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(rename = "T_list", skip_serializing_if = "Option::is_none")]
    pub t_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimators: Option<Vec<Estimator>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_shift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    /// Advanced estimator tuning; `seed`, `tau_schedule` and `multistart`
    /// above take precedence over the same fields here.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimation: Option<EstimationConfig>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
}

macro_rules! overlay {
    ($base:expr, $over:expr; $($f:ident),* $(,)?) => {
        $( if $over.$f.is_some() { $base.$f = $over.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::validation(format!("config {}: {e}", path.display())))
    }

    /// Overwrites every field set in `over`.
    pub fn merge(mut self, over: &RunConfig) -> Self {
        overlay!(self, over; alpha, seed, tau_schedule, model, models, input, column, scale, fit,
            in_sample_end, multistart, dgp, omega, beta, gamma, dist, nu, lambda, t, burn_in, reps,
            t_list, alphas, estimators, state_shift, grid_min, grid_max, grid_points, estimation,
            out, out_dir, threads);
        self
    }

    fn alpha_level(&self) -> Result<AlphaLevel> {
        AlphaLevel::new(self.alpha.unwrap_or(0.05))
    }

    fn estimation_config(&self) -> Result<EstimationConfig> {
        let mut cfg = self.estimation.clone().unwrap_or_default();
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.multistart {
            cfg.multistart = m;
        }
        if let Some(s) = &self.tau_schedule {
            cfg.tau_schedule = EstimationConfig::parse_schedule(s)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn returns(&self) -> Result<ReturnSeries> {
        let path = self
            .input
            .as_ref()
            .ok_or_else(|| Error::validation("an input file is required (--in)"))?;
        ReturnSeries::load_csv(path, self.column.as_deref().unwrap_or("return"), self.scale.unwrap_or_default())
    }

    fn model_spec(&self) -> Result<ModelSpec> {
        self.model
            .as_deref()
            .ok_or_else(|| Error::validation("a model is required (--model)"))?
            .parse()
    }

    fn dgp_config(&self) -> Result<DgpConfig> {
        if let Some(d) = &self.dgp {
            if !d.eq_ignore_ascii_case("garch") {
                return Err(Error::validation(format!("unknown dgp '{d}' (only garch is available)")));
            }
        }
        let def = DgpConfig::default();
        let innovation = match self.dist.as_deref().unwrap_or("normal").to_ascii_lowercase().as_str() {
            "normal" => Innovation::Normal,
            "skewt" | "skew-t" => Innovation::SkewT {
                nu: self.nu.unwrap_or(5.0),
                lambda: self.lambda.unwrap_or(-0.5),
            },
            other => return Err(Error::validation(format!("unknown distribution '{other}'"))),
        };
        let cfg = DgpConfig {
            omega: self.omega.unwrap_or(def.omega),
            beta: self.beta.unwrap_or(def.beta),
            gamma: self.gamma.unwrap_or(def.gamma),
            innovation,
            t: self.t.unwrap_or(def.t),
            burn_in: self.burn_in.unwrap_or(def.burn_in),
            seed: self.seed.unwrap_or(def.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn output_path(&self, default_name: &str) -> PathBuf {
        let dir = self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        match &self.out {
            Some(p) => dir.join(p),
            None => dir.join(default_name),
        }
    }
}

fn common_overrides(c: &CommonArgs) -> RunConfig {
    RunConfig {
        alpha: c.alpha,
        seed: c.seed,
        tau_schedule: c.tau_schedule.clone(),
        out_dir: c.out_dir.clone(),
        threads: c.threads,
        ..Default::default()
    }
}

fn data_overrides(rc: &mut RunConfig, d: &DataArgs) {
    rc.input = d.input.clone();
    rc.column = d.column.clone();
    rc.scale = d.scale;
}

fn dgp_overrides(rc: &mut RunConfig, d: &DgpArgs) {
    rc.dgp = d.dgp.clone();
    rc.omega = d.omega;
    rc.beta = d.beta;
    rc.gamma = d.gamma;
    rc.dist = d.dist.clone();
    rc.nu = d.nu;
    rc.lambda = d.lambda;
    rc.burn_in = d.burn_in;
}

fn split_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse()
                .map_err(|_| Error::validation(format!("bad {what} '{}'", tok.trim())))
        })
        .collect()
}

fn parse_estimator(s: &str) -> Result<Estimator> {
    match s.trim().to_ascii_lowercase().as_str() {
        "fz" => Ok(Estimator::Fz),
        "qmle" => Ok(Estimator::Qmle),
        "caviar" => Ok(Estimator::Caviar),
        other => Err(Error::validation(format!("unknown estimator '{other}'"))),
    }
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a) => &a.common,
            Command::Fit(a) => &a.common,
            Command::Forecast(a) => &a.common,
            Command::Backtest(a) => &a.common,
            Command::Mc(a) => &a.common,
            Command::Nic(a) => &a.common,
        }
    }

    /// Flag values as a configuration overlay.
    fn overrides(&self) -> Result<RunConfig> {
        let mut rc = common_overrides(self.common());
        match self {
            Command::Simulate(a) => {
                dgp_overrides(&mut rc, &a.dgp);
                rc.t = a.t;
                rc.out = a.out.clone();
            }
            Command::Fit(a) => {
                data_overrides(&mut rc, &a.data);
                rc.model = a.model.clone();
                rc.multistart = a.multistart;
                rc.out = a.out.clone();
            }
            Command::Forecast(a) => {
                data_overrides(&mut rc, &a.data);
                rc.model = a.model.clone();
                rc.fit = a.fit.clone();
                rc.multistart = a.multistart;
                rc.out = a.out.clone();
            }
            Command::Backtest(a) => {
                data_overrides(&mut rc, &a.data);
                rc.models = a
                    .models
                    .as_ref()
                    .map(|m| m.split(',').map(|s| s.trim().to_string()).collect());
                rc.in_sample_end = a.in_sample_end;
                rc.multistart = a.multistart;
                rc.out = a.out.clone();
            }
            Command::Mc(a) => {
                dgp_overrides(&mut rc, &a.dgp);
                rc.reps = a.reps;
                rc.t_list = a.t_list.as_deref().map(|s| split_list(s, "sample size")).transpose()?;
                rc.alphas = a.alphas.as_deref().map(|s| split_list(s, "alpha")).transpose()?;
                rc.estimators = a
                    .estimators
                    .as_deref()
                    .map(|s| s.split(',').map(parse_estimator).collect::<Result<Vec<_>>>())
                    .transpose()?;
                rc.multistart = a.multistart;
                rc.out = a.out.clone();
            }
            Command::Nic(a) => {
                data_overrides(&mut rc, &a.data);
                rc.model = a.model.clone();
                rc.fit = a.fit.clone();
                rc.state_shift = a.state_shift;
                rc.grid_min = a.grid_min;
                rc.grid_max = a.grid_max;
                rc.grid_points = a.grid_points;
                rc.multistart = a.multistart;
                rc.out = a.out.clone();
            }
        }
        Ok(rc)
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code: 0 on success or help, 2 for usage and input errors, 1 otherwise.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

/// Runs one command and returns a human-readable summary.
pub fn execute(cmd: &Command) -> Result<String> {
    let over = cmd.overrides()?;
    let base = match &cmd.common().config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let rc = base.merge(&over);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(rc.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::validation(format!("thread pool: {e}")))?;
    pool.install(|| match cmd {
        Command::Simulate(_) => cmd_simulate(&rc),
        Command::Fit(_) => cmd_fit(&rc),
        Command::Forecast(_) => cmd_forecast(&rc),
        Command::Backtest(_) => cmd_backtest(&rc),
        Command::Mc(_) => cmd_mc(&rc),
        Command::Nic(_) => cmd_nic(&rc),
    })
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create(path)?.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// `dir/stem<suffix>` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_simulate(rc: &RunConfig) -> Result<String> {
    let dgp = rc.dgp_config()?;
    let alpha = rc.alpha_level()?;
    let sim = simulate_dgp(&dgp, alpha)?;
    let out = rc.output_path("sim.csv");
    sim.returns.write_csv(create(&out)?, "return")?;
    let truth = sibling(&out, "_truth.csv");
    sim.truth.write_csv(create(&truth)?, Some(sim.returns.values()))?;
    let y = sim.returns.values();
    write_json(
        &sibling(&out, ".json"),
        &json!({ "config": rc, "dgp": dgp, "alpha": alpha.value(), "n": y.len(), "mean": mean(y), "std_dev": std_dev(y) }),
    )?;
    Ok(format!(
        "simulated {} returns (mean {:.4}, sd {:.4}) -> {}",
        y.len(),
        mean(y),
        std_dev(y),
        out.display()
    ))
}

fn estimate_result(y: &[f64], spec: ModelSpec, alpha: AlphaLevel, cfg: &EstimationConfig) -> Result<EstimationResult> {
    match spec {
        ModelSpec::Rolling { .. } => Err(Error::validation(format!("{spec} has no parameters to estimate"))),
        ModelSpec::GarchQmle { tail } => locscale_result(y, tail, alpha),
        ModelSpec::Caviar => caviar_estimate(y, alpha, cfg),
        _ => fz_estimate(y, spec, alpha, cfg),
    }
}

/// Flat parameter table: each name, `se_<name>`, the tail pair when the model
/// has one, and `avg_loss`.
fn param_table(res: &EstimationResult) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    for (i, name) in res.names.iter().enumerate() {
        m.insert(name.clone(), json!(res.theta_hat[i]));
        m.insert(
            format!("se_{name}"),
            json!(res.std_errors.as_ref().map(|s| s[i]).filter(|x| x.is_finite())),
        );
    }
    for (k, v) in &res.fixed {
        m.entry(k.clone()).or_insert(json!(v));
    }
    let tail = match &res.fitted {
        FittedModel::Gas1f { params } => Some((params.a, params.b)),
        FittedModel::Hybrid { params } => Some((params.tail.a, params.tail.b)),
        FittedModel::GarchFz { params, .. } => Some((params.tail.a, params.tail.b)),
        FittedModel::LocScale { tail, .. } => Some((tail.a, tail.b)),
        _ => None,
    };
    if let Some((a, b)) = tail {
        if !m.contains_key("a") {
            m.insert("a".into(), json!(a));
            m.insert("se_a".into(), json!(se_of_product(res)));
        }
        m.entry("b").or_insert(json!(b));
    }
    m.insert("avg_loss".into(), json!(res.avg_loss));
    m
}

/// Delta-method standard error of `a = c * b` from the `(b, c)` block.
fn se_of_product(res: &EstimationResult) -> Option<f64> {
    let ib = res.names.iter().position(|n| n == "b")?;
    let ic = res.names.iter().position(|n| n == "c")?;
    let v = res.vcov.as_ref()?;
    let (b, c) = (res.theta_hat[ib], res.theta_hat[ic]);
    let n = res.n_obs as f64;
    let var = (c * c * v[ib][ib] + b * b * v[ic][ic] + 2.0 * b * c * v[ib][ic]) / n;
    (var >= 0.0 && var.is_finite()).then(|| var.sqrt())
}

fn cmd_fit(rc: &RunConfig) -> Result<String> {
    let spec = rc.model_spec()?;
    let alpha = rc.alpha_level()?;
    let cfg = rc.estimation_config()?;
    let data = rc.returns()?;
    let y = data.values();
    let res = estimate_result(y, spec, alpha, &cfg)?;
    let path = res.path(y)?;
    let out = rc.output_path("fit.json");
    let mut doc = param_table(&res);
    doc.insert("config".into(), json!(rc));
    doc.insert("model".into(), json!(spec.to_string()));
    doc.insert("alpha".into(), json!(alpha.value()));
    doc.insert("n_obs".into(), json!(y.len()));
    doc.insert("result".into(), serde_json::to_value(&res)?);
    write_json(&out, &Value::Object(doc))?;
    let warm = res.fitted.warmup();
    path.write_csv(create(&sibling(&out, "_path.csv"))?, Some(&y[warm..]))?;
    let params: Vec<String> = res
        .names
        .iter()
        .zip(&res.theta_hat)
        .map(|(n, v)| format!("{n}={v:.4}"))
        .collect();
    Ok(format!(
        "{} alpha={} avg_loss={:.4} {} -> {}",
        spec,
        alpha.value(),
        res.avg_loss,
        params.join(" "),
        out.display()
    ))
}

/// Fitted model from `--fit` when given, otherwise estimated on `y`.
fn fitted_model(rc: &RunConfig, y: &[f64], alpha: AlphaLevel) -> Result<(ModelSpec, FittedModel)> {
    if let Some(p) = &rc.fit {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let doc: Value = serde_json::from_str(&text)?;
        let res: EstimationResult = serde_json::from_value(
            doc.get("result")
                .cloned()
                .ok_or_else(|| Error::validation(format!("{} has no 'result' field", p.display())))?,
        )?;
        if (res.alpha - alpha.value()).abs() > 1e-12 {
            return Err(Error::validation(format!(
                "fit was estimated at alpha={} but alpha={} was requested",
                res.alpha,
                alpha.value()
            )));
        }
        return Ok((res.model, res.fitted));
    }
    let spec = rc.model_spec()?;
    let cfg = rc.estimation_config()?;
    let fitted = match spec {
        ModelSpec::Rolling { .. } | ModelSpec::GarchQmle { .. } => crate::estimate::estimate_model(y, spec, alpha, &cfg)?,
        _ => estimate_result(y, spec, alpha, &cfg)?.fitted,
    };
    Ok((spec, fitted))
}

fn cmd_forecast(rc: &RunConfig) -> Result<String> {
    let alpha = rc.alpha_level()?;
    let data = rc.returns()?;
    let y = data.values();
    let (spec, fitted) = fitted_model(rc, y, alpha)?;
    let path = fitted.path(y, alpha)?;
    let (v, e) = fitted.forecast_next(y, alpha)?;
    let out = rc.output_path("forecast.json");
    write_json(
        &out,
        &json!({ "config": rc, "model": spec.to_string(), "alpha": alpha.value(), "n_obs": y.len(), "var_next": v, "es_next": e, "fitted": fitted }),
    )?;
    path.write_csv(create(&sibling(&out, "_path.csv"))?, Some(&y[fitted.warmup()..]))?;
    Ok(format!("{spec} next-period VaR {v:.4}, ES {e:.4} -> {}", out.display()))
}

fn cmd_backtest(rc: &RunConfig) -> Result<String> {
    let alpha = rc.alpha_level()?;
    let cfg = rc.estimation_config()?;
    let data = rc.returns()?;
    let y = data.values();
    let models = match &rc.models {
        Some(list) => list.iter().map(|m| m.parse()).collect::<Result<Vec<ModelSpec>>>()?,
        None => ModelSpec::backtest_set(),
    };
    let split = SampleSplit::new(rc.in_sample_end.unwrap_or(y.len() / 2));
    let report = oos_harness(y, split, &models, alpha, &cfg)?;
    let out = rc.output_path("backtest.json");
    write_json(&out, &json!({ "config": rc, "report": report }))?;
    let text = report.to_text();
    write_text(&sibling(&out, ".txt"), &text)?;
    Ok(text)
}

fn cmd_mc(rc: &RunConfig) -> Result<String> {
    let dgp = rc.dgp_config()?;
    let def = McConfig::default();
    let mc = McConfig {
        replications: rc.reps.unwrap_or(def.replications),
        alphas: rc
            .alphas
            .clone()
            .or_else(|| rc.alpha.map(|a| vec![a]))
            .unwrap_or(def.alphas),
        estimators: rc.estimators.clone().unwrap_or(def.estimators),
        t_list: rc.t_list.clone().or_else(|| rc.t.map(|t| vec![t])).unwrap_or(def.t_list),
        multistart: rc.multistart.unwrap_or(def.multistart),
        tau_schedule: match &rc.tau_schedule {
            Some(s) => EstimationConfig::parse_schedule(s)?,
            None => def.tau_schedule,
        },
    };
    mc.validate()?;
    let report = run_mc_study(&mc, &dgp)?;
    let out = rc.output_path("mc.csv");
    report.write_csv(create(&out)?)?;
    write_json(&sibling(&out, ".json"), &json!({ "config": rc, "report": report }))?;
    let text = report.to_text();
    write_text(&sibling(&out, ".txt"), &text)?;
    Ok(text)
}

fn cmd_nic(rc: &RunConfig) -> Result<String> {
    let alpha = rc.alpha_level()?;
    let data = rc.returns()?;
    let y = data.values();
    let (spec, fitted) = fitted_model(rc, y, alpha)?;
    let path = fitted.path(y, alpha)?;
    let shift = rc.state_shift.unwrap_or(0.0);
    if !(shift > -1.0 && shift.is_finite()) {
        return Err(Error::validation(format!("state shift must exceed -1, got {shift}")));
    }
    let (v_bar, e_bar) = (mean(path.v()), mean(path.e()));
    let state = ((1.0 + shift) * v_bar, (1.0 + shift) * e_bar);
    let (lo, hi) = (rc.grid_min.unwrap_or(-5.0), rc.grid_max.unwrap_or(5.0));
    let n = rc.grid_points.unwrap_or(201);
    if !(lo < hi) || n < 2 {
        return Err(Error::validation("grid needs grid_min < grid_max and at least 2 points"));
    }
    let grid: Vec<f64> = (0..n)
        .map(|i| (lo * (n - 1 - i) as f64 + hi * i as f64) / (n - 1) as f64)
        .collect();
    let rows = news_impact_curve(&fitted, state, alpha, &grid)?;
    let out = rc.output_path("nic.csv");
    let mut w = csv::Writer::from_writer(create(&out)?);
    w.write_record(["y", "v_next", "e_next"])?;
    for r in &rows {
        w.write_record([r.y.to_string(), r.v_next.to_string(), r.e_next.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&out, e))?;
    write_json(
        &sibling(&out, ".json"),
        &json!({ "config": rc, "model": spec.to_string(), "alpha": alpha.value(), "long_run": [v_bar, e_bar], "state": [state.0, state.1], "fitted": fitted }),
    )?;
    Ok(format!(
        "{spec} news impact curve at state ({:.4}, {:.4}), {n} points -> {}",
        state.0,
        state.1,
        out.display()
    ))
}
