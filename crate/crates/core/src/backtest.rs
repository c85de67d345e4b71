//! Out-of-sample evaluation: average FZ0 losses, Diebold–Mariano tests and
//! DQ/DES calibration regressions.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{estimate_model, EstimationConfig};
use crate::loss::{average_loss_raw, loss_series, Smoothing};
use crate::models::{FittedModel, ModelSpec};
use crate::series::{AlphaLevel, RiskPath, SampleSplit};
use crate::stats::{chi2_sf, mean};

/// Standardized generalized residuals of a VaR/ES forecast path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdResiduals {
    /// `1{Y <= v} - α`
    pub lam_v_s: Vec<f64>,
    /// `1{Y <= v} Y / (α e) - 1`
    pub lam_e_s: Vec<f64>,
}

pub fn std_residuals(y: &[f64], path: &RiskPath, alpha: AlphaLevel) -> Result<StdResiduals> {
    if y.len() != path.len() {
        return Err(Error::validation(format!(
            "{} returns but {} forecasts",
            y.len(),
            path.len()
        )));
    }
    let a = alpha.value();
    let mut lam_v_s = Vec::with_capacity(y.len());
    let mut lam_e_s = Vec::with_capacity(y.len());
    for ((&y, &v), &e) in y.iter().zip(path.v()).zip(path.e()) {
        let hit = if y <= v { 1.0 } else { 0.0 };
        lam_v_s.push(hit - a);
        lam_e_s.push(hit * y / (a * e) - 1.0);
    }
    Ok(StdResiduals { lam_v_s, lam_e_s })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GofKind {
    /// VaR residual on `[1, lag, v_t]`.
    Dq,
    /// ES residual on `[1, lag, e_t]`.
    Des,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub wald_stat: f64,
    pub p_value: f64,
    pub coefficients: [f64; 3],
}

/// Calibration regression with a White-robust Wald test that all three
/// coefficients are zero.
pub fn dq_test(resid: &StdResiduals, path: &RiskPath, kind: GofKind) -> Result<GofResult> {
    let (r, x3) = match kind {
        GofKind::Dq => (&resid.lam_v_s, path.v()),
        GofKind::Des => (&resid.lam_e_s, path.e()),
    };
    let n = r.len();
    if n != path.len() {
        return Err(Error::validation("residuals and path lengths differ"));
    }
    if n < 31 {
        return Err(Error::validation(format!("need at least 30 usable observations, got {}", n.saturating_sub(1))));
    }
    let m = n - 1;
    let x = DMatrix::from_fn(m, 3, |i, j| match j {
        0 => 1.0,
        1 => r[i],
        _ => x3[i + 1],
    });
    let yv = DVector::from_iterator(m, r[1..].iter().copied());
    let xtx = x.transpose() * &x;
    let xtx_inv = crate::estimate::inverse_checked(&xtx)
        .map_err(|e| Error::Singular(format!("collinear {kind:?} regressors: {e}")))?;
    let beta = &xtx_inv * x.transpose() * &yv;
    let u = &yv - &x * &beta;
    let mut meat = DMatrix::<f64>::zeros(3, 3);
    for i in 0..m {
        let xi = x.row(i).transpose();
        meat += &xi * xi.transpose() * (u[i] * u[i]);
    }
    let cov = &xtx_inv * meat * &xtx_inv;
    let cov_inv = crate::estimate::inverse_checked(&cov)
        .map_err(|e| Error::Singular(format!("degenerate {kind:?} covariance: {e}")))?;
    let wald = (beta.transpose() * cov_inv * &beta)[(0, 0)].max(0.0);
    Ok(GofResult {
        wald_stat: wald,
        p_value: chi2_sf(wald, 3.0),
        coefficients: [beta[0], beta[1], beta[2]],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    /// `mean(d) / sqrt(lrv / T)`; infinite when `lrv = 0` and `mean(d) != 0`.
    #[serde(with = "finite_or_null")]
    pub t_stat: f64,
    pub mean_diff: f64,
    pub lrv: f64,
    pub infinite: bool,
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Diebold–Mariano test on `d_t = loss_a_t - loss_b_t` with a Newey–West
/// (Bartlett, `floor(T^(1/3))` lags) long-run variance.
pub fn dm_test(loss_a: &[f64], loss_b: &[f64]) -> Result<DmResult> {
    if loss_a.len() != loss_b.len() {
        return Err(Error::validation("loss series lengths differ"));
    }
    let n = loss_a.len();
    if n < 30 {
        return Err(Error::validation(format!("need at least 30 losses, got {n}")));
    }
    let d: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    let dbar = mean(&d);
    let lags = (n as f64).cbrt().floor() as usize;
    let dev: Vec<f64> = d.iter().map(|x| x - dbar).collect();
    let autocov = |l: usize| dev[l..].iter().zip(&dev).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let mut lrv = autocov(0);
    for l in 1..=lags {
        lrv += 2.0 * (1.0 - l as f64 / (lags + 1) as f64) * autocov(l);
    }
    let lrv = lrv.max(0.0);
    if dbar == 0.0 {
        return Ok(DmResult {
            t_stat: 0.0,
            mean_diff: 0.0,
            lrv,
            infinite: false,
        });
    }
    if lrv == 0.0 {
        return Ok(DmResult {
            t_stat: dbar.signum() * f64::INFINITY,
            mean_diff: dbar,
            lrv,
            infinite: true,
        });
    }
    Ok(DmResult {
        t_stat: dbar / (lrv / n as f64).sqrt(),
        mean_diff: dbar,
        lrv,
        infinite: false,
    })
}

/// Per-model out-of-sample summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub label: String,
    pub spec: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub avg_loss: Option<f64>,
    pub dq: Option<GofResult>,
    pub des: Option<GofResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gof_error: Option<String>,
    /// 1 is the lowest average loss.
    pub rank: Option<usize>,
    pub fitted: Option<FittedModel>,
    /// Out-of-sample forecasts, aligned with `y[in_sample_end..]`.
    pub path: Option<RiskPath>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub alpha: f64,
    pub in_sample: usize,
    pub out_of_sample: usize,
    pub models: Vec<ModelReport>,
    /// `dm[i][j]`: t-statistic of row model loss minus column model loss;
    /// positive means the column model is better. `None` if either model
    /// failed or the statistic is infinite.
    pub dm: Vec<Vec<Option<f64>>>,
}

fn evaluate_model(
    y: &[f64],
    r: usize,
    spec: ModelSpec,
    alpha: AlphaLevel,
    cfg: &EstimationConfig,
) -> ModelReport {
    let mut rep = ModelReport {
        label: spec.label(),
        spec,
        error: None,
        avg_loss: None,
        dq: None,
        des: None,
        gof_error: None,
        rank: None,
        fitted: None,
        path: None,
    };
    let run = || -> Result<(FittedModel, RiskPath)> {
        let fitted = estimate_model(&y[..r], spec, alpha, cfg)?;
        let warm = fitted.warmup();
        if warm > r {
            return Err(Error::validation(format!(
                "{} needs {warm} observations before the first forecast but the in-sample period has {r}",
                spec.label()
            )));
        }
        let (mut v, mut e) = fitted.extended(y, alpha)?;
        v.pop();
        e.pop();
        let path = RiskPath::new(v[r - warm..].to_vec(), e[r - warm..].to_vec())?;
        Ok((fitted, path))
    };
    match run() {
        Ok((fitted, path)) => {
            let y_oos = &y[r..];
            match average_loss_raw(y_oos, path.v(), path.e(), alpha.value(), Smoothing::Exact) {
                Ok(l) => rep.avg_loss = Some(l),
                Err(e) => rep.error = Some(e.to_string()),
            }
            let gof = std_residuals(y_oos, &path, alpha).and_then(|res| {
                Ok((dq_test(&res, &path, GofKind::Dq)?, dq_test(&res, &path, GofKind::Des)?))
            });
            match gof {
                Ok((dq, des)) => {
                    rep.dq = Some(dq);
                    rep.des = Some(des);
                }
                Err(e) => rep.gof_error = Some(e.to_string()),
            }
            rep.fitted = Some(fitted);
            rep.path = Some(path);
        }
        Err(e) => rep.error = Some(e.to_string()),
    }
    rep
}

/// Fits every model on `y[..in_sample_end]`, filters the whole sample with the
/// frozen parameters, and evaluates forecasts on the remainder.
pub fn oos_harness(
    y: &[f64],
    split: SampleSplit,
    models: &[ModelSpec],
    alpha: AlphaLevel,
    cfg: &EstimationConfig,
) -> Result<BacktestReport> {
    let r = split.in_sample_end;
    if r == 0 || r >= y.len() {
        return Err(Error::validation(format!(
            "in-sample end {r} must lie strictly inside the {}-observation sample",
            y.len()
        )));
    }
    if models.is_empty() {
        return Err(Error::validation("no models to evaluate"));
    }
    let mut reports: Vec<ModelReport> = models
        .par_iter()
        .map(|&spec| evaluate_model(y, r, spec, alpha, cfg))
        .collect();

    let mut order: Vec<usize> = (0..reports.len()).filter(|&i| reports[i].avg_loss.is_some()).collect();
    order.sort_by(|&a, &b| {
        reports[a]
            .avg_loss
            .unwrap()
            .total_cmp(&reports[b].avg_loss.unwrap())
            .then(a.cmp(&b))
    });
    for (k, &i) in order.iter().enumerate() {
        reports[i].rank = Some(k + 1);
    }

    let y_oos = &y[r..];
    let losses: Vec<Option<Vec<f64>>> = reports
        .iter()
        .map(|m| {
            m.avg_loss
                .and(m.path.as_ref())
                .map(|p| loss_series(y_oos, p.v(), p.e(), alpha.value()))
        })
        .collect();
    let k = reports.len();
    let mut dm = vec![vec![None; k]; k];
    for i in 0..k {
        for j in 0..k {
            if let (Some(a), Some(b)) = (&losses[i], &losses[j]) {
                dm[i][j] = if i == j {
                    Some(0.0)
                } else {
                    dm_test(a, b).ok().filter(|d| !d.infinite).map(|d| d.t_stat)
                };
            }
        }
    }
    Ok(BacktestReport {
        alpha: alpha.value(),
        in_sample: r,
        out_of_sample: y.len() - r,
        models: reports,
        dm,
    })
}

impl BacktestReport {
    /// Average-loss table with calibration p-values and ranks, then the DM matrix.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "Out-of-sample evaluation, alpha = {}, in-sample {} obs, out-of-sample {} obs",
            self.alpha, self.in_sample, self.out_of_sample
        );
        let _ = writeln!(out, "{:<10}{:>12}{:>10}{:>10}{:>6}", "Model", "Avg loss", "DQ p", "DES p", "Rank");
        let f3 = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
        for m in &self.models {
            let _ = write!(
                out,
                "{:<10}{:>12}{:>10}{:>10}{:>6}",
                m.label,
                m.avg_loss.map_or("failed".to_string(), |v| format!("{v:.4}")),
                f3(m.dq.as_ref().map(|g| g.p_value)),
                f3(m.des.as_ref().map(|g| g.p_value)),
                m.rank.map_or("-".to_string(), |r| r.to_string())
            );
            if let Some(e) = &m.error {
                let _ = write!(out, "  ({e})");
            }
            out.push('\n');
        }
        out.push_str("\nDiebold-Mariano t-statistics (row loss minus column loss; positive favours the column model)\n");
        let _ = write!(out, "{:<10}", "");
        for m in &self.models {
            let _ = write!(out, "{:>9}", m.label);
        }
        out.push('\n');
        for (i, m) in self.models.iter().enumerate() {
            let _ = write!(out, "{:<10}", m.label);
            for j in 0..self.models.len() {
                let cell = self.dm[i][j].map_or("-".to_string(), |t| format!("{t:.2}"));
                let _ = write!(out, "{cell:>9}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{rng_for, simulate_gas1f};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn al(a: f64) -> AlphaLevel {
        AlphaLevel::new(a).unwrap()
    }

    #[test]
    fn residuals_never_hit() {
        let path = RiskPath::new(vec![-1.0; 5], vec![-2.0; 5]).unwrap();
        let r = std_residuals(&[0.0; 5], &path, al(0.05)).unwrap();
        assert!(r.lam_v_s.iter().all(|&x| x == -0.05));
        assert!(r.lam_e_s.iter().all(|&x| x == -1.0));
        assert!(std_residuals(&[0.0; 4], &path, al(0.05)).is_err());
    }

    #[test]
    fn residuals_single_hit() {
        let path = RiskPath::new(vec![-1.0, -1.0], vec![-2.0, -1.5]).unwrap();
        let r = std_residuals(&[0.0, -1.5], &path, al(0.05)).unwrap();
        assert_eq!(r.lam_v_s[1], 0.95);
        assert!((r.lam_e_s[1] - (1.0 / 0.05 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn dm_examples() {
        let a: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let r = dm_test(&a, &a).unwrap();
        assert_eq!(r.t_stat, 0.0);
        let b: Vec<f64> = (0..100).map(|i| (i as f64 * 0.7).cos()).collect();
        assert_eq!(dm_test(&a, &b).unwrap().t_stat, -dm_test(&b, &a).unwrap().t_stat);
        let shifted_a: Vec<f64> = a.iter().map(|x| x + 3.0).collect();
        let shifted_b: Vec<f64> = b.iter().map(|x| x + 3.0).collect();
        let t1 = dm_test(&a, &b).unwrap().t_stat;
        let t2 = dm_test(&shifted_a, &shifted_b).unwrap().t_stat;
        assert!((t1 - t2).abs() < 1e-9);
        let ints: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let c: Vec<f64> = ints.iter().map(|x| x + 1.0).collect();
        let r = dm_test(&c, &ints).unwrap();
        assert!(r.infinite && r.t_stat == f64::INFINITY);
        assert!(dm_test(&a[..10], &a[..10]).is_err());
    }

    #[test]
    fn dm_clt_scale() {
        let mut rng = rng_for(8, 0);
        let d: Vec<f64> = (0..10_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                0.1 + z
            })
            .collect();
        let zeros = vec![0.0; d.len()];
        let t = dm_test(&d, &zeros).unwrap().t_stat;
        assert!((t - 10.0).abs() < 1.5, "{t}");
    }

    #[test]
    fn dq_size_on_iid_hits() {
        let path = RiskPath::new(vec![-1.645; 1000], vec![-2.063; 1000]).unwrap();
        let mut rej = 0;
        for s in 0..200 {
            let mut rng = rng_for(100, s);
            let lam_v_s: Vec<f64> = (0..1000)
                .map(|_| if rng.random::<f64>() < 0.05 { 0.95 } else { -0.05 })
                .collect();
            let res = StdResiduals {
                lam_e_s: lam_v_s.clone(),
                lam_v_s,
            };
            // constant v makes the intercept and v_t collinear
            assert!(dq_test(&res, &path, GofKind::Dq).is_err());
            let varying = RiskPath::new(
                (0..1000).map(|i| -1.5 - 0.3 * ((i as f64) * 0.1).sin().abs()).collect(),
                vec![-2.5; 1000],
            )
            .unwrap();
            if dq_test(&res, &varying, GofKind::Dq).unwrap().p_value < 0.05 {
                rej += 1;
            }
        }
        let rate = rej as f64 / 200.0;
        assert!((0.0..=0.12).contains(&rate), "{rate}");
    }

    #[test]
    fn dq_degenerate_residuals() {
        let path = RiskPath::new((0..100).map(|i| -1.0 - 0.01 * i as f64).collect(), vec![-3.0; 100]).unwrap();
        let res = StdResiduals {
            lam_v_s: vec![0.0; 100],
            lam_e_s: vec![0.0; 100],
        };
        assert!(matches!(dq_test(&res, &path, GofKind::Dq), Err(Error::Singular(_))));
    }

    #[test]
    fn harness_two_identical_models() {
        let (y, _) = simulate_gas1f(0.99, -0.01, al(0.05), 1500, 3, 0, None).unwrap();
        let cfg = EstimationConfig::default();
        let models = [ModelSpec::Rolling { window: 250 }, ModelSpec::Rolling { window: 250 }];
        let rep = oos_harness(&y, SampleSplit::new(750), &models, al(0.05), &cfg).unwrap();
        assert_eq!(rep.dm[0][1], Some(0.0));
        assert_eq!(rep.dm[1][0], Some(0.0));
        assert_eq!(rep.models[0].avg_loss, rep.models[1].avg_loss);
        let p = rep.models[0].path.as_ref().unwrap();
        let recomputed = average_loss_raw(&y[750..], p.v(), p.e(), 0.05, Smoothing::Exact).unwrap();
        assert_eq!(Some(recomputed), rep.models[0].avg_loss);
        let json = serde_json::to_string(&rep).unwrap();
        let back: BacktestReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
        assert!(rep.to_text().contains("RW-250"));
    }

    #[test]
    fn harness_reports_failures_inline() {
        let (y, _) = simulate_gas1f(0.99, -0.01, al(0.05), 800, 3, 0, None).unwrap();
        let models = [ModelSpec::Rolling { window: 500 }, ModelSpec::Rolling { window: 125 }];
        let rep = oos_harness(&y, SampleSplit::new(300), &models, al(0.05), &EstimationConfig::default()).unwrap();
        assert!(rep.models[0].error.is_some());
        assert!(rep.models[1].avg_loss.is_some());
        assert_eq!(rep.models[1].rank, Some(1));
        assert_eq!(rep.dm[0][1], None);
    }
}
