//! Standardized innovation distributions and their `(VaR, ES)` tail pairs.
//!
//! A tail pair `(a, b)` holds the α-quantile `a` of a mean-zero, unit-variance
//! variate and its tail mean `b = E[η | η <= a]`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::optim::NelderMead;
use crate::quad;
use crate::series::AlphaLevel;
use crate::stats::{norm_pdf, norm_quantile, sorted_tail_pair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPair {
    pub a: f64,
    pub b: f64,
}

impl TailPair {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b > a {
            return Err(Error::validation(format!("invalid tail pair ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    /// `a / b`, the VaR-to-ES ratio.
    pub fn ratio(&self) -> f64 {
        self.a / self.b
    }
}

pub fn normal_tail_pair(alpha: AlphaLevel) -> TailPair {
    let a = norm_quantile(alpha.value());
    TailPair {
        a,
        b: -norm_pdf(a) / alpha.value(),
    }
}

/// Hansen (1994) standardized skew-t parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewTParams {
    pub nu: f64,
    pub lambda: f64,
}

/// Hansen skew-t with precomputed constants.
#[derive(Debug, Clone)]
pub struct SkewT {
    params: SkewTParams,
    a: f64,
    b: f64,
    ln_c: f64,
    student: StudentsT,
}

impl SkewT {
    pub fn new(params: SkewTParams) -> Result<Self> {
        let SkewTParams { nu, lambda } = params;
        if !(nu > 2.0 && nu.is_finite()) {
            return Err(Error::domain(format!("skew-t degrees of freedom must exceed 2, got {nu}")));
        }
        if !(lambda > -1.0 && lambda < 1.0) {
            return Err(Error::domain(format!("skew-t skewness must lie in (-1, 1), got {lambda}")));
        }
        let ln_c = ln_gamma((nu + 1.0) / 2.0)
            - 0.5 * (std::f64::consts::PI * (nu - 2.0)).ln()
            - ln_gamma(nu / 2.0);
        let c = ln_c.exp();
        let a = 4.0 * lambda * c * (nu - 2.0) / (nu - 1.0);
        let b = (1.0 + 3.0 * lambda * lambda - a * a).sqrt();
        let student = StudentsT::new(0.0, 1.0, nu).map_err(|e| Error::domain(e.to_string()))?;
        Ok(Self {
            params,
            a,
            b,
            ln_c,
            student,
        })
    }

    pub fn params(&self) -> SkewTParams {
        self.params
    }

    /// Point where the density switches between the two half scales.
    pub fn mode_split(&self) -> f64 {
        -self.a / self.b
    }

    fn half_scale(&self, z: f64) -> f64 {
        if z < self.mode_split() {
            1.0 - self.params.lambda
        } else {
            1.0 + self.params.lambda
        }
    }

    pub fn ln_pdf(&self, z: f64) -> f64 {
        let nu = self.params.nu;
        let u = (self.b * z + self.a) / self.half_scale(z);
        self.b.ln() + self.ln_c - 0.5 * (nu + 1.0) * (u * u / (nu - 2.0)).ln_1p()
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.ln_pdf(z).exp()
    }

    pub fn cdf(&self, z: f64) -> f64 {
        let nu = self.params.nu;
        let lam = self.params.lambda;
        let k = (nu / (nu - 2.0)).sqrt();
        if z < self.mode_split() {
            let x = (self.b * z + self.a) / (1.0 - lam) * k;
            (1.0 - lam) * self.student.cdf(x)
        } else {
            let x = (self.b * z + self.a) / (1.0 + lam) * k;
            0.5 * (1.0 - lam) + (1.0 + lam) * (self.student.cdf(x) - 0.5)
        }
    }

    /// Inverse CDF, polished by Newton steps to `|cdf(q) - p| <= 1e-12`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("probability {p} outside (0, 1)")));
        }
        let mut z = self.quantile_closed_form(p);
        for _ in 0..50 {
            let err = self.cdf(z) - p;
            if err.abs() <= 1e-12 {
                break;
            }
            let d = self.pdf(z);
            if !(d > 0.0) {
                break;
            }
            z -= err / d;
        }
        Ok(z)
    }

    fn quantile_closed_form(&self, p: f64) -> f64 {
        let nu = self.params.nu;
        let lam = self.params.lambda;
        let k = ((nu - 2.0) / nu).sqrt();
        let lower = 0.5 * (1.0 - lam);
        let (scale, q) = if p < lower {
            (1.0 - lam, p / (1.0 - lam))
        } else {
            (1.0 + lam, 0.5 + (p - lower) / (1.0 + lam))
        };
        let x = self.student.inverse_cdf(q);
        (scale * x * k - self.a) / self.b
    }

    /// Tail pair with `b` from adaptive quadrature of `z f(z)` below the quantile.
    pub fn tail_pair(&self, alpha: AlphaLevel) -> Result<TailPair> {
        let al = alpha.value();
        let a = self.quantile(al)?;
        let split = self.mode_split();
        let tol = 1e-8;
        let integral = if a > split {
            quad::integrate_to(|z| z * self.pdf(z), split, tol / 2.0)?
                + quad::integrate(|z| z * self.pdf(z), split, a, tol / 2.0)?
        } else {
            quad::integrate_to(|z| z * self.pdf(z), a, tol)?
        };
        let b = integral / al;
        if !(b < a) {
            return Err(Error::Numeric {
                t: 0,
                msg: format!("tail mean {b} not below quantile {a}"),
            });
        }
        Ok(TailPair { a, b })
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random_range(f64::EPSILON..1.0);
        self.quantile_closed_form(u)
    }
}

pub fn skewt_tail_pair(alpha: AlphaLevel, params: SkewTParams) -> Result<TailPair> {
    SkewT::new(params)?.tail_pair(alpha)
}

/// Empirical tail pair: `a` is the order statistic of rank `ceil(n α)`, `b` the
/// mean of observations at or below `a`.
pub fn edf_tail_pair(residuals: &[f64], alpha: AlphaLevel) -> Result<TailPair> {
    let n = residuals.len();
    if (n as f64) * alpha.value() < 1.0 - 1e-9 {
        return Err(Error::validation(format!(
            "{n} residuals too few for alpha {}",
            alpha.value()
        )));
    }
    if residuals.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("non-finite residual"));
    }
    let mut s = residuals.to_vec();
    s.sort_by(f64::total_cmp);
    let (a, b) = sorted_tail_pair(&s, alpha.value());
    Ok(TailPair { a, b })
}

/// Maximum likelihood fit of Hansen's skew-t to standardized residuals.
pub fn fit_skewt(z: &[f64]) -> Result<SkewTParams> {
    if z.len() < 20 {
        return Err(Error::validation("need at least 20 residuals for a skew-t fit"));
    }
    // internal coordinates: nu = 2.05 + exp(u), lambda = tanh(w)
    let to_params = |x: &[f64]| SkewTParams {
        nu: (2.05 + x[0].exp()).min(500.0),
        lambda: x[1].tanh().clamp(-0.995, 0.995),
    };
    let objective = |x: &[f64]| -> f64 {
        let Ok(d) = SkewT::new(to_params(x)) else {
            return 1e10;
        };
        let ll: f64 = z.iter().map(|&v| d.ln_pdf(v)).sum();
        if ll.is_finite() {
            -ll / z.len() as f64
        } else {
            1e10
        }
    };
    let nm = NelderMead::default().with_tolerances(1e-10, 1e-7).with_max_evals(4000);
    let res = nm.minimize(objective, &[(8.0f64 - 2.05).ln(), 0.0], &[0.5, 0.2]);
    Ok(to_params(&res.x))
}

/// Innovation law for simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Innovation {
    Normal,
    SkewT { nu: f64, lambda: f64 },
}

impl Innovation {
    pub fn tail_pair(&self, alpha: AlphaLevel) -> Result<TailPair> {
        match *self {
            Innovation::Normal => Ok(normal_tail_pair(alpha)),
            Innovation::SkewT { nu, lambda } => skewt_tail_pair(alpha, SkewTParams { nu, lambda }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Innovation::SkewT { nu, lambda } = *self {
            SkewT::new(SkewTParams { nu, lambda })?;
        }
        Ok(())
    }
}

/// How a location-scale GARCH model obtains its standardized tail pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSource {
    Normal,
    SkewT,
    Edf,
}

impl TailSource {
    /// Tail pair implied by this source for a set of standardized residuals.
    pub fn tail_pair(self, residuals: &[f64], alpha: AlphaLevel) -> Result<TailPair> {
        match self {
            TailSource::Normal => Ok(normal_tail_pair(alpha)),
            TailSource::Edf => edf_tail_pair(residuals, alpha),
            TailSource::SkewT => skewt_tail_pair(alpha, fit_skewt(residuals)?),
        }
    }
}
