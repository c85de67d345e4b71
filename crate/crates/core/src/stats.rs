//! Small numeric helpers shared across modules.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance (divisor `n - 1`).
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

/// Sample kurtosis `m4 / m2^2` (not excess).
pub fn kurtosis(x: &[f64]) -> f64 {
    let m = mean(x);
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2)
}

pub fn median(x: &[f64]) -> f64 {
    let mut s: Vec<f64> = x.iter().copied().filter(|v| !v.is_nan()).collect();
    if s.is_empty() {
        return f64::NAN;
    }
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Neumaier-compensated sum in index order.
pub fn compensated_sum(x: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in x {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Upper tail probability of a chi-square variate.
pub fn chi2_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let d = ChiSquared::new(dof).expect("positive degrees of freedom");
    (1.0 - d.cdf(x)).clamp(0.0, 1.0)
}

/// One-based rank `ceil(n * alpha)` clamped to `[1, n]`.
pub fn tail_rank(n: usize, alpha: f64) -> usize {
    // guard against n*alpha landing a hair above an integer
    let r = (n as f64 * alpha - 1e-9).ceil() as usize;
    r.clamp(1, n)
}

/// `(quantile, mean of values <= quantile)` from an ascending-sorted slice.
pub fn sorted_tail_pair(sorted: &[f64], alpha: f64) -> (f64, f64) {
    let k = tail_rank(sorted.len(), alpha);
    let a = sorted[k - 1];
    let mut sum = 0.0;
    let mut cnt = 0usize;
    for &x in sorted {
        if x <= a {
            sum += x;
            cnt += 1;
        } else {
            break;
        }
    }
    (a, sum / cnt as f64)
}
