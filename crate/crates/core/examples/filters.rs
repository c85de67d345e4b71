//! Runs the dynamic VaR/ES recursions on one simulated path.

use fzrisk::dist::normal_tail_pair;
use fzrisk::estimate::{fz_estimate, EstimationConfig};
use fzrisk::loss::Smoothing;
use fzrisk::models::{
    gas1f_filter, gas2f_filter, garch_filter, hybrid_filter, rolling_forecast, FittedModel, Gas1fParams, GarchParams,
    HybridParams, ModelSpec, RollingParams,
};
use fzrisk::simulate::{simulate_dgp, DgpConfig};
use fzrisk::{AlphaLevel, RiskPath};

fn show(name: &str, p: &RiskPath) {
    let n = p.len();
    println!("{name:<10} v[T-1]={:>8.4} e[T-1]={:>8.4}", p.v()[n - 1], p.e()[n - 1]);
}

fn main() -> fzrisk::Result<()> {
    let alpha = AlphaLevel::new(0.05)?;
    let sim = simulate_dgp(&DgpConfig { t: 1000, ..DgpConfig::default() }, alpha)?;
    let y = sim.returns.values();
    let tail = normal_tail_pair(alpha);

    let g1 = Gas1fParams { beta: 0.99, gamma: -0.01, a: -1.49, b: -2.089 };
    show("GAS-1F", &gas1f_filter(y, &g1, alpha, Smoothing::Exact)?);

    let g2 = fz_estimate(y, ModelSpec::Gas2f, alpha, &EstimationConfig::default())?;
    if let FittedModel::Gas2f { params, init } = g2.fitted {
        println!("{:<10} estimated {params:?}", "");
        show("GAS-2F", &gas2f_filter(y, &params, alpha, init, Smoothing::Exact)?);
    }

    let h = HybridParams { beta: 0.968, gamma: -0.011, delta: 0.018, tail: fzrisk::dist::TailPair::new(-2.443, -3.389)? };
    show("Hybrid", &hybrid_filter(y, &h, alpha, Smoothing::Exact)?);

    let gp = GarchParams { omega: 0.05, beta: 0.9, gamma: 0.05, tail };
    let (sigma, path) = garch_filter(y, &gp, None)?;
    show("GARCH", &path);
    println!("{:<10} sigma[T-1]={:.4}", "", sigma[sigma.len() - 1]);

    show("RW-250", &rolling_forecast(y, &RollingParams::new(250), alpha)?);
    show("truth", &sim.truth);
    Ok(())
}
