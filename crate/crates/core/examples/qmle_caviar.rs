//! Gaussian QMLE GARCH with three tail-pair choices, and asymmetric-slope CAViaR.

use fzrisk::dist::TailSource;
use fzrisk::estimate::{caviar_estimate, locscale_result, qmle_garch, EstimationConfig};
use fzrisk::simulate::{simulate_dgp, DgpConfig};
use fzrisk::dist::Innovation;
use fzrisk::AlphaLevel;

fn main() -> fzrisk::Result<()> {
    let alpha = AlphaLevel::new(0.05)?;
    let dgp = DgpConfig { innovation: Innovation::SkewT { nu: 5.0, lambda: -0.5 }, ..DgpConfig::default() };
    let sim = simulate_dgp(&dgp, alpha)?;
    let y = sim.returns.values();

    let q = qmle_garch(y)?;
    println!("QMLE {:?} = {:.4?}", q.result.names, q.result.theta_hat);
    for src in [TailSource::Normal, TailSource::SkewT, TailSource::Edf] {
        let r = locscale_result(y, src, alpha)?;
        let (v, e) = r.fitted.forecast_next(y, alpha)?;
        println!("  tail {src:?}: next VaR {v:.4}, ES {e:.4}");
    }
    let c = caviar_estimate(y, alpha, &EstimationConfig::default())?;
    println!("CAViaR {:?} = {:.4?}", c.names, c.theta_hat);
    Ok(())
}
