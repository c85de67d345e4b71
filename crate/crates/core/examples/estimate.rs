//! Estimates the FZ-loss models on simulated GARCH data and prints parameters
//! with sandwich standard errors.

use fzrisk::estimate::{fz_estimate, EstimationConfig};
use fzrisk::models::ModelSpec;
use fzrisk::simulate::{simulate_dgp, DgpConfig};
use fzrisk::AlphaLevel;

fn main() -> fzrisk::Result<()> {
    let alpha = AlphaLevel::new(0.05)?;
    let sim = simulate_dgp(&DgpConfig::default(), alpha)?;
    let y = sim.returns.values();
    let cfg = EstimationConfig { omega: 0.05, ..EstimationConfig::default() };
    for spec in [ModelSpec::Gas1f, ModelSpec::GarchFz, ModelSpec::Hybrid, ModelSpec::Gas2f] {
        let r = fz_estimate(y, spec, alpha, &cfg)?;
        println!("{} (avg loss {:.4}, converged {})", spec.label(), r.avg_loss, r.converged);
        for (i, name) in r.names.iter().enumerate() {
            match r.std_error(name) {
                Some(se) => println!("  {name:<6} {:>9.4}  ({se:.4})", r.theta_hat[i]),
                None => println!("  {name:<6} {:>9.4}", r.theta_hat[i]),
            }
        }
    }
    Ok(())
}
