//! News impact curve of a fitted one-factor model: next-period VaR and ES as a
//! function of today's return.

use fzrisk::estimate::{fz_estimate, EstimationConfig};
use fzrisk::models::{news_impact_curve, ModelSpec};
use fzrisk::simulate::{simulate_dgp, DgpConfig};
use fzrisk::stats::mean;
use fzrisk::AlphaLevel;

fn main() -> fzrisk::Result<()> {
    let alpha = AlphaLevel::new(0.05)?;
    let y = simulate_dgp(&DgpConfig::default(), alpha)?.returns.values().to_vec();
    let fit = fz_estimate(&y, ModelSpec::Gas1f, alpha, &EstimationConfig::default())?;
    let path = fit.path(&y)?;
    let state = (mean(path.v()), mean(path.e()));
    let grid: Vec<f64> = (0..=20).map(|i| -5.0 + 0.5 * i as f64).collect();
    println!("state v={:.4} e={:.4}", state.0, state.1);
    for row in news_impact_curve(&fit.fitted, state, alpha, &grid)? {
        println!("{:>6.2} {:>9.4} {:>9.4}", row.y, row.v_next, row.e_next);
    }
    Ok(())
}
