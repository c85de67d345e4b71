//! Out-of-sample comparison of the ten forecasting models with goodness-of-fit
//! and Diebold-Mariano tests.

use fzrisk::backtest::oos_harness;
use fzrisk::estimate::EstimationConfig;
use fzrisk::models::ModelSpec;
use fzrisk::simulate::{simulate_dgp, DgpConfig};
use fzrisk::dist::Innovation;
use fzrisk::{AlphaLevel, SampleSplit};

fn main() -> fzrisk::Result<()> {
    let alpha = AlphaLevel::new(0.025)?;
    let dgp = DgpConfig { t: 3000, innovation: Innovation::SkewT { nu: 6.0, lambda: -0.3 }, ..DgpConfig::default() };
    let y = simulate_dgp(&dgp, alpha)?.returns.values().to_vec();
    let report = oos_harness(&y, SampleSplit::new(1500), &ModelSpec::backtest_set(), alpha, &EstimationConfig::default())?;
    print!("{}", report.to_text());
    Ok(())
}
