//! A small Monte Carlo study comparing FZ, QMLE and CAViaR estimators.

use fzrisk::simulate::{run_mc_study, DgpConfig, McConfig};

fn main() -> fzrisk::Result<()> {
    let mc = McConfig { replications: 10, alphas: vec![0.05], t_list: vec![1000], multistart: 1, ..McConfig::default() };
    let report = run_mc_study(&mc, &DgpConfig::default())?;
    print!("{}", report.to_text());
    Ok(())
}
