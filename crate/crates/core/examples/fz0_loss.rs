//! Evaluates the FZ0 loss, its gradient and the forcing variables for a few
//! forecasts, and shows that the true (VaR, ES) pair minimizes expected loss.

use fzrisk::dist::normal_tail_pair;
use fzrisk::loss::{fz0_gradient, fz0_loss, fz0_smoothed, forcing_vars, LossSample, Smoothing};
use fzrisk::AlphaLevel;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> fzrisk::Result<()> {
    let alpha = AlphaLevel::new(0.05)?;
    let s = LossSample::new(-3.0, -1.64, -2.06, alpha)?;
    println!("L(y=-3, v=-1.64, e=-2.06)      = {:.6}", fz0_loss(&s));
    println!("logistic tau=20                = {:.6}", fz0_smoothed(&s, Smoothing::logistic(20.0)?));
    let (gv, ge) = fz0_gradient(&s)?;
    println!("gradient (dL/dv, dL/de)        = ({gv:.4}, {ge:.4})");
    let f = forcing_vars(&s, Smoothing::Exact);
    println!("forcing (lambda_v, lambda_e)   = ({:.4}, {:.4})", f.lambda_v, f.lambda_e);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let y: Vec<f64> = (0..200_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let truth = normal_tail_pair(alpha);
    let avg = |v: f64, e: f64| -> fzrisk::Result<f64> {
        let mut acc = 0.0;
        for &yi in &y {
            acc += fz0_loss(&LossSample::new(yi, v, e, alpha)?);
        }
        Ok(acc / y.len() as f64)
    };
    println!("\nexpected loss under N(0,1), alpha = 0.05");
    for (v, e) in [(truth.a, truth.b), (truth.a + 0.2, truth.b), (truth.a, truth.b - 0.3), (-1.0, -1.5)] {
        println!("  v={v:>7.4} e={e:>7.4}  mean loss {:.5}", avg(v, e)?);
    }
    Ok(())
}
