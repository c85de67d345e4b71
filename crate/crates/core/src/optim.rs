//! Derivative-free Nelder–Mead simplex minimizer.

#[derive(Debug, Clone)]
pub struct NelderMead {
    tol_f: f64,
    tol_x: f64,
    max_evals: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            tol_f: 1e-8,
            tol_x: 1e-6,
            max_evals: 5000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

impl NelderMead {
    pub fn with_tolerances(mut self, tol_f: f64, tol_x: f64) -> Self {
        self.tol_f = tol_f;
        self.tol_x = tol_x;
        self
    }

    pub fn with_max_evals(mut self, n: usize) -> Self {
        self.max_evals = n;
        self
    }

    /// Minimizes `f` from `x0`, building the initial simplex with per-coordinate `step`.
    ///
    /// Non-finite objective values are treated as `+inf`.
    pub fn minimize<F: Fn(&[f64]) -> f64>(&self, f: F, x0: &[f64], step: &[f64]) -> Minimum {
        let n = x0.len();
        assert_eq!(n, step.len(), "step length must match dimension");
        let eval = |x: &[f64]| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut evals = 0usize;
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), eval(x0)));
        evals += 1;
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += if step[i] != 0.0 { step[i] } else { 0.05 };
            let fx = eval(&x);
            evals += 1;
            simplex.push((x, fx));
        }

        let mut converged = false;
        while evals < self.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let f_best = simplex[0].1;
            let f_worst = simplex[n].1;
            let spread_f = (f_worst - f_best).abs();
            let spread_x = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread_f <= self.tol_f && spread_x <= self.tol_x {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let xr = along(-1.0);
            let fr = eval(&xr);
            evals += 1;
            if fr < f_best {
                let xe = along(-2.0);
                let fe = eval(&xe);
                evals += 1;
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < f_worst {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < f_worst.min(fr) {
                simplex[n] = (xc, fc);
                continue;
            }
            // shrink toward the best vertex
            let best = simplex[0].0.clone();
            for (x, fx) in simplex.iter_mut().skip(1) {
                for (xi, bi) in x.iter_mut().zip(&best) {
                    *xi = bi + 0.5 * (*xi - bi);
                }
                *fx = eval(x);
                evals += 1;
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, f) = simplex.swap_remove(0);
        Minimum {
            x,
            f,
            evals,
            converged,
        }
    }
}
