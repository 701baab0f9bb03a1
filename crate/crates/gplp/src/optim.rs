//! Small dense BFGS minimizer with backtracking line search, used for
//! hyperparameter fitting in log-space. Deterministic: no randomness, no
//! time-dependent behavior.

use nalgebra::{DMatrix, DVector};

/// Outcome of one minimization run.
#[derive(Debug, Clone)]
pub(crate) struct MinimizeResult {
    pub x: DVector<f64>,
    pub f: f64,
    pub evals: usize,
    /// True when the objective change on an accepted step fell below `ftol`.
    pub converged: bool,
}

pub(crate) struct Options {
    pub max_iters: usize,
    /// Relative tolerance on the objective change between accepted iterates.
    pub ftol: f64,
}

/// Minimize `f` with gradient `grad` starting from `x0`.
///
/// Objective values of infinity are treated as "outside the feasible
/// region": the line search backtracks away from them. The BFGS update is
/// skipped whenever the curvature condition fails, which keeps the inverse
/// Hessian approximation positive definite.
pub(crate) fn bfgs<F, G>(x0: DVector<f64>, f: F, grad: G, opts: &Options) -> MinimizeResult
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    let mut evals = 1;
    let mut converged = false;

    if !fx.is_finite() {
        return MinimizeResult {
            x,
            f: fx,
            evals,
            converged: false,
        };
    }

    let mut g = grad(&x);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut first_update = true;

    // Keep trial steps at a bounded length in parameter space; uncapped
    // first steps along a steep gradient waste many backtracks.
    const MAX_STEP_NORM: f64 = 1.0;

    for _ in 0..opts.max_iters {
        let mut dir = -(&h * &g);
        // Fall back to steepest descent if the direction has gone bad.
        if dir.dot(&g) >= 0.0 || !dir.iter().all(|v| v.is_finite()) {
            h = DMatrix::identity(n, n);
            first_update = true;
            dir = -g.clone();
        }
        let dir_norm = dir.norm();
        if dir_norm == 0.0 {
            converged = true;
            break;
        }

        // Backtracking Armijo line search.
        let g_dot_d = g.dot(&dir);
        let mut step = (MAX_STEP_NORM / dir_norm).min(1.0);
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &x + &dir * step;
            let fc = f(&cand);
            evals += 1;
            if fc.is_finite() && fc <= fx + 1e-4 * step * g_dot_d {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // No descent step found: converged as far as this scheme can go.
            converged = true;
            break;
        };

        let g_new = grad(&x_new);
        let s = &x_new - &x;
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            if first_update {
                // Shanno-Phua scaling: start from a Hessian of the right
                // magnitude so the next direction is well sized.
                let scale = sy / yv.dot(&yv);
                if scale.is_finite() && scale > 0.0 {
                    h = DMatrix::identity(n, n) * scale;
                }
                first_update = false;
            }
            // Standard BFGS inverse update.
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // H += (sy + yHy) rho^2 s s^T - rho (H y s^T + s (H y)^T)
            for i in 0..n {
                for j in 0..n {
                    h[(i, j)] +=
                        (sy + yhy) * rho * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }

        let df = fx - f_new;
        x = x_new;
        g = g_new;
        fx = f_new;
        if df.abs() <= opts.ftol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
    }

    MinimizeResult {
        x,
        f: fx,
        evals,
        converged,
    }
}
