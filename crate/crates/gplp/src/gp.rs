//! Exact Gaussian-process machinery: marginal likelihood, hyperparameter
//! fitting, and posterior inference over the low- and high-frequency latent
//! components.
//!
//! The observation model is a zero-mean GP with square-exponential kernel
//! plus independent Gaussian noise. Because the spectral split `K = K_low +
//! K_high` sums back to the SE kernel, training never sees the cutoff
//! frequency: the fit is a plain SE-GP maximum-likelihood problem over
//! `(sigma2, lengthscale, noise_var)`. Filtering is then a posterior over
//! the chosen component, whose cross-covariance with the observations equals
//! that component's own kernel.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use thiserror::Error;

use crate::kernels::{self, BandLimitedKernelSpec, KernelError, SeHyperparams};
use crate::optim;
use crate::timeseries::TimeSeries;

/// Base diagonal jitter as a fraction of `sigma2`.
const JITTER_BASE: f64 = 1e-8;
/// Largest jitter fraction tried before giving up.
const JITTER_MAX: f64 = 1e-4;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("need at least {need} observations, got {got}")]
    TooFewObservations { got: usize, need: usize },
    #[error(
        "observation covariance is numerically indefinite even with jitter \
         {max_jitter:e} * sigma2 on the diagonal (n = {n})"
    )]
    Conditioning { max_jitter: f64, n: usize },
    #[error("query times must be finite (index {0})")]
    NonFiniteQuery(usize),
    #[error("no restart produced a finite likelihood; initial values: {diagnostics}")]
    FitFailed { diagnostics: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Which latent component a posterior targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Low,
    High,
}

/// Fit strategy knobs. The defaults make `fit` deterministic: restart
/// starting points come from a fixed low-discrepancy sequence scaled by data
/// statistics, every restart runs a short probe, and the most promising
/// `continue_top` probes are polished to `nll_tol`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    /// Number of restart starting points.
    pub restarts: usize,
    /// Relative tolerance on the likelihood change at convergence.
    pub nll_tol: f64,
    /// Iteration cap for the polish stage.
    pub max_iters: usize,
    /// Iterations spent probing each restart before ranking.
    pub probe_iters: usize,
    /// How many probes continue to full convergence.
    pub continue_top: usize,
    /// Run restarts on the rayon pool. The result is identical either way;
    /// ties are broken by restart index.
    pub parallel: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            restarts: 8,
            nll_tol: 1e-8,
            max_iters: 120,
            probe_iters: 6,
            continue_top: 2,
            parallel: true,
        }
    }
}

/// Outcome of hyperparameter fitting.
///
/// `nll` is the negative log marginal likelihood of the mean-centered
/// observations at `params` (fitting removes the empirical mean first; the
/// mean is added back to low-component posteriors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(flatten)]
    pub params: SeHyperparams,
    pub nll: f64,
    pub restarts_tried: u32,
    pub converged: bool,
}

/// Posterior of one latent component on a query grid: mean, marginal
/// variance, and (on request) the full covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEstimate {
    pub query_times: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub full_cov: Option<DMatrix<f64>>,
}

impl PosteriorEstimate {
    pub fn std(&self) -> Vec<f64> {
        self.variance.iter().map(|v| v.sqrt()).collect()
    }

    /// Write `time,mean,std,lower95,upper95` CSV, the band at 1.96 sigma.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,mean,std,lower95,upper95")?;
        for i in 0..self.query_times.len() {
            let s = self.variance[i].sqrt();
            writeln!(
                w,
                "{},{},{},{},{}",
                self.query_times[i],
                self.mean[i],
                s,
                self.mean[i] - 1.96 * s,
                self.mean[i] + 1.96 * s
            )?;
        }
        Ok(())
    }
}

/// Observation covariance `SE(t, t) + noise_var I + jitter I`, with the
/// jitter escalated from `1e-8 sigma2` by factors of ten until the matrix
/// admits a Cholesky factorization (at most `1e-4 sigma2`).
pub fn observation_cov(times: &[f64], p: &SeHyperparams) -> Result<DMatrix<f64>, GpError> {
    let base = se_gram(times, p);
    let (_, jitter) = factor_with_jitter(&base, p.sigma2, times.len())?;
    let mut m = base;
    for i in 0..times.len() {
        m[(i, i)] += jitter * p.sigma2;
    }
    Ok(m)
}

/// Negative log marginal likelihood of the observations under the SE model:
/// `0.5 log|S| + 0.5 y' S^-1 y + (n/2) log 2pi`, computed by Cholesky.
pub fn nll(ts: &TimeSeries, p: &SeHyperparams) -> Result<f64, GpError> {
    let base = se_gram(ts.times(), p);
    let (chol, _) = factor_with_jitter(&base, p.sigma2, ts.len())?;
    let y = DVector::from_column_slice(ts.values());
    Ok(nll_from_chol(&chol, &y))
}

fn nll_from_chol(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> f64 {
    let alpha = chol.solve(y);
    let half_logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    half_logdet + 0.5 * y.dot(&alpha) + 0.5 * y.len() as f64 * LN_2PI
}

fn se_gram(times: &[f64], p: &SeHyperparams) -> DMatrix<f64> {
    let n = times.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernels::se_kernel(times[i] - times[j], p);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m[(i, i)] += p.noise_var;
    }
    m
}

fn factor_with_jitter(
    base: &DMatrix<f64>,
    sigma2: f64,
    n: usize,
) -> Result<(Cholesky<f64, Dyn>, f64), GpError> {
    let mut jitter = JITTER_BASE;
    loop {
        let mut m = base.clone();
        for i in 0..n {
            m[(i, i)] += jitter * sigma2;
        }
        if let Some(chol) = m.cholesky() {
            return Ok((chol, jitter));
        }
        jitter *= 10.0;
        if jitter > JITTER_MAX * 1.000_001 {
            return Err(GpError::Conditioning {
                max_jitter: JITTER_MAX,
                n,
            });
        }
    }
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

/// Workspace shared by every likelihood evaluation of one fit: squared time
/// differences and the centered observation vector.
struct FitWorkspace {
    d2: DMatrix<f64>,
    y: DVector<f64>,
}

/// One full likelihood evaluation at log-parameters `u = (ln sigma2, ln l,
/// ln noise_var)`, keeping the pieces the gradient needs.
struct EvalState {
    u: [f64; 3],
    nll: f64,
    corr: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl FitWorkspace {
    fn new(times: &[f64], y_centered: DVector<f64>) -> Self {
        let n = times.len();
        let mut d2 = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let d = times[i] - times[j];
                d2[(i, j)] = d * d;
                d2[(j, i)] = d * d;
            }
        }
        FitWorkspace { d2, y: y_centered }
    }

    fn evaluate(&self, u: &[f64; 3]) -> Option<EvalState> {
        let (sigma2, l, noise) = (u[0].exp(), u[1].exp(), u[2].exp());
        if !(sigma2.is_finite() && l.is_finite() && noise.is_finite()) || sigma2 == 0.0 || l == 0.0
        {
            return None;
        }
        let n = self.d2.nrows();
        let inv_2l2 = 0.5 / (l * l);
        let corr = self.d2.map(|d| (-d * inv_2l2).exp());
        let mut jitter = JITTER_BASE;
        let chol = loop {
            let mut m = &corr * sigma2;
            let diag_add = noise + jitter * sigma2;
            for i in 0..n {
                m[(i, i)] += diag_add;
            }
            match m.cholesky() {
                Some(c) => break c,
                None => {
                    jitter *= 10.0;
                    if jitter > JITTER_MAX * 1.000_001 {
                        return None;
                    }
                }
            }
        };
        let alpha = chol.solve(&self.y);
        let nll = {
            let half_logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
            half_logdet + 0.5 * self.y.dot(&alpha) + 0.5 * n as f64 * LN_2PI
        };
        if !nll.is_finite() {
            return None;
        }
        Some(EvalState {
            u: *u,
            nll,
            corr,
            chol,
            alpha,
            jitter,
        })
    }

    /// Gradient of the likelihood in log-parameters:
    /// `dNLL/du = 0.5 tr(S^-1 dS/du) - 0.5 a' (dS/du) a` with `a = S^-1 y`.
    fn gradient(&self, state: &EvalState) -> DVector<f64> {
        let (sigma2, l, noise) = (state.u[0].exp(), state.u[1].exp(), state.u[2].exp());
        let n = self.d2.nrows();
        let sinv = crate::linalg::spd_inverse_from_cholesky(state.chol.l_dirty());
        let inv_l2 = 1.0 / (l * l);
        let a = &state.alpha;

        // Fused accumulation of the trace and quadratic-form sums.
        let mut tr_ir = 0.0; // sum_ij Sinv_ij R_ij
        let mut tr_ird = 0.0; // sum_ij Sinv_ij R_ij d2_ij / l^2
        let mut q_r = 0.0; // a' R a
        let mut q_rd = 0.0; // a' (R o D) a
        for j in 0..n {
            let aj = a[j];
            for i in 0..n {
                let r = state.corr[(i, j)];
                let dd = self.d2[(i, j)] * inv_l2;
                let si = sinv[(i, j)];
                tr_ir += si * r;
                tr_ird += si * r * dd;
                let ar = a[i] * aj * r;
                q_r += ar;
                q_rd += ar * dd;
            }
        }
        let tr_inv = sinv.diagonal().sum();
        let a2 = a.dot(a);
        let jit = state.jitter;

        // dS/d ln sigma2 = sigma2 (R + jitter I); the jitter scales with
        // sigma2, so its derivative belongs here.
        let g1 = 0.5 * sigma2 * ((tr_ir + jit * tr_inv) - (q_r + jit * a2));
        let g2 = 0.5 * sigma2 * (tr_ird - q_rd);
        let g3 = 0.5 * noise * (tr_inv - a2);
        DVector::from_vec(vec![g1, g2, g3])
    }
}

fn halton(mut index: u32, base: u32) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= f64::from(base);
        r += f * f64::from(index % base);
        index /= base;
    }
    r
}

/// Deterministic restart starting points in log-space, scaled by data
/// statistics: lengthscales span gap quantiles times 1..25, variance splits
/// between signal and noise follow a low-discrepancy sequence.
fn initial_points(times: &[f64], y: &DVector<f64>, restarts: usize) -> Vec<[f64; 3]> {
    let n = y.len() as f64;
    let var_y = (y.dot(y) / n).max(1e-12);

    let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| -> f64 {
        let idx = ((gaps.len() - 1) as f64 * p).round() as usize;
        gaps[idx]
    };
    let quantiles = [q(0.25), q(0.5), q(0.75)];

    (0..restarts)
        .map(|k| {
            let h2 = halton(k as u32 + 1, 2);
            let h3 = halton(k as u32 + 1, 3);
            let l = quantiles[k % 3] * 25f64.powf(h2);
            let frac = 0.1 + 0.8 * h3;
            [(frac * var_y).ln(), l.ln(), ((1.0 - frac) * var_y).ln()]
        })
        .collect()
}

fn run_restart(
    ws: &FitWorkspace,
    start: &[f64; 3],
    max_iters: usize,
    ftol: f64,
) -> optim::MinimizeResult {
    // Cache the last evaluation so a gradient call right after an objective
    // call at the same point reuses the factorization.
    let cache: RefCell<Option<EvalState>> = RefCell::new(None);
    let f = |x: &DVector<f64>| -> f64 {
        let u = [x[0], x[1], x[2]];
        match ws.evaluate(&u) {
            Some(state) => {
                let v = state.nll;
                *cache.borrow_mut() = Some(state);
                v
            }
            None => f64::INFINITY,
        }
    };
    let g = |x: &DVector<f64>| -> DVector<f64> {
        let u = [x[0], x[1], x[2]];
        {
            let cached = cache.borrow();
            if let Some(state) = cached.as_ref() {
                if state.u == u {
                    return ws.gradient(state);
                }
            }
        }
        match ws.evaluate(&u) {
            Some(state) => {
                let grad = ws.gradient(&state);
                *cache.borrow_mut() = Some(state);
                grad
            }
            None => DVector::zeros(3),
        }
    };
    optim::bfgs(
        DVector::from_column_slice(start),
        f,
        g,
        &optim::Options { max_iters, ftol },
    )
}

/// Fit `(sigma2, lengthscale, noise_var)` by multi-restart likelihood
/// minimization in log-space.
///
/// Deterministic for fixed inputs and config: starting points come from a
/// fixed sequence, every restart is probed for `probe_iters` quasi-Newton
/// iterations, the best `continue_top` probes run to convergence at
/// `nll_tol`, and ties are broken by restart index. The returned likelihood
/// is never above the likelihood at any starting point.
pub fn fit(ts: &TimeSeries, config: &FitConfig) -> Result<FitResult, GpError> {
    let n = ts.len();
    if n < 3 {
        return Err(GpError::TooFewObservations { got: n, need: 3 });
    }
    let mean = ts.mean_value();
    let y = DVector::from_iterator(n, ts.values().iter().map(|v| v - mean));
    let ws = FitWorkspace::new(ts.times(), y);
    let starts = initial_points(ts.times(), &ws.y, config.restarts.max(1));

    let probe_one = |(idx, start): (usize, &[f64; 3])| {
        (
            idx,
            run_restart(&ws, start, config.probe_iters, config.nll_tol),
        )
    };
    let mut probes: Vec<(usize, optim::MinimizeResult)> = if config.parallel {
        starts.par_iter().enumerate().map(probe_one).collect()
    } else {
        starts.iter().enumerate().map(probe_one).collect()
    };
    if std::env::var_os("GPLP_FIT_TRACE").is_some() {
        for (i, r) in &probes {
            eprintln!(
                "probe {i}: f={:.4} evals={} conv={}",
                r.f, r.evals, r.converged
            );
        }
    }
    probes.sort_by(|a, b| a.1.f.total_cmp(&b.1.f).then(a.0.cmp(&b.0)));

    if !probes.iter().any(|(_, r)| r.f.is_finite()) {
        let diagnostics = starts
            .iter()
            .map(|s| {
                format!(
                    "({:.3e}, {:.3e}, {:.3e})",
                    s[0].exp(),
                    s[1].exp(),
                    s[2].exp()
                )
            })
            .collect::<Vec<_>>()
            .join(", ");
        return Err(GpError::FitFailed { diagnostics });
    }

    let top = config.continue_top.clamp(1, probes.len());
    let polish_one = |(idx, r): &(usize, optim::MinimizeResult)| {
        let start = [r.x[0], r.x[1], r.x[2]];
        (
            *idx,
            run_restart(&ws, &start, config.max_iters, config.nll_tol),
        )
    };
    let polished: Vec<(usize, optim::MinimizeResult)> = if config.parallel {
        probes[..top].par_iter().map(polish_one).collect()
    } else {
        probes[..top].iter().map(polish_one).collect()
    };
    if std::env::var_os("GPLP_FIT_TRACE").is_some() {
        for (i, r) in &polished {
            eprintln!(
                "polish {i}: f={:.6} evals={} conv={}",
                r.f, r.evals, r.converged
            );
        }
    }

    // Best over polished runs and probes; index breaks ties.
    let (best_idx, best, best_converged) = polished
        .iter()
        .map(|(i, r)| (*i, r, r.converged))
        .chain(probes.iter().map(|(i, r)| (*i, r, false)))
        .filter(|(_, r, _)| r.f.is_finite())
        .min_by(|a, b| a.1.f.total_cmp(&b.1.f).then(a.0.cmp(&b.0)))
        .expect("at least one finite restart checked above");
    let _ = best_idx;

    let params = SeHyperparams::new(best.x[0].exp(), best.x[1].exp(), best.x[2].exp())?;
    Ok(FitResult {
        params,
        nll: best.f,
        restarts_tried: config.restarts as u32,
        converged: best_converged,
    })
}

// ---------------------------------------------------------------------------
// Posterior inference
// ---------------------------------------------------------------------------

/// Posterior mean under the plain SE kernel, with the same mean-centering
/// convention as the component posteriors. By kernel additivity this equals
/// the sum of the low- and high-component posterior means for any cutoff.
pub fn se_posterior_mean(
    ts: &TimeSeries,
    query: &[f64],
    p: &SeHyperparams,
) -> Result<Vec<f64>, GpError> {
    for (i, q) in query.iter().enumerate() {
        if !q.is_finite() {
            return Err(GpError::NonFiniteQuery(i));
        }
    }
    let n = ts.len();
    let mean = ts.mean_value();
    let y = DVector::from_iterator(n, ts.values().iter().map(|v| v - mean));
    let base = se_gram(ts.times(), p);
    let (chol, _) = factor_with_jitter(&base, p.sigma2, n)?;
    let alpha = chol.solve(&y);
    Ok(query
        .iter()
        .map(|&q| {
            let k: f64 = ts
                .times()
                .iter()
                .zip(alpha.iter())
                .map(|(&t, a)| kernels::se_kernel(q - t, p) * a)
                .sum();
            k + mean
        })
        .collect())
}

/// Posterior of one latent component given the observations, on `query`.
///
/// Mean and marginal variance only; see [`posterior_with_options`] for the
/// full covariance.
pub fn posterior(
    ts: &TimeSeries,
    query: &[f64],
    spec: &BandLimitedKernelSpec,
    component: Component,
) -> Result<PosteriorEstimate, GpError> {
    posterior_with_options(ts, query, spec, component, false)
}

/// Posterior with optional full covariance (quadratic memory in the query
/// size; the default output carries only the diagonal).
///
/// The empirical mean of the observations is removed before conditioning
/// and added back to the low-component mean only: the mean is a
/// zero-frequency feature and belongs to the low band.
pub fn posterior_with_options(
    ts: &TimeSeries,
    query: &[f64],
    spec: &BandLimitedKernelSpec,
    component: Component,
    with_full_cov: bool,
) -> Result<PosteriorEstimate, GpError> {
    for (i, q) in query.iter().enumerate() {
        if !q.is_finite() {
            return Err(GpError::NonFiniteQuery(i));
        }
    }
    let n = ts.len();
    let m = query.len();
    let mean = ts.mean_value();
    let y = DVector::from_iterator(n, ts.values().iter().map(|v| v - mean));

    let base = se_gram(ts.times(), &spec.se);
    let (chol, _) = factor_with_jitter(&base, spec.se.sigma2, n)?;
    let alpha = chol.solve(&y);

    let kern = |tau: f64| -> f64 {
        match component {
            Component::Low => kernels::lowpass_kernel(tau, spec),
            Component::High => kernels::highpass_kernel(tau, spec),
        }
    };
    let prior_var = kern(0.0);

    // Cross-covariance, train x query, built column-parallel.
    let times = ts.times();
    let mut data = vec![0.0f64; n * m];
    let fill = |(j, col): (usize, &mut [f64])| {
        let qt = query[j];
        for (i, slot) in col.iter_mut().enumerate() {
            *slot = kern(times[i] - qt);
        }
    };
    if m > 0 {
        data.par_chunks_mut(n).enumerate().for_each(fill);
    }
    let k_tq = DMatrix::from_vec(n, m, data);

    let mean_add = match component {
        Component::Low => mean,
        Component::High => 0.0,
    };
    let post_mean: Vec<f64> = (0..m)
        .map(|j| k_tq.column(j).dot(&alpha) + mean_add)
        .collect();

    // Marginal variance via the whitened cross-covariance V = L^-1 K_tq:
    // var_j = k(0) - ||V_j||^2. Solved in parallel column blocks.
    let l_fact = chol.l_dirty();
    let mut v = k_tq;
    let chunk = 512;
    v.data
        .as_mut_slice()
        .par_chunks_mut(n * chunk)
        .for_each(|block| {
            let cols = block.len() / n;
            let mut view = nalgebra::DMatrixViewMut::from_slice(block, n, cols);
            l_fact.solve_lower_triangular_unchecked_mut(&mut view);
        });
    let variance: Vec<f64> = (0..m)
        .map(|j| {
            let raw = prior_var - v.column(j).norm_squared();
            debug_assert!(
                raw >= -1e-9 * spec.se.sigma2,
                "posterior variance {raw} below the round-off floor"
            );
            raw.max(0.0)
        })
        .collect();

    let full_cov = if with_full_cov && m > 0 {
        let mut k_qq = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let val = kern(query[i] - query[j]);
                k_qq[(i, j)] = val;
                k_qq[(j, i)] = val;
            }
        }
        Some(k_qq - v.transpose() * &v)
    } else {
        None
    };

    Ok(PosteriorEstimate {
        query_times: query.to_vec(),
        mean: post_mean,
        variance,
        full_cov,
    })
}
