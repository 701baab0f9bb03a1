//! Acceptance suite: one test per release criterion. Each test prints one
//! line with the measured numbers next to its threshold, so a bare
//! `cargo test --test acceptance -- --nocapture` doubles as the release
//! report.

mod oracles;

use gplp::butterworth::{design_butterworth, filtfilt, ButterworthSpec};
use gplp::gp::{fit, posterior, posterior_with_options, Component, FitConfig};
use gplp::kernels::{self, BandLimitedKernelSpec, SeHyperparams};
use gplp::signals::{
    add_noise, mse, subsample, synth_line_spectra, synth_low_component, LineSpectraSpec,
    SubsampleMode,
};
use gplp::spectrum::{band_energy_ratio, fft_spectrum};
use gplp::timeseries::TimeSeries;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

/// Serializes the expensive end-to-end criteria so their runtime
/// measurements are not distorted by each other on a small machine.
static HEAVY: Mutex<()> = Mutex::new(());

/// Criterion 1: the closed-form low-pass kernel equals the adaptive-quadrature
/// inverse Fourier transform of the truncated SE density, to 1e-8 absolute,
/// over t in [-10, 10] (101 points) x b in {0.1, 0.5, 1} x l in {0.5, 1, 2}.
#[test]
fn criterion_01_lowpass_kernel_vs_quadrature_oracle() {
    let start = Instant::now();
    let mut max_err = 0.0f64;
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for &b in &[0.1, 0.5, 1.0] {
        for &l in &[0.5, 1.0, 2.0] {
            let spec =
                BandLimitedKernelSpec::new(SeHyperparams::new(1.0, l, 0.0).unwrap(), b).unwrap();
            for i in 0..=100 {
                let t = -10.0 + 0.2 * f64::from(i);
                let got = kernels::lowpass_kernel(t, &spec);
                let want = oracles::lowpass_kernel_quadrature(t, 1.0, l, b);
                let err = (got - want).abs();
                if err > max_err {
                    max_err = err;
                    worst = (t, b, l);
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = max_err <= 1e-8 && elapsed.as_secs_f64() < 10.0;
    println!(
        "criterion 01 [{}] lowpass kernel vs quadrature oracle: max abs err {:.3e} (<= 1e-8) \
         at (t, b, l) = {:?}, runtime {:.2}s (< 10s)",
        if pass { "PASS" } else { "FAIL" },
        max_err,
        worst,
        elapsed.as_secs_f64()
    );
    assert!(pass, "max err {max_err:.3e} at {worst:?}, {elapsed:?}");
}

/// Criterion 2: the production complex error function agrees with the
/// 200-term extended-precision series oracle across the grid
/// |Re z|, |Im z| <= 4 at 0.1 spacing.
///
/// The error metric is |prod - oracle| / max(1, |oracle|): plain absolute
/// error where erf is of order one, relative error where it grows into the
/// 1e6 range near the imaginary axis (where a 1e-12 absolute bound would be
/// below the spacing of representable doubles).
#[test]
fn criterion_02_complex_erf_vs_series_oracle() {
    let start = Instant::now();
    let mut max_err = 0.0f64;
    let mut max_abs = 0.0f64;
    let mut worst = Complex64::new(0.0, 0.0);
    for i in -40..=40 {
        for j in -40..=40 {
            let z = Complex64::new(f64::from(i) * 0.1, f64::from(j) * 0.1);
            let got = gplp::cerf::complex_erf(z).unwrap();
            let (or, oi) = oracles::erf_series_oracle(z.re, z.im);
            let abs = (got.re - or).hypot(got.im - oi);
            let scale = or.hypot(oi).max(1.0);
            let err = abs / scale;
            max_abs = max_abs.max(abs);
            if err > max_err {
                max_err = err;
                worst = z;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = max_err <= 1e-12 && elapsed.as_secs_f64() < 5.0;
    println!(
        "criterion 02 [{}] complex erf vs series oracle: max scaled err {:.3e} (<= 1e-12) \
         at z = {worst}, max raw abs err {:.3e}, runtime {:.2}s (< 5s)",
        if pass { "PASS" } else { "FAIL" },
        max_err,
        max_abs,
        elapsed.as_secs_f64()
    );
    assert!(pass, "max scaled err {max_err:.3e} at {worst}, {elapsed:?}");
}

// ---------------------------------------------------------------------------
// Shared six-tone reproduction pipeline (criteria 3, 5, 9)
// ---------------------------------------------------------------------------

struct SeedRun {
    gplp_mse: f64,
    butter_mse: f64,
    covered: usize,
    n_query: usize,
    fitted_noise_var: f64,
}

struct EvenReproduction {
    runs: Vec<SeedRun>,
    /// Posterior mean of the first seed on the dense grid, for the spectral
    /// rejection check.
    first_mean: TimeSeries,
    wall_seconds: f64,
}

static EVEN_PIPELINE: OnceLock<EvenReproduction> = OnceLock::new();

fn even_reproduction() -> &'static EvenReproduction {
    EVEN_PIPELINE.get_or_init(|| {
        let start = Instant::now();
        let cfg = LineSpectraSpec::reproduction_defaults();
        let clean = synth_line_spectra(&cfg).unwrap();
        let truth = synth_low_component(&cfg).unwrap();
        let fs = 1.0 / clean.uniform_step(1e-9).unwrap() / 4.0;
        let cascade = design_butterworth(&ButterworthSpec::new(10, 0.495, fs).unwrap()).unwrap();

        let mut runs = Vec::new();
        let mut first_mean = None;
        for seed in 1..=5u64 {
            let obs = subsample(&clean, 0.25, SubsampleMode::Even, 0).unwrap();
            let obs = add_noise(&obs, 1.0, seed).unwrap();

            let fitres = fit(&obs, &FitConfig::default()).unwrap();
            let spec = BandLimitedKernelSpec::new(fitres.params, 0.495).unwrap();
            let post = posterior(&obs, truth.times(), &spec, Component::Low).unwrap();
            let gplp_mse = mse(&post.mean, truth.values()).unwrap();
            let covered = (0..truth.len())
                .filter(|&i| {
                    (truth.values()[i] - post.mean[i]).abs() <= 1.96 * post.variance[i].sqrt()
                })
                .count();

            // Classical arm: zero-phase Butterworth on the evenly sampled
            // observations, scored at the observation times (every fourth
            // point of the truth grid by construction).
            let filtered = filtfilt(&cascade, obs.values()).unwrap();
            let truth_at_obs: Vec<f64> = (0..truth.len())
                .step_by(4)
                .map(|i| truth.values()[i])
                .collect();
            let butter_mse = mse(&filtered, &truth_at_obs).unwrap();

            if first_mean.is_none() {
                first_mean =
                    Some(TimeSeries::new(truth.times().to_vec(), post.mean.clone()).unwrap());
            }
            runs.push(SeedRun {
                gplp_mse,
                butter_mse,
                covered,
                n_query: truth.len(),
                fitted_noise_var: fitres.params.noise_var,
            });
        }
        EvenReproduction {
            runs,
            first_mean: first_mean.unwrap(),
            wall_seconds: start.elapsed().as_secs_f64(),
        }
    })
}

/// Criterion 3: six-tone benchmark with even 25% sampling and unit noise,
/// five seeds. Averages: GPLP MSE in [0.05, 0.30], Butterworth MSE in
/// [0.15, 0.45], and GPLP beats Butterworth on at least 4 of 5 seeds.
/// Pipeline wall time under 3 minutes.
#[test]
fn criterion_03_even_sampling_reproduction() {
    let _guard = HEAVY.lock().unwrap();
    let rep = even_reproduction();
    let n = rep.runs.len() as f64;
    let gplp_avg = rep.runs.iter().map(|r| r.gplp_mse).sum::<f64>() / n;
    let butter_avg = rep.runs.iter().map(|r| r.butter_mse).sum::<f64>() / n;
    let wins = rep
        .runs
        .iter()
        .filter(|r| r.gplp_mse < r.butter_mse)
        .count();
    let per_seed: Vec<String> = rep
        .runs
        .iter()
        .map(|r| format!("{:.3}/{:.3}", r.gplp_mse, r.butter_mse))
        .collect();
    let pass = (0.05..=0.30).contains(&gplp_avg)
        && (0.15..=0.45).contains(&butter_avg)
        && wins >= 4
        && rep.wall_seconds < 180.0;
    println!(
        "criterion 03 [{}] even-sampling reproduction: GPLP avg MSE {:.4} (in [0.05, 0.30]), \
         Butterworth avg MSE {:.4} (in [0.15, 0.45]), GPLP wins {wins}/5 (>= 4), \
         per-seed GPLP/Butterworth {:?}, pipeline {:.1}s (< 180s)",
        if pass { "PASS" } else { "FAIL" },
        gplp_avg,
        butter_avg,
        per_seed,
        rep.wall_seconds
    );
    assert!(pass);
}

/// The benchmark observations carry unit-variance noise; the fitted noise
/// level must land in the right range on every seed.
#[test]
fn benchmark_fit_recovers_the_noise_level() {
    let _guard = HEAVY.lock().unwrap();
    let rep = even_reproduction();
    for (i, run) in rep.runs.iter().enumerate() {
        let sigma_eta = run.fitted_noise_var.sqrt();
        assert!(
            (0.7..=1.3).contains(&sigma_eta),
            "seed {i}: fitted noise std {sigma_eta:.3} outside [0.7, 1.3]"
        );
    }
}

/// Criterion 4: same benchmark with random 25% subsampling, five seeds; the
/// GPLP MSE stays in [0.08, 0.40] on every seed. Under 3 minutes.
#[test]
fn criterion_04_random_sampling_reproduction() {
    let _guard = HEAVY.lock().unwrap();
    let start = Instant::now();
    let cfg = LineSpectraSpec::reproduction_defaults();
    let clean = synth_line_spectra(&cfg).unwrap();
    let truth = synth_low_component(&cfg).unwrap();

    let mut mses = Vec::new();
    for seed in 1..=5u64 {
        let obs = subsample(&clean, 0.25, SubsampleMode::Random, seed).unwrap();
        let obs = add_noise(&obs, 1.0, seed + 100).unwrap();
        assert!(obs.uniform_step(1e-9).is_none(), "draw should be uneven");

        let fitres = fit(&obs, &FitConfig::default()).unwrap();
        let spec = BandLimitedKernelSpec::new(fitres.params, 0.495).unwrap();
        let post = posterior(&obs, truth.times(), &spec, Component::Low).unwrap();
        mses.push(mse(&post.mean, truth.values()).unwrap());
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = mses.iter().all(|m| (0.08..=0.40).contains(m)) && elapsed < 180.0;
    println!(
        "criterion 04 [{}] random-sampling reproduction: per-seed GPLP MSE {:?} \
         (each in [0.08, 0.40]), pipeline {:.1}s (< 180s)",
        if pass { "PASS" } else { "FAIL" },
        mses.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>(),
        elapsed
    );
    assert!(pass, "mses {mses:?}, {elapsed:.1}s");
}

/// Criterion 5: the spectrum of the dense posterior mean shows local maxima
/// within one bin of 0.31, 0.38 and 0.48 Hz, and every bin above 0.51 Hz
/// sits at least 20 dB below the smallest of those three peaks.
#[test]
fn criterion_05_spectral_recovery_and_rejection() {
    let _guard = HEAVY.lock().unwrap();
    let rep = even_reproduction();
    let spectrum = fft_spectrum(&rep.first_mean).unwrap();
    let df = spectrum.freq_resolution();

    let mut peaks = Vec::new();
    let mut peaks_ok = true;
    for f0 in [0.31, 0.38, 0.48] {
        let k0 = (f0 / df).round() as usize;
        let k = (k0 - 1..=k0 + 1)
            .max_by(|&a, &b| spectrum.magnitude[a].total_cmp(&spectrum.magnitude[b]))
            .unwrap();
        let is_local_max = spectrum.magnitude[k] >= spectrum.magnitude[k - 1]
            && spectrum.magnitude[k] >= spectrum.magnitude[k + 1];
        let within_bin = (spectrum.freqs[k] - f0).abs() <= df * 1.000_001;
        peaks_ok &= is_local_max && within_bin;
        peaks.push(spectrum.magnitude[k]);
    }
    let floor_ref = peaks.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut worst_db = f64::NEG_INFINITY;
    for (f, m) in spectrum.freqs.iter().zip(&spectrum.magnitude) {
        if *f > 0.51 {
            let db = 20.0 * (m / floor_ref).log10();
            worst_db = worst_db.max(db);
        }
    }
    let pass = peaks_ok && worst_db <= -20.0;
    println!(
        "criterion 05 [{}] spectral recovery/rejection: peaks at 0.31/0.38/0.48 recovered \
         within one bin = {peaks_ok}, highest bin above 0.51 Hz at {:.1} dB vs smallest \
         peak (<= -20 dB)",
        if pass { "PASS" } else { "FAIL" },
        worst_db
    );
    assert!(pass);
}

/// Criterion 6: with b*l >= 3 the band-limited posterior degenerates to
/// plain SE-GP regression (same observation covariance convention), to 1e-9
/// in mean and variance, on 20 random small instances.
#[test]
fn criterion_06_degeneracy_to_se_regression() {
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let mut max_err = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(5..=30);
        let mut t = 0.0;
        let mut times = Vec::with_capacity(n);
        for _ in 0..n {
            t += rng.random_range(0.1..0.8);
            times.push(t);
        }
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ts = TimeSeries::new(times.clone(), values.clone()).unwrap();

        let sigma2 = rng.random_range(0.5..2.0);
        let l = rng.random_range(0.3..2.0);
        let noise = rng.random_range(0.05..0.5);
        let p = SeHyperparams::new(sigma2, l, noise).unwrap();
        let b = 3.2 / l; // b * l = 3.2 >= 3
        let spec = BandLimitedKernelSpec::new(p, b).unwrap();

        let query: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..t + 1.0)).collect();
        let post = posterior(&ts, &query, &spec, Component::Low).unwrap();

        // Independent SE-GP route: explicit inverse, same jitter convention.
        let mean_y = ts.mean_value();
        let yc = DVector::from_iterator(n, values.iter().map(|v| v - mean_y));
        let mut sigma = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                sigma[(i, j)] = kernels::se_kernel(times[i] - times[j], &p)
                    + if i == j { noise + 1e-8 * sigma2 } else { 0.0 };
            }
        }
        let sinv = sigma.try_inverse().unwrap();
        let alpha = &sinv * yc;
        for (j, &q) in query.iter().enumerate() {
            let k =
                DVector::from_iterator(n, times.iter().map(|&ti| kernels::se_kernel(q - ti, &p)));
            let m_ref = k.dot(&alpha) + mean_y;
            let v_ref = (sigma2 - k.dot(&(&sinv * &k))).max(0.0);
            max_err = max_err.max((post.mean[j] - m_ref).abs());
            max_err = max_err.max((post.variance[j] - v_ref).abs());
        }
    }
    let pass = max_err <= 1e-9;
    println!(
        "criterion 06 [{}] wideband degeneracy to SE regression: max |GPLP - SE-GP| \
         {:.3e} over mean and variance (<= 1e-9)",
        if pass { "PASS" } else { "FAIL" },
        max_err
    );
    assert!(pass, "max err {max_err:.3e}");
}

/// Criterion 7: the production posterior matches a dense joint-Gaussian
/// conditioning oracle (explicit inverse over quadrature kernel values) to
/// 1e-6 in mean and covariance, on 20 random instances with n <= 8.
#[test]
fn criterion_07_posterior_vs_joint_conditioning_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let mut max_mean_err = 0.0f64;
    let mut max_cov_err = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(4..=8);
        let m = rng.random_range(3..=6);
        let mut t = 0.0;
        let mut times = Vec::with_capacity(n);
        for _ in 0..n {
            t += rng.random_range(0.2..1.2);
            times.push(t);
        }
        // Centered values so the mean-handling convention is a no-op and the
        // oracle can condition the zero-mean joint directly.
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let avg = raw.iter().sum::<f64>() / n as f64;
        let values: Vec<f64> = raw.iter().map(|v| v - avg).collect();
        let ts = TimeSeries::new(times.clone(), values.clone()).unwrap();

        let sigma2 = rng.random_range(0.5..2.0);
        let l = rng.random_range(0.4..1.5);
        let noise = rng.random_range(0.05..0.5);
        let b = rng.random_range(0.2..0.8);
        let p = SeHyperparams::new(sigma2, l, noise).unwrap();
        let spec = BandLimitedKernelSpec::new(p, b).unwrap();
        let query: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..t + 1.0)).collect();

        let post = posterior_with_options(&ts, &query, &spec, Component::Low, true).unwrap();
        let cov = post.full_cov.as_ref().unwrap();

        // Joint-Gaussian oracle over quadrature kernel values.
        let kq = |a: f64| oracles::lowpass_kernel_quadrature(a, sigma2, l, b);
        let k_qq = DMatrix::from_fn(m, m, |i, j| kq(query[i] - query[j]));
        let k_qt = DMatrix::from_fn(m, n, |i, j| kq(query[i] - times[j]));
        let mut sigma_y = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                sigma_y[(i, j)] = kernels::se_kernel(times[i] - times[j], &p)
                    + if i == j { noise + 1e-8 * sigma2 } else { 0.0 };
            }
        }
        let sinv = sigma_y.try_inverse().unwrap();
        let y = DVector::from_column_slice(&values);
        let mean_ref = &k_qt * (&sinv * &y);
        let cov_ref = &k_qq - &k_qt * &sinv * k_qt.transpose();

        for i in 0..m {
            max_mean_err = max_mean_err.max((post.mean[i] - mean_ref[i]).abs());
            for j in 0..m {
                max_cov_err = max_cov_err.max((cov[(i, j)] - cov_ref[(i, j)]).abs());
            }
        }
    }
    let pass = max_mean_err <= 1e-6 && max_cov_err <= 1e-6;
    println!(
        "criterion 07 [{}] posterior vs joint-Gaussian oracle: max mean err {:.3e}, \
         max covariance err {:.3e} (each <= 1e-6)",
        if pass { "PASS" } else { "FAIL" },
        max_mean_err,
        max_cov_err
    );
    assert!(pass, "mean {max_mean_err:.3e} cov {max_cov_err:.3e}");
}

/// Criterion 8: Butterworth correctness: -3.01 dB (+- 0.1) at the cutoff,
/// at least 60 dB single-pass attenuation at twice the cutoff for order 10,
/// and filtfilt maps a constant to itself within 1e-9.
#[test]
fn criterion_08_butterworth_correctness() {
    let cascade = design_butterworth(&ButterworthSpec::new(10, 0.495, 25.0).unwrap()).unwrap();
    let cutoff_db = cascade.magnitude_db(0.495);
    let double_db = cascade.magnitude_db(0.99);

    let x = vec![2.5; 300];
    let y = filtfilt(&cascade, &x).unwrap();
    let const_err = y.iter().map(|v| (v - 2.5).abs()).fold(0.0f64, f64::max);

    let pass = (cutoff_db + 3.0103).abs() <= 0.1 && double_db <= -60.0 && const_err <= 1e-9;
    println!(
        "criterion 08 [{}] Butterworth: |H| at cutoff {:.4} dB (-3.01 +- 0.1), at 2x cutoff \
         {:.1} dB (<= -60), filtfilt constant error {:.2e} (<= 1e-9)",
        if pass { "PASS" } else { "FAIL" },
        cutoff_db,
        double_db,
        const_err
    );
    assert!(pass);
}

/// Criterion 9: in the even-sampling runs, the 95% posterior band contains
/// the ground-truth low component at 85% or more of the query points
/// (pooled across the five seeds).
#[test]
fn criterion_09_coverage_of_95_band() {
    let _guard = HEAVY.lock().unwrap();
    let rep = even_reproduction();
    let covered: usize = rep.runs.iter().map(|r| r.covered).sum();
    let total: usize = rep.runs.iter().map(|r| r.n_query).sum();
    let pooled = covered as f64 / total as f64;
    let per_seed: Vec<String> = rep
        .runs
        .iter()
        .map(|r| format!("{:.3}", r.covered as f64 / r.n_query as f64))
        .collect();
    let pass = pooled >= 0.85;
    println!(
        "criterion 09 [{}] 95% band coverage: pooled {:.3} (>= 0.85), per seed {:?}",
        if pass { "PASS" } else { "FAIL" },
        pooled,
        per_seed
    );
    assert!(pass, "pooled coverage {pooled:.3}");
}

/// Criterion 10: band-energy discrimination. Unconditionally, an
/// equal-amplitude two-tone signal splits 0.50 +- 0.02 at a cutoff between
/// the tones. When the heart-rate files are supplied (GPLP_HEART_DATA_DIR
/// with healthy.csv / unhealthy.csv), the healthy ratio must be 0.77 +- 0.05
/// and the unhealthy 0.97 +- 0.02 at 0.05 Hz.
#[test]
fn criterion_10_band_energy_discrimination() {
    let n = 4000;
    let dt = 0.5;
    let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let values: Vec<f64> = times
        .iter()
        .map(|&t| {
            (2.0 * std::f64::consts::PI * 0.02 * t).cos()
                + (2.0 * std::f64::consts::PI * 0.2 * t).cos()
        })
        .collect();
    let two_tone = TimeSeries::new(times, values).unwrap();
    let split = band_energy_ratio(&two_tone, 0.05).unwrap().ratio;
    let split_ok = (split - 0.5).abs() <= 0.02;

    let heart = match std::env::var_os("GPLP_HEART_DATA_DIR") {
        Some(dir) => {
            let dir = std::path::PathBuf::from(dir);
            let healthy = TimeSeries::read_csv_path(dir.join("healthy.csv"))
                .expect("healthy.csv in GPLP_HEART_DATA_DIR");
            let unhealthy = TimeSeries::read_csv_path(dir.join("unhealthy.csv"))
                .expect("unhealthy.csv in GPLP_HEART_DATA_DIR");
            let rh = band_energy_ratio(&healthy, 0.05).unwrap().ratio;
            let ru = band_energy_ratio(&unhealthy, 0.05).unwrap().ratio;
            let ok = (rh - 0.77).abs() <= 0.05 && (ru - 0.97).abs() <= 0.02;
            format!(
                "heart-rate ratios healthy {:.3} (0.77 +- 0.05) unhealthy {:.3} \
                 (0.97 +- 0.02): {}",
                rh,
                ru,
                if ok { "ok" } else { "FAIL" }
            )
        }
        None => "heart-rate files not supplied, conditional part skipped".to_string(),
    };
    let heart_ok = !heart.contains("FAIL");

    let pass = split_ok && heart_ok;
    println!(
        "criterion 10 [{}] band energy: two-tone split {:.4} (0.50 +- 0.02); {}",
        if pass { "PASS" } else { "FAIL" },
        split,
        heart
    );
    assert!(pass);
}
