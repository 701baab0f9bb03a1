//! Independent oracles for the acceptance suite.
//!
//! Nothing in here calls the production evaluation paths: the error function
//! oracle is a raw Maclaurin sum carried in double-double arithmetic, and the
//! kernel oracle integrates the truncated spectral density by adaptive
//! quadrature. Production code is compared against these, never the other way
//! around.

/// Double-double value: an unevaluated sum `hi + lo` carrying ~31 significant
/// digits. Just enough arithmetic for the series oracle lives here.
#[derive(Clone, Copy, Debug)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl Dd {
    pub fn new(a: f64) -> Self {
        Dd { hi: a, lo: 0.0 }
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, o.hi);
        let s2 = s2 + self.lo + o.lo;
        let (hi, lo) = quick_two_sum(s1, s2);
        Dd { hi, lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(Dd {
            hi: -o.hi,
            lo: -o.lo,
        })
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, o.hi);
        let p2 = p2 + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::new(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Dd::new(q2)));
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::new(q3))
    }

    pub fn sqrt(self) -> Dd {
        // One double-double Newton step from an f64 seed doubles the
        // precision, which is all the oracle needs.
        let x0 = Dd::new(self.hi.sqrt());
        self.div(x0).add(x0).mul(Dd::new(0.5))
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Complex number with double-double components.
#[derive(Clone, Copy, Debug)]
pub struct CDd {
    pub re: Dd,
    pub im: Dd,
}

impl CDd {
    pub fn new(re: f64, im: f64) -> Self {
        CDd {
            re: Dd::new(re),
            im: Dd::new(im),
        }
    }

    pub fn add(self, o: CDd) -> CDd {
        CDd {
            re: self.re.add(o.re),
            im: self.im.add(o.im),
        }
    }

    pub fn mul(self, o: CDd) -> CDd {
        CDd {
            re: self.re.mul(o.re).sub(self.im.mul(o.im)),
            im: self.re.mul(o.im).add(self.im.mul(o.re)),
        }
    }

    pub fn scale(self, s: Dd) -> CDd {
        CDd {
            re: self.re.mul(s),
            im: self.im.mul(s),
        }
    }
}

/// Pi in double-double precision.
fn dd_pi() -> Dd {
    Dd {
        hi: std::f64::consts::PI,
        lo: 1.224_646_799_147_353_2e-16,
    }
}

/// 200-term Maclaurin series for erf(z), summed in double-double arithmetic.
///
/// erf(z) = (2/sqrt(pi)) * sum_{n>=0} (-1)^n z^(2n+1) / (n! (2n+1)).
///
/// Valid (converged far below the comparison tolerance) for |z| <= 6. This is
/// the brute-force oracle: no region splitting, no Faddeeva function, no
/// shortcuts shared with the production path.
pub fn erf_series_oracle(re: f64, im: f64) -> (f64, f64) {
    let z = CDd::new(re, im);
    let mz2 = z.mul(z).scale(Dd::new(-1.0));
    let mut term = z;
    let mut sum = z;
    for n in 1..=200u32 {
        let nf = f64::from(n);
        let ratio = Dd::new(2.0 * nf - 1.0).div(Dd::new(nf * (2.0 * nf + 1.0)));
        term = term.mul(mz2).scale(ratio);
        sum = sum.add(term);
    }
    let two_over_sqrt_pi = Dd::new(2.0).div(dd_pi().sqrt());
    let v = sum.scale(two_over_sqrt_pi);
    (v.re.to_f64(), v.im.to_f64())
}

/// Adaptive Simpson quadrature with Richardson refinement.
#[allow(clippy::too_many_arguments)]
fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let sum = left + right;
    if depth == 0 || (sum - whole).abs() <= 15.0 * tol {
        sum + (sum - whole) / 15.0
    } else {
        adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Low-pass kernel oracle: inverse Fourier transform of the truncated
/// spectral density, integrated numerically.
///
/// k(t) = integral_{-b}^{b} sigma^2 sqrt(2 pi l^2) exp(-2 pi^2 l^2 xi^2)
///        exp(2 pi i xi t) d xi
///      = 2 integral_0^b  S(xi) cos(2 pi xi t) d xi.
///
/// Absolute accuracy ~1e-10.
pub fn lowpass_kernel_quadrature(t: f64, sigma2: f64, lengthscale: f64, b: f64) -> f64 {
    let amp = sigma2 * (2.0 * std::f64::consts::PI * lengthscale * lengthscale).sqrt();
    let decay = 2.0 * std::f64::consts::PI * std::f64::consts::PI * lengthscale * lengthscale;
    let f =
        move |xi: f64| amp * (-decay * xi * xi).exp() * (2.0 * std::f64::consts::PI * xi * t).cos();
    // Split into panels so each holds at most about one oscillation period.
    let panels = (1.0 + 4.0 * b * t.abs()).ceil() as usize;
    let tol = 1e-12 / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = b * i as f64 / panels as f64;
        let hi = b * (i + 1) as f64 / panels as f64;
        total += integrate(&f, lo, hi, tol);
    }
    2.0 * total
}
