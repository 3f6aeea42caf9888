use serde::{Deserialize, Serialize};

use super::special::ln_beta_pos;
use crate::{Error, Result};

/// Shape parameters of a beta distribution; both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBeta")]
pub struct BetaParams {
    alpha: f64,
    beta: f64,
}

#[derive(Deserialize)]
struct RawBeta {
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawBeta> for BetaParams {
    type Error = Error;

    fn try_from(raw: RawBeta) -> Result<Self> {
        BetaParams::new(raw.alpha, raw.beta)
    }
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "beta shape must be positive and finite",
                });
            }
        }
        Ok(Self { alpha, beta })
    }

    pub const fn uniform() -> Self {
        Self { alpha: 1.0, beta: 1.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    /// Prior sample size `alpha + beta`.
    pub fn concentration(&self) -> f64 {
        self.alpha + self.beta
    }

    /// Conjugate update with `successes` out of `trials`.
    pub fn update(&self, successes: u32, trials: u32) -> Self {
        debug_assert!(successes <= trials);
        Self {
            alpha: self.alpha + successes as f64,
            beta: self.beta + (trials - successes) as f64,
        }
    }

    pub(crate) fn ln_norm(&self) -> f64 {
        ln_beta_pos(self.alpha, self.beta)
    }
}

pub fn beta_ln_pdf(p: f64, params: &BetaParams) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NEG_INFINITY;
    }
    let (a, b) = (params.alpha, params.beta);
    let lx = if a == 1.0 { 0.0 } else { (a - 1.0) * p.ln() };
    let ly = if b == 1.0 { 0.0 } else { (b - 1.0) * (-p).ln_1p() };
    lx + ly - params.ln_norm()
}

pub fn beta_pdf(p: f64, params: &BetaParams) -> f64 {
    beta_ln_pdf(p, params).exp()
}

const CF_MAX_ITER: usize = 10_000;
const CF_EPS: f64 = 1e-16;
const FP_MIN: f64 = 1e-300;

fn check_prob(func: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain {
            func,
            value: p,
            expected: "p in [0, 1]",
        })
    }
}

/// Regularized incomplete beta `I_p(alpha, beta)`.
pub fn beta_cdf(p: f64, params: &BetaParams) -> Result<f64> {
    check_prob("beta_cdf", p)?;
    regularized(p, params.alpha, params.beta)
}

/// Upper tail `1 - I_p(alpha, beta)`, accurate when it is tiny.
pub fn beta_sf(p: f64, params: &BetaParams) -> Result<f64> {
    check_prob("beta_sf", p)?;
    regularized(1.0 - p, params.beta, params.alpha)
}

fn regularized(x: f64, a: f64, b: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= 1.0 {
        return Ok(1.0);
    }
    if x > a / (a + b) {
        return Ok(1.0 - lower_tail(1.0 - x, b, a)?);
    }
    lower_tail(x, a, b)
}

fn lower_tail(x: f64, a: f64, b: f64) -> Result<f64> {
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta_pos(a, b);
    Ok(ln_front.exp() * continued_fraction(x, a, b)? / a)
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn continued_fraction(x: f64, a: f64, b: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FP_MIN {
        d = FP_MIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FP_MIN {
            d = FP_MIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FP_MIN {
            c = FP_MIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FP_MIN {
            d = FP_MIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FP_MIN {
            c = FP_MIN;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_EPS {
            return Ok(h);
        }
    }
    Err(Error::NonConvergence {
        routine: "incomplete beta continued fraction",
        iterations: CF_MAX_ITER,
        detail: format!("x={x}, a={a}, b={b}, partial={h}"),
    })
}

const QUANTILE_MAX_ITER: usize = 2000;

/// Inverse of [`beta_cdf`] by bracketed Newton iteration that falls back to
/// bisection whenever the Newton step leaves the bracket.
pub fn beta_quantile(q: f64, params: &BetaParams) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain {
            func: "beta_quantile",
            value: q,
            expected: "q in (0, 1)",
        });
    }
    let (a, b) = (params.alpha, params.beta);
    let ln_norm = params.ln_norm();
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x = initial_guess(q, a, b);
    let mut resid = f64::NAN;
    for _ in 0..QUANTILE_MAX_ITER {
        resid = regularized(x, a, b)? - q;
        if resid == 0.0 {
            return Ok(x);
        }
        if resid < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let ln_pdf = (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_norm;
        let mut next = x - resid / ln_pdf.exp();
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if collapsed(lo, hi) {
            break;
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE) {
            if resid.abs() <= 1e-12 {
                x = next;
                resid = regularized(x, a, b)? - q;
                break;
            }
            next = 0.5 * (lo + hi);
        }
        x = next;
    }
    if resid.abs() <= 1e-9 {
        Ok(x)
    } else if collapsed(lo, hi) {
        // The quantile sits between adjacent doubles; report the smallest
        // representable point whose CDF reaches q.
        Ok(hi)
    } else {
        Err(Error::NonConvergence {
            routine: "beta_quantile",
            iterations: QUANTILE_MAX_ITER,
            detail: format!("q={q}, alpha={a}, beta={b}, x={x}, residual={resid:e}, bracket=[{lo}, {hi}]"),
        })
    }
}

fn collapsed(lo: f64, hi: f64) -> bool {
    let mid = 0.5 * (lo + hi);
    mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * hi
}

fn initial_guess(q: f64, a: f64, b: f64) -> f64 {
    // Tail approximations for small/large q, the mean otherwise.
    let mean = a / (a + b);
    let guess = if q < 0.5 * mean.min(0.5) {
        // I_x(a, b) ~ x^a / (a B(a, b)) near zero.
        ((q * a).ln() + ln_beta_pos(a, b)).exp().powf(1.0 / a)
    } else if 1.0 - q < 0.5 * (1.0 - mean).min(0.5) {
        1.0 - (((1.0 - q) * b).ln() + ln_beta_pos(a, b)).exp().powf(1.0 / b)
    } else {
        mean
    };
    if guess > 0.0 && guess < 1.0 {
        guess
    } else {
        mean
    }
}
