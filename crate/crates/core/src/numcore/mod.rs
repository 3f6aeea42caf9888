//! Numerical building blocks shared by every other module: special
//! functions, the beta distribution, adaptive quadrature, seeded random
//! streams and the samplers built on them.

mod beta;
mod quad;
mod rng;
mod sample;
mod special;

pub use beta::{beta_cdf, beta_ln_pdf, beta_pdf, beta_quantile, beta_sf, BetaParams};
pub use quad::{integrate, Integral, QuadConfig};
pub use rng::RngStream;
pub use sample::{
    sample_beta, sample_binomial, sample_dirichlet, sample_gamma, sample_multinomial,
    sample_normal,
};
pub use special::{digamma, ln_beta, log_gamma};
pub(crate) use special::{ln_beta_pos, ln_gamma_pos};

/// `ln(1 + e^x)` without overflow for large `x`.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
