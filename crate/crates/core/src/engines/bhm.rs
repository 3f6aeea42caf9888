use rand::Rng;

use super::mcmc::{accept, Adaptive, Draws, Run};
use super::{McmcConfig, ModelKind, ModelSpec, PosteriorSummary};
use crate::numcore::{inv_logit, log1p_exp, logit, sample_gamma, sample_normal, RngStream};
use crate::uip::TrialData;
use crate::{Error, Result};

fn log_lik(theta: f64, x: f64, n: f64) -> f64 {
    x * theta - n * log1p_exp(theta)
}

/// Normal hierarchy on the log-odds `theta_i ~ N(mu, 1/tau)` with a normal
/// prior on `mu` and a gamma prior on the precision `tau`.
pub fn fit_bhm(data: &TrialData, spec: &ModelSpec, mcmc: &McmcConfig, rng: &mut RngStream) -> Result<PosteriorSummary> {
    Ok(sample_bhm(data, spec, mcmc, rng)?.summarize(ModelKind::Bhm, data, spec.pi_h0))
}

pub(crate) fn sample_bhm(data: &TrialData, spec: &ModelSpec, mcmc: &McmcConfig, rng: &mut RngStream) -> Result<Run> {
    spec.validate()?;
    mcmc.validate()?;
    if data.dim() < 2 {
        return Err(Error::validation("the hierarchical model needs at least two types"));
    }
    let dim = data.dim();
    let x: Vec<f64> = data.x().iter().map(|&v| v as f64).collect();
    let n: Vec<f64> = data.n().iter().map(|&v| v as f64).collect();
    let mut theta: Vec<f64> = x.iter().zip(&n).map(|(x, n)| logit((x + 0.5) / (n + 1.0))).collect();
    let prior_mean = spec.bhm_prior_mean();
    let prior_precision = 1.0 / spec.bhm_variance;
    let mut mu = theta.iter().sum::<f64>() / dim as f64;
    let mut tau = match mcmc.frozen.precision {
        Some(t) if !(t > 0.0 && t.is_finite()) => {
            return Err(Error::validation(format!("frozen precision must be positive, got {t}")));
        }
        Some(t) => t,
        None => 1.0,
    };
    let mut adapt: Vec<Adaptive> = (0..dim)
        .map(|i| Adaptive::new(format!("theta[{}]", i + 1), mcmc.theta_step, 0.44))
        .collect();
    let mut draws = Draws::new(dim, mcmc.retained());
    let mut pi = vec![0.0; dim];
    for t in 0..mcmc.total() {
        for i in 0..dim {
            let proposal = theta[i] + sample_normal(rng, 0.0, adapt[i].scale());
            let u: f64 = rng.random();
            let log_ratio = log_lik(proposal, x[i], n[i]) - log_lik(theta[i], x[i], n[i])
                - 0.5 * tau * ((proposal - mu).powi(2) - (theta[i] - mu).powi(2));
            let ok = accept(log_ratio, u);
            if ok {
                theta[i] = proposal;
            }
            adapt[i].record(ok, mcmc, t);
        }
        let precision = prior_precision + dim as f64 * tau;
        let centre = (prior_mean * prior_precision + tau * theta.iter().sum::<f64>()) / precision;
        mu = sample_normal(rng, centre, precision.sqrt().recip());
        if mcmc.frozen.precision.is_none() {
            let ss: f64 = theta.iter().map(|v| (v - mu).powi(2)).sum();
            tau = sample_gamma(rng, spec.precision_shape + 0.5 * dim as f64, spec.precision_rate + 0.5 * ss)?;
        }
        if mcmc.keeps(t) {
            for (p, &th) in pi.iter_mut().zip(&theta) {
                *p = inv_logit(th);
            }
            draws.push_rates(&pi);
        }
    }
    Ok(Run {
        draws,
        acceptance: adapt.iter().map(|a| a.finish(ModelKind::Bhm)).collect::<Result<_>>()?,
        has_weights: false,
        has_s: false,
    })
}
