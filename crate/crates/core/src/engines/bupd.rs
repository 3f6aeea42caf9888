use rand::Rng;

use super::mcmc::{accept, Adaptive, Draws, Run};
use super::{McmcConfig, ModelKind, ModelSpec, PosteriorSummary};
use crate::divergence::{weights_from_divergence, DivergenceMatrix, WeightVector};
use crate::numcore::{
    ln_beta_pos, ln_gamma_pos, sample_beta, sample_dirichlet, sample_gamma, sample_normal, BetaParams, RngStream,
};
use crate::uip::{PriorKernel, TrialData, UipPrior};
use crate::{Error, Result};

const RATE_FLOOR: f64 = 1e-300;

/// Current rates with their logs, which every prior evaluation reuses.
struct Rates {
    pi: Vec<f64>,
    ln_pi: Vec<f64>,
    ln_1m_pi: Vec<f64>,
}

impl Rates {
    fn new(dim: usize) -> Self {
        Self {
            pi: vec![0.5; dim],
            ln_pi: vec![0.5f64.ln(); dim],
            ln_1m_pi: vec![0.5f64.ln(); dim],
        }
    }

    fn set(&mut self, i: usize, p: f64) {
        self.pi[i] = p;
        self.ln_pi[i] = p.ln();
        self.ln_1m_pi[i] = (-p).ln_1p();
    }
}

/// Sum of the beta log densities of the rates under `prior`.
fn log_target(prior: &UipPrior, rates: &Rates) -> f64 {
    let mut v = 0.0;
    for i in 0..rates.pi.len() {
        let p = prior.params(i);
        v += (p.alpha() - 1.0) * rates.ln_pi[i] + (p.beta() - 1.0) * rates.ln_1m_pi[i] - ln_beta_pos(p.alpha(), p.beta());
    }
    v
}

fn ln_dirichlet(ln_z: &[f64], conc: &[f64]) -> f64 {
    let total: f64 = conc.iter().sum();
    let mut v = ln_gamma_pos(total);
    for (&lz, &a) in ln_z.iter().zip(conc) {
        v += (a - 1.0) * lz - ln_gamma_pos(a);
    }
    v
}

/// Folds `x` back into `(0, upper)` by reflecting at both ends.
fn reflect(x: f64, upper: f64) -> f64 {
    let y = x.rem_euclid(2.0 * upper);
    if y > upper {
        2.0 * upper - y
    } else {
        y
    }
}

enum WeightBlock {
    Pairs {
        z: Vec<f64>,
        ln_z: Vec<f64>,
        concentration: f64,
        offset: f64,
        adapt: Option<Adaptive>,
    },
    Temperature {
        d: DivergenceMatrix,
        s: f64,
        shape: f64,
        rate: f64,
        adapt: Option<Adaptive>,
    },
}

impl WeightBlock {
    fn weights(&self, dim: usize) -> Result<WeightVector> {
        match self {
            WeightBlock::Pairs { z, .. } => WeightVector::from_pair_mass(dim, z),
            WeightBlock::Temperature { d, s, .. } => weights_from_divergence(d, *s),
        }
    }
}

struct Chain<'a> {
    kernel: PriorKernel,
    data: &'a TrialData,
    m: f64,
    m_upper: f64,
    weights: WeightVector,
    prior: UipPrior,
    /// Log prior density of the current rates under the current prior.
    current: f64,
}

impl Chain<'_> {
    fn update_rates(&mut self, rng: &mut RngStream, rates: &mut Rates) {
        for i in 0..rates.pi.len() {
            let post = self.prior.params(i).update(self.data.x()[i], self.data.n()[i]);
            rates.set(i, sample_beta(rng, &post).clamp(RATE_FLOOR, 1.0 - f64::EPSILON));
        }
        self.current = log_target(&self.prior, rates);
    }

    fn adopt(&mut self, weights: Option<WeightVector>, prior: UipPrior, target: f64) {
        if let Some(w) = weights {
            self.weights = w;
        }
        self.prior = prior;
        self.current = target;
    }

    fn update_weights(&mut self, block: &mut WeightBlock, pi: &Rates, rng: &mut RngStream, cfg: &McmcConfig, t: usize) -> Result<()> {
        let dim = self.data.dim();
        match block {
            WeightBlock::Pairs {
                z,
                ln_z,
                concentration,
                offset,
                adapt: Some(adapt),
            } => {
                let kappa = adapt.scale();
                let forward: Vec<f64> = z.iter().map(|v| kappa * v + *offset).collect();
                let proposal = sample_dirichlet(rng, &forward)?;
                let u: f64 = rng.random();
                let mut accepted = false;
                if proposal.iter().all(|&v| v > 0.0) {
                    let weights = WeightVector::from_pair_mass(dim, &proposal)?;
                    let prior = self.kernel.build(&weights, self.m)?;
                    let reverse: Vec<f64> = proposal.iter().map(|v| kappa * v + *offset).collect();
                    let ln_prop: Vec<f64> = proposal.iter().map(|v| v.ln()).collect();
                    let prior_ratio = (*concentration - 1.0) * (ln_prop.iter().sum::<f64>() - ln_z.iter().sum::<f64>());
                    let target = log_target(&prior, pi);
                    let log_ratio =
                        target - self.current + prior_ratio + ln_dirichlet(ln_z, &reverse) - ln_dirichlet(&ln_prop, &forward);
                    if accept(log_ratio, u) {
                        *z = proposal;
                        *ln_z = ln_prop;
                        self.adopt(Some(weights), prior, target);
                        accepted = true;
                    }
                }
                adapt.record(accepted, cfg, t);
            }
            WeightBlock::Temperature {
                d,
                s,
                shape,
                rate,
                adapt: Some(adapt),
            } => {
                let log_s = s.ln() + sample_normal(rng, 0.0, adapt.scale());
                let u: f64 = rng.random();
                let proposal = log_s.exp();
                let mut accepted = false;
                if proposal > 0.0 && proposal.is_finite() {
                    let weights = weights_from_divergence(d, proposal)?;
                    let prior = self.kernel.build(&weights, self.m)?;
                    // Gamma prior on s plus the Jacobian of the log transform.
                    let prior_ratio = *shape * (log_s - s.ln()) - *rate * (proposal - *s);
                    let target = log_target(&prior, pi);
                    if accept(target - self.current + prior_ratio, u) {
                        *s = proposal;
                        self.adopt(Some(weights), prior, target);
                        accepted = true;
                    }
                }
                adapt.record(accepted, cfg, t);
            }
            _ => {}
        }
        Ok(())
    }

    fn update_m(&mut self, adapt: &mut Adaptive, pi: &Rates, rng: &mut RngStream, cfg: &McmcConfig, t: usize) -> Result<()> {
        let proposal = reflect(self.m + sample_normal(rng, 0.0, adapt.scale()), self.m_upper);
        let u: f64 = rng.random();
        let mut accepted = false;
        if proposal > 0.0 {
            let prior = self.kernel.build(&self.weights, proposal)?;
            let target = log_target(&prior, pi);
            if accept(target - self.current, u) {
                self.m = proposal;
                self.adopt(None, prior, target);
                accepted = true;
            }
        }
        adapt.record(accepted, cfg, t);
        Ok(())
    }
}

fn run(model: ModelKind, data: &TrialData, spec: &ModelSpec, mcmc: &McmcConfig, rng: &mut RngStream, mut block: WeightBlock) -> Result<Run> {
    let dim = data.dim();
    let m_upper = spec.total_borrowed;
    let m = match mcmc.frozen.total_borrowed {
        Some(m) if !(m > 0.0 && m.is_finite()) => {
            return Err(Error::validation(format!("frozen M must be positive, got {m}")));
        }
        Some(m) => m,
        None => 0.5 * m_upper,
    };
    let kernel = PriorKernel::from_data(data, spec.clamp_rate)?;
    if kernel.is_inert() {
        return independent_draws(data, mcmc, rng, &mut block, mcmc.frozen.total_borrowed, m_upper);
    }
    let weights = block.weights(dim)?;
    let prior = kernel.build(&weights, m)?;
    let mut chain = Chain {
        kernel,
        data,
        m,
        m_upper,
        weights,
        prior,
        current: 0.0,
    };
    let mut m_adapt = mcmc
        .frozen
        .total_borrowed
        .is_none()
        .then(|| Adaptive::new("M", mcmc.m_step.min(m_upper), 0.44));
    let mut rates = Rates::new(dim);
    let mut draws = Draws::new(dim, mcmc.retained());
    for t in 0..mcmc.total() {
        chain.update_rates(rng, &mut rates);
        chain.update_weights(&mut block, &rates, rng, mcmc, t)?;
        if let Some(adapt) = m_adapt.as_mut() {
            chain.update_m(adapt, &rates, rng, mcmc, t)?;
        }
        if mcmc.keeps(t) {
            draws.push_rates(&rates.pi);
            let s = match &block {
                WeightBlock::Temperature { s, .. } => Some(*s),
                WeightBlock::Pairs { .. } => None,
            };
            draws.push_hyper(chain.m, |i, j| chain.weights.get(i, j), s);
        }
    }
    let weight_adapt = match &block {
        WeightBlock::Pairs { adapt, .. } | WeightBlock::Temperature { adapt, .. } => adapt.as_ref(),
    };
    let acceptance = weight_adapt
        .into_iter()
        .chain(m_adapt.as_ref())
        .map(|a| a.finish(model))
        .collect::<Result<_>>()?;
    Ok(Run {
        draws,
        acceptance,
        has_weights: true,
        has_s: matches!(block, WeightBlock::Temperature { .. }),
    })
}

/// Exact draws for data that leave every prior at `Beta(1, 1)`: the rates
/// are independent of the hyperparameters, which keep their priors.
fn independent_draws(
    data: &TrialData,
    mcmc: &McmcConfig,
    rng: &mut RngStream,
    block: &mut WeightBlock,
    frozen_m: Option<f64>,
    m_upper: f64,
) -> Result<Run> {
    let dim = data.dim();
    let posts: Vec<BetaParams> = (0..dim).map(|i| BetaParams::uniform().update(data.x()[i], data.n()[i])).collect();
    let mut draws = Draws::new(dim, mcmc.retained());
    let mut pi = vec![0.0; dim];
    for _ in 0..mcmc.retained() {
        for (p, post) in pi.iter_mut().zip(&posts) {
            *p = sample_beta(rng, post);
        }
        let m = frozen_m.unwrap_or_else(|| m_upper * rng.random::<f64>());
        let s = match block {
            WeightBlock::Pairs {
                z,
                concentration,
                adapt: Some(_),
                ..
            } => {
                *z = sample_dirichlet(rng, &vec![*concentration; z.len()])?;
                None
            }
            WeightBlock::Temperature {
                s, shape, rate, adapt, ..
            } => {
                if adapt.is_some() {
                    // Small shapes can underflow; the weights have reached
                    // their limit long before.
                    *s = sample_gamma(rng, *shape, *rate)?.max(f64::MIN_POSITIVE);
                }
                Some(*s)
            }
            WeightBlock::Pairs { .. } => None,
        };
        let weights = block.weights(dim)?;
        draws.push_rates(&pi);
        draws.push_hyper(m, |i, j| weights.get(i, j), s);
    }
    Ok(Run {
        draws,
        acceptance: Vec::new(),
        has_weights: true,
        has_s: matches!(block, WeightBlock::Temperature { .. }),
    })
}

/// Unit-information prior with Dirichlet pair masses and uniform `M` on
/// `(0, total_borrowed)`.
pub fn fit_bupd_d(data: &TrialData, spec: &ModelSpec, mcmc: &McmcConfig, rng: &mut RngStream) -> Result<PosteriorSummary> {
    Ok(sample_bupd_d(data, spec, mcmc, rng)?.summarize(ModelKind::BupdD, data, spec.pi_h0))
}

pub(crate) fn sample_bupd_d(data: &TrialData, spec: &ModelSpec, mcmc: &McmcConfig, rng: &mut RngStream) -> Result<Run> {
    spec.validate()?;
    mcmc.validate()?;
    let pairs = data.dim() * (data.dim() - 1) / 2;
    let (z, adapt) = match &mcmc.frozen.pair_mass {
        Some(z) => (z.clone(), None),
        None => (
            vec![1.0 / pairs as f64; pairs],
            Some(Adaptive::new("z", mcmc.pair_concentration, 0.3).inverted()),
        ),
    };
    let block = WeightBlock::Pairs {
        ln_z: z.iter().map(|v| v.ln()).collect(),
        z,
        concentration: spec.dirichlet_concentration,
        offset: mcmc.pair_offset,
        adapt,
    };
    run(ModelKind::BupdD, data, spec, mcmc, rng, block)
}

/// Unit-information prior with divergence weights at a gamma-distributed
/// temperature `s` and uniform `M` on `(0, total_borrowed)`.
pub fn fit_bupd_jsh(data: &TrialData, spec: &ModelSpec, mcmc: &McmcConfig, rng: &mut RngStream) -> Result<PosteriorSummary> {
    Ok(sample_bupd_jsh(data, spec, mcmc, rng)?.summarize(ModelKind::BupdJsh, data, spec.pi_h0))
}

pub(crate) fn sample_bupd_jsh(data: &TrialData, spec: &ModelSpec, mcmc: &McmcConfig, rng: &mut RngStream) -> Result<Run> {
    spec.validate()?;
    mcmc.validate()?;
    let (s, adapt) = match mcmc.frozen.temperature {
        Some(s) if !(s > 0.0 && s.is_finite()) => {
            return Err(Error::validation(format!("frozen temperature must be positive, got {s}")));
        }
        Some(s) => (s, None),
        None => (1.0, Some(Adaptive::new("log s", mcmc.log_s_step, 0.44))),
    };
    let block = WeightBlock::Temperature {
        d: DivergenceMatrix::jeffreys(&data.arms())?,
        s,
        shape: spec.temperature_shape,
        rate: spec.temperature_rate,
        adapt,
    };
    run(ModelKind::BupdJsh, data, spec, mcmc, rng, block)
}
