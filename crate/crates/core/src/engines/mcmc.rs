use serde::{Deserialize, Serialize};

use super::{ModelKind, PosteriorSummary, TypeSummary};
use crate::uip::TrialData;
use crate::{Error, Result};

/// Hyperparameters to hold fixed instead of sampling. Each populated field
/// freezes its block; used to check the samplers against closed forms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrozenHyper {
    pub total_borrowed: Option<f64>,
    pub pair_mass: Option<Vec<f64>>,
    pub temperature: Option<f64>,
    pub precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    pub burn_in: usize,
    pub iterations: usize,
    pub thin: usize,
    /// Burn-in iterations between step-size updates.
    pub adapt_every: usize,
    /// Initial Dirichlet proposal concentration for the pair masses.
    pub pair_concentration: f64,
    /// Added to every Dirichlet proposal parameter.
    pub pair_offset: f64,
    /// Initial random-walk scales for `M`, `ln s` and each log-odds.
    pub m_step: f64,
    pub log_s_step: f64,
    pub theta_step: f64,
    #[serde(skip_serializing_if = "is_unfrozen")]
    pub frozen: FrozenHyper,
}

fn is_unfrozen(f: &FrozenHyper) -> bool {
    *f == FrozenHyper::default()
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            burn_in: 2000,
            iterations: 20000,
            thin: 2,
            adapt_every: 50,
            pair_concentration: 200.0,
            pair_offset: 0.5,
            m_step: 10.0,
            log_s_step: 1.0,
            theta_step: 0.5,
            frozen: FrozenHyper::default(),
        }
    }
}

impl McmcConfig {
    pub fn retained(&self) -> usize {
        self.iterations / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 || self.retained() == 0 {
            return Err(Error::validation(format!(
                "mcmc schedule retains no draws ({} iterations, thin {})",
                self.iterations, self.thin
            )));
        }
        if self.adapt_every == 0 {
            return Err(Error::validation("adapt_every must be at least 1"));
        }
        for (name, v) in [
            ("pair_concentration", self.pair_concentration),
            ("pair_offset", self.pair_offset),
            ("m_step", self.m_step),
            ("log_s_step", self.log_s_step),
            ("theta_step", self.theta_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub(crate) fn total(&self) -> usize {
        self.burn_in + self.iterations
    }

    pub(crate) fn in_burn_in(&self, t: usize) -> bool {
        t < self.burn_in
    }

    pub(crate) fn keeps(&self, t: usize) -> bool {
        t >= self.burn_in && (t - self.burn_in + 1) % self.thin == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockRate {
    pub block: String,
    pub rate: f64,
    /// Proposal scale in force after burn-in.
    pub scale: f64,
}

/// Metropolis block whose log step size is tuned during burn-in, then
/// frozen.
#[derive(Debug, Clone)]
pub(crate) struct Adaptive {
    name: String,
    log_scale: f64,
    target: f64,
    batch_tried: usize,
    batch_accepted: usize,
    batches: usize,
    tried: usize,
    accepted: usize,
    /// Larger scale means smaller moves (a concentration rather than a step).
    inverted: bool,
}

const MAX_LOG_SCALE: f64 = 12.0;

impl Adaptive {
    pub fn new(name: impl Into<String>, scale: f64, target: f64) -> Self {
        Self {
            name: name.into(),
            log_scale: scale.ln(),
            target,
            batch_tried: 0,
            batch_accepted: 0,
            batches: 0,
            tried: 0,
            accepted: 0,
            inverted: false,
        }
    }

    pub fn inverted(mut self) -> Self {
        self.inverted = true;
        self
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    pub fn record(&mut self, accepted: bool, cfg: &McmcConfig, t: usize) {
        if cfg.in_burn_in(t) {
            self.batch_tried += 1;
            self.batch_accepted += accepted as usize;
            if self.batch_tried == cfg.adapt_every {
                self.batches += 1;
                let rate = self.batch_accepted as f64 / self.batch_tried as f64;
                let gain = 3.0 / (self.batches as f64).sqrt();
                let delta = gain * (rate - self.target);
                self.log_scale += if self.inverted { -delta } else { delta };
                self.log_scale = self.log_scale.clamp(-MAX_LOG_SCALE, MAX_LOG_SCALE);
                self.batch_tried = 0;
                self.batch_accepted = 0;
            }
        } else {
            self.tried += 1;
            self.accepted += accepted as usize;
        }
    }

    pub fn finish(&self, model: ModelKind) -> Result<BlockRate> {
        let rate = if self.tried == 0 {
            0.0
        } else {
            self.accepted as f64 / self.tried as f64
        };
        if !(0.05..=0.95).contains(&rate) {
            return Err(Error::Sampler {
                block: format!("{model} {}", self.name),
                rate,
            });
        }
        Ok(BlockRate {
            block: self.name.clone(),
            rate,
            scale: self.scale(),
        })
    }
}

/// A finished chain: retained draws plus per-block acceptance.
pub(crate) struct Run {
    pub draws: Draws,
    pub acceptance: Vec<BlockRate>,
    pub has_weights: bool,
    pub has_s: bool,
}

impl Run {
    pub fn summarize(self, model: ModelKind, data: &TrialData, pi_h0: f64) -> PosteriorSummary {
        let mut s = self.draws.into_summary(model, data, pi_h0, self.has_weights, self.has_s);
        s.acceptance = self.acceptance;
        s
    }
}

/// Metropolis acceptance from a log ratio and a uniform draw.
pub(crate) fn accept(log_ratio: f64, u: f64) -> bool {
    log_ratio >= 0.0 || u.ln() < log_ratio
}

/// Sample quantile with linear interpolation between order statistics.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Retained draws of every response rate plus running sums of the
/// hyperparameter summaries.
pub(crate) struct Draws {
    dim: usize,
    rates: Vec<Vec<f64>>,
    borrowing: Vec<f64>,
    m_sum: f64,
    s_sum: f64,
    kept: usize,
}

impl Draws {
    pub fn new(dim: usize, capacity: usize) -> Self {
        Self {
            dim,
            rates: vec![Vec::with_capacity(capacity); dim],
            borrowing: vec![0.0; dim * dim],
            m_sum: 0.0,
            s_sum: 0.0,
            kept: 0,
        }
    }

    pub fn push_rates(&mut self, pi: &[f64]) {
        for (store, &p) in self.rates.iter_mut().zip(pi) {
            store.push(p);
        }
        self.kept += 1;
    }

    pub fn push_hyper(&mut self, m: f64, weight: impl Fn(usize, usize) -> f64, s: Option<f64>) {
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    self.borrowing[i * self.dim + j] += m * weight(i, j);
                }
            }
        }
        self.m_sum += m;
        self.s_sum += s.unwrap_or(0.0);
    }

    pub fn into_rates(self) -> Vec<Vec<f64>> {
        self.rates
    }

    pub fn into_summary(self, model: ModelKind, data: &TrialData, pi_h0: f64, has_weights: bool, has_s: bool) -> PosteriorSummary {
        let kept = self.kept as f64;
        let types = self
            .rates
            .into_iter()
            .enumerate()
            .map(|(i, mut draws)| {
                let mean = draws.iter().sum::<f64>() / kept;
                let pp = draws.iter().filter(|&&p| p > pi_h0).count() as f64 / kept;
                draws.sort_by(f64::total_cmp);
                TypeSummary {
                    label: data.labels()[i].clone(),
                    mean,
                    lower: quantile(&draws, 0.025),
                    upper: quantile(&draws, 0.975),
                    pp,
                    prior_ess: None,
                }
            })
            .collect();
        let dim = self.dim;
        PosteriorSummary {
            model,
            pi_h0,
            types,
            borrowing: has_weights.then(|| {
                (0..dim)
                    .map(|i| (0..dim).map(|j| self.borrowing[i * dim + j] / kept).collect())
                    .collect()
            }),
            total_borrowed: has_weights.then(|| self.m_sum / kept),
            temperature: has_s.then(|| self.s_sum / kept),
            acceptance: Vec::new(),
            fallbacks: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_counts() {
        let cfg = McmcConfig::default();
        assert_eq!(cfg.retained(), 10000);
        let kept = (0..cfg.total()).filter(|&t| cfg.keeps(t)).count();
        assert_eq!(kept, 10000);
        assert!(!cfg.keeps(cfg.burn_in) && cfg.keeps(cfg.burn_in + 1));
        let bad = McmcConfig {
            iterations: 1,
            thin: 2,
            ..McmcConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let v: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(quantile(&v, 0.025), 2.5);
        assert_eq!(quantile(&v, 0.5), 50.0);
        assert_eq!(quantile(&[3.0], 0.9), 3.0);
    }

    #[test]
    fn adaptation_moves_towards_target() {
        let cfg = McmcConfig {
            burn_in: 500,
            ..McmcConfig::default()
        };
        let mut always = Adaptive::new("a", 1.0, 0.44);
        let mut never = Adaptive::new("b", 1.0, 0.44);
        let mut conc = Adaptive::new("c", 1.0, 0.3).inverted();
        for t in 0..500 {
            always.record(true, &cfg, t);
            never.record(false, &cfg, t);
            conc.record(true, &cfg, t);
        }
        assert!(always.scale() > 1.0 && never.scale() < 1.0 && conc.scale() < 1.0);
        let frozen = always.scale();
        always.record(true, &cfg, 600);
        assert_eq!(always.scale(), frozen);
        assert!(always.finish(ModelKind::Bhm).is_err());
    }
}
