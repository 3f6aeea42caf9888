//! Posterior inference for the six supported models and the efficacy
//! decision rule.
//!
//! BBM-NB, BBM-JS and BUPD-JS have closed-form beta posteriors. BHM, BUPD-D
//! and BUPD-JSH are fitted by Metropolis-within-Gibbs.

mod bhm;
mod bupd;
mod closed;
mod mcmc;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numcore::{logit, RngStream};
use crate::uip::TrialData;
use crate::{Error, Result};

pub use bhm::fit_bhm;
pub use bupd::{fit_bupd_d, fit_bupd_jsh};
pub use closed::{fit_bbm_js, fit_bbm_nb, fit_bupd_js};
pub use mcmc::{BlockRate, FrozenHyper, McmcConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "BBM-NB")]
    BbmNb,
    #[serde(rename = "BBM-JS")]
    BbmJs,
    #[serde(rename = "BHM")]
    Bhm,
    #[serde(rename = "BUPD-D")]
    BupdD,
    #[serde(rename = "BUPD-JS")]
    BupdJs,
    #[serde(rename = "BUPD-JSH")]
    BupdJsh,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::BbmNb,
        ModelKind::BbmJs,
        ModelKind::Bhm,
        ModelKind::BupdD,
        ModelKind::BupdJs,
        ModelKind::BupdJsh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::BbmNb => "BBM-NB",
            ModelKind::BbmJs => "BBM-JS",
            ModelKind::Bhm => "BHM",
            ModelKind::BupdD => "BUPD-D",
            ModelKind::BupdJs => "BUPD-JS",
            ModelKind::BupdJsh => "BUPD-JSH",
        }
    }

    /// Fitted by MCMC rather than in closed form.
    pub fn is_sampler(self) -> bool {
        matches!(self, ModelKind::Bhm | ModelKind::BupdD | ModelKind::BupdJsh)
    }

    /// Borrows through a unit-information prior.
    pub fn is_bupd(self) -> bool {
        matches!(self, ModelKind::BupdD | ModelKind::BupdJs | ModelKind::BupdJsh)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::validation(format!(
                    "unknown model `{s}`; expected one of BBM-NB, BBM-JS, BHM, BUPD-D, BUPD-JS, BUPD-JSH"
                ))
            })
    }
}

/// Model choice, hypothesis rates and hyperparameters. Fields irrelevant to
/// `kind` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub pi_h0: f64,
    pub pi_h1: f64,
    /// Fixed `M` for BUPD-JS, upper bound of the uniform prior on `M` for
    /// BUPD-D and BUPD-JSH.
    pub total_borrowed: f64,
    pub clamp_rate: f64,
    /// BBM-JS similarity exponent.
    pub js_exponent: f64,
    /// BBM-JS similarity threshold below which nothing is borrowed.
    pub js_threshold: f64,
    /// BHM prior mean of the common log-odds; defaults to the logit of the
    /// midpoint of the hypothesis rates.
    pub bhm_mean: Option<f64>,
    pub bhm_variance: f64,
    pub precision_shape: f64,
    pub precision_rate: f64,
    /// Symmetric Dirichlet concentration on the BUPD-D pair masses.
    pub dirichlet_concentration: f64,
    pub temperature_shape: f64,
    pub temperature_rate: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::BbmNb,
            pi_h0: 0.10,
            pi_h1: 0.40,
            total_borrowed: 72.0,
            clamp_rate: crate::uip::DEFAULT_CLAMP_RATE,
            js_exponent: 2.0,
            js_threshold: 0.5,
            bhm_mean: None,
            bhm_variance: 100.0,
            precision_shape: 2.0,
            precision_rate: 2.0,
            dirichlet_concentration: 1.0,
            temperature_shape: 0.01,
            temperature_rate: 0.01,
        }
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn with_hypotheses(mut self, pi_h0: f64, pi_h1: f64) -> Self {
        self.pi_h0 = pi_h0;
        self.pi_h1 = pi_h1;
        self
    }

    pub fn with_total_borrowed(mut self, m: f64) -> Self {
        self.total_borrowed = m;
        self
    }

    pub fn bhm_prior_mean(&self) -> f64 {
        self.bhm_mean
            .unwrap_or_else(|| logit(0.5 * (self.pi_h0 + self.pi_h1)))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pi_h0 > 0.0 && self.pi_h0 < self.pi_h1 && self.pi_h1 < 1.0) {
            return Err(Error::validation(format!(
                "hypothesis rates must satisfy 0 < pi_h0 < pi_h1 < 1, got {} and {}",
                self.pi_h0, self.pi_h1
            )));
        }
        let positive = [
            ("total_borrowed", self.total_borrowed),
            ("js_exponent", self.js_exponent),
            ("bhm_variance", self.bhm_variance),
            ("precision_shape", self.precision_shape),
            ("precision_rate", self.precision_rate),
            ("dirichlet_concentration", self.dirichlet_concentration),
            ("temperature_shape", self.temperature_shape),
            ("temperature_rate", self.temperature_rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.js_threshold > 0.0 && self.js_threshold < 1.0) {
            return Err(Error::validation(format!("js_threshold must lie in (0, 1), got {}", self.js_threshold)));
        }
        if !(self.clamp_rate > 0.0 && self.clamp_rate < 0.5) {
            return Err(Error::validation(format!("clamp_rate must lie in (0, 0.5), got {}", self.clamp_rate)));
        }
        if let Some(m) = self.bhm_mean {
            if !m.is_finite() {
                return Err(Error::validation("bhm_mean must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeSummary {
    pub label: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    /// `Pr(pi_i > pi_H0 | data)`
    pub pp: f64,
    /// `alpha_i + beta_i` of the beta prior, where the model has one.
    pub prior_ess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub model: ModelKind,
    pub pi_h0: f64,
    pub types: Vec<TypeSummary>,
    /// Posterior mean of `M w_ij`, diagonal zero.
    pub borrowing: Option<Vec<Vec<f64>>>,
    /// Posterior mean of `M`.
    pub total_borrowed: Option<f64>,
    /// Posterior mean of the divergence temperature `s`.
    pub temperature: Option<f64>,
    pub acceptance: Vec<BlockRate>,
    /// Types whose prior fell back to `Beta(1, 1)`.
    pub fallbacks: Vec<usize>,
}

impl PosteriorSummary {
    pub fn means(&self) -> Vec<f64> {
        self.types.iter().map(|t| t.mean).collect()
    }

    pub fn pps(&self) -> Vec<f64> {
        self.types.iter().map(|t| t.pp).collect()
    }
}

/// Fits any model; closed-form models leave `rng` untouched.
pub fn fit(data: &TrialData, spec: &ModelSpec, mcmc: &McmcConfig, rng: &mut RngStream) -> Result<PosteriorSummary> {
    match spec.kind {
        ModelKind::BbmNb => fit_bbm_nb(data, spec),
        ModelKind::BbmJs => fit_bbm_js(data, spec),
        ModelKind::BupdJs => fit_bupd_js(data, spec),
        ModelKind::Bhm => fit_bhm(data, spec, mcmc, rng),
        ModelKind::BupdD => fit_bupd_d(data, spec, mcmc, rng),
        ModelKind::BupdJsh => fit_bupd_jsh(data, spec, mcmc, rng),
    }
}

/// Retained draws of every response rate, one vector per type, from a
/// sampler model.
pub fn sample_rates(data: &TrialData, spec: &ModelSpec, mcmc: &McmcConfig, rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
    let run = match spec.kind {
        ModelKind::Bhm => bhm::sample_bhm(data, spec, mcmc, rng)?,
        ModelKind::BupdD => bupd::sample_bupd_d(data, spec, mcmc, rng)?,
        ModelKind::BupdJsh => bupd::sample_bupd_jsh(data, spec, mcmc, rng)?,
        kind => return Err(Error::validation(format!("{kind} is fitted in closed form and has no draws"))),
    };
    Ok(run.draws.into_rates())
}

/// Declares efficacy for type `i` when `PP_i > c`.
pub fn decide_efficacy(summary: &PosteriorSummary, c: f64) -> Vec<bool> {
    summary.types.iter().map(|t| t.pp > c).collect()
}
