//! Simulation of basket trials under fixed true rates, calibration of the
//! efficacy cutoff under the global null, and operating characteristics.

mod oc;
mod scenario;

use serde::{Deserialize, Serialize};

use crate::engines::{McmcConfig, ModelSpec};
use crate::{Error, Result};

pub use oc::{
    average_rates, calibrate_cutoff, run_oc, sweep, verify_cutoff, AverageRates, Calibration, CalibratedModel, OcResult,
    PpSummary, SweepCell, TypeOc,
};
pub use scenario::{simulate_trial, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimPlan {
    pub total_n: u32,
    pub dim: usize,
    pub replicates: usize,
    pub base_seed: u64,
    /// Hypothesis rates applied to every model the plan runs.
    pub pi_h0: f64,
    pub pi_h1: f64,
    pub mcmc: McmcConfig,
}

impl Default for SimPlan {
    fn default() -> Self {
        Self {
            total_n: 72,
            dim: 6,
            replicates: 2000,
            base_seed: 1,
            pi_h0: 0.10,
            pi_h1: 0.40,
            mcmc: McmcConfig::default(),
        }
    }
}

impl SimPlan {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 || (self.total_n as usize) < self.dim {
            return Err(Error::validation(format!(
                "plan needs N >= I >= 2, got N = {} and I = {}",
                self.total_n, self.dim
            )));
        }
        if self.replicates == 0 {
            return Err(Error::validation("plan needs at least one replicate"));
        }
        if !(self.pi_h0 > 0.0 && self.pi_h0 < self.pi_h1 && self.pi_h1 < 1.0) {
            return Err(Error::validation("plan hypothesis rates must satisfy 0 < pi_h0 < pi_h1 < 1"));
        }
        self.mcmc.validate()
    }

    /// `spec` with the plan's hypothesis rates.
    pub fn apply(&self, spec: &ModelSpec) -> ModelSpec {
        spec.clone().with_hypotheses(self.pi_h0, self.pi_h1)
    }

    pub fn null_scenario(&self) -> Result<Scenario> {
        Scenario::null(self.dim, self.pi_h0)
    }
}

/// Which part of a study a replicate belongs to. Each phase draws its data
/// and its sampler randomness from separate stream ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Phase {
    Calibration,
    Verification,
    Oc,
}

impl Phase {
    fn tag(self) -> u64 {
        match self {
            Phase::Calibration => 1,
            Phase::Verification => 2,
            Phase::Oc => 3,
        }
    }

    /// Stream ids for the trial data and the sampler of replicate `r`.
    /// Scenarios and models share these, so comparisons use common random
    /// numbers.
    pub(crate) fn streams(self, r: usize) -> (u64, u64) {
        let base = self.tag() << 48;
        (base | (r as u64), base | (1 << 40) | (r as u64))
    }
}
