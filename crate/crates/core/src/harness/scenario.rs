use serde::{Deserialize, Serialize};

use crate::numcore::{sample_binomial, sample_multinomial, RngStream};
use crate::uip::TrialData;
use crate::{Error, Result};

use super::SimPlan;

/// True per-type response rates and which types count as effective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScenario")]
pub struct Scenario {
    name: String,
    rates: Vec<f64>,
    effective: Vec<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    rates: Vec<f64>,
    /// Defaults to `rate >= 0.40`.
    #[serde(default)]
    effective: Option<Vec<bool>>,
}

impl TryFrom<RawScenario> for Scenario {
    type Error = Error;

    fn try_from(raw: RawScenario) -> Result<Self> {
        let effective = raw
            .effective
            .unwrap_or_else(|| raw.rates.iter().map(|&r| r >= PRESET_H1).collect());
        Scenario::new(raw.name, raw.rates, effective)
    }
}

const PRESET_H0: f64 = 0.10;
const PRESET_H1: f64 = 0.40;

impl Scenario {
    pub fn new(name: impl Into<String>, rates: Vec<f64>, effective: Vec<bool>) -> Result<Self> {
        let name = name.into();
        if rates.len() < 2 || effective.len() != rates.len() {
            return Err(Error::validation(format!(
                "scenario `{name}`: need at least two rates and one flag per rate"
            )));
        }
        if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::validation(format!("scenario `{name}`: rate {r} outside [0, 1]")));
        }
        Ok(Self { name, rates, effective })
    }

    /// Every type at the same rate, none effective.
    pub fn null(dim: usize, rate: f64) -> Result<Self> {
        Self::new("null", vec![rate; dim], vec![false; dim])
    }

    /// Scenarios 1 to 8 of the six-type simulation study.
    pub fn preset(number: usize) -> Result<Self> {
        let (lo, hi) = (PRESET_H0, PRESET_H1);
        let rates = match number {
            1..=7 => (0..6).map(|i| if i + number >= 7 { hi } else { lo }).collect(),
            8 => vec![0.05, 0.10, 0.20, 0.30, 0.40, 0.50],
            _ => return Err(Error::validation(format!("no preset scenario {number}; choose 1 to 8"))),
        };
        let effective = match number {
            8 => vec![false, false, false, true, true, true],
            _ => rates.iter().map(|&r| r >= hi).collect(),
        };
        Self::new(number.to_string(), rates, effective)
    }

    pub fn presets() -> Vec<Self> {
        (1..=8).map(|k| Self::preset(k).expect("preset numbers are valid")).collect()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn effective(&self) -> &[bool] {
        &self.effective
    }

    pub fn dim(&self) -> usize {
        self.rates.len()
    }
}

/// Allocates `N` patients to types with equal multinomial probabilities,
/// then draws responders per type.
pub fn simulate_trial(scenario: &Scenario, plan: &SimPlan, rng: &mut RngStream) -> Result<TrialData> {
    if scenario.dim() != plan.dim {
        return Err(Error::validation(format!(
            "scenario `{}` has {} types, plan expects {}",
            scenario.name,
            scenario.dim(),
            plan.dim
        )));
    }
    let probs = vec![1.0 / plan.dim as f64; plan.dim];
    let n = sample_multinomial(rng, plan.total_n as u64, &probs)?;
    let x = n
        .iter()
        .zip(&scenario.rates)
        .map(|(&ni, &p)| sample_binomial(rng, ni, p).map(|v| v as u32))
        .collect::<Result<Vec<_>>>()?;
    TrialData::unlabeled(n.into_iter().map(|v| v as u32).collect(), x)
}
