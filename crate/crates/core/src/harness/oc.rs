use rayon::prelude::*;
use serde::Serialize;

use super::{simulate_trial, Phase, Scenario, SimPlan};
use crate::engines::{fit, ModelKind, ModelSpec, PosteriorSummary};
use crate::numcore::RngStream;
use crate::{Error, Result};

pub const MIN_CALIBRATION_REPLICATES: usize = 100;

fn replicate_fits(scenario: &Scenario, spec: &ModelSpec, plan: &SimPlan, phase: Phase) -> Result<Vec<PosteriorSummary>> {
    plan.validate()?;
    let spec = plan.apply(spec);
    spec.validate()?;
    let results: Vec<Result<PosteriorSummary>> = (0..plan.replicates)
        .into_par_iter()
        .map(|r| {
            let (data_id, mcmc_id) = phase.streams(r);
            let data = simulate_trial(scenario, plan, &mut RngStream::new(plan.base_seed, data_id))?;
            fit(&data, &spec, &plan.mcmc, &mut RngStream::new(plan.base_seed, mcmc_id))
        })
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::Replicate {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeOc {
    pub true_rate: f64,
    pub effective: bool,
    /// Power for effective types, type-1 error otherwise.
    pub rejection_rate: f64,
    /// Binomial standard error of the rejection rate.
    pub se: f64,
    /// Mean of posterior mean minus true rate.
    pub bias: f64,
    pub eti_width: f64,
    pub prior_ess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OcResult {
    pub scenario: String,
    pub model: ModelKind,
    pub cutoff: f64,
    pub replicates: usize,
    pub types: Vec<TypeOc>,
    /// Posterior means of `M`, `s` and `M w_ij`, averaged over replicates.
    pub total_borrowed: Option<f64>,
    pub temperature: Option<f64>,
    pub borrowing: Option<Vec<Vec<f64>>>,
}

impl OcResult {
    pub fn average_power(&self) -> Option<f64> {
        average_rates(&[self]).power
    }

    pub fn average_type1(&self) -> Option<f64> {
        average_rates(&[self]).type1
    }
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

fn aggregate(scenario: &Scenario, model: ModelKind, cutoff: f64, fits: &[PosteriorSummary]) -> OcResult {
    let reps = fits.len() as f64;
    let types = (0..scenario.dim())
        .map(|i| {
            let truth = scenario.rates()[i];
            let rejected = fits.iter().filter(|f| f.types[i].pp > cutoff).count() as f64;
            let p = rejected / reps;
            TypeOc {
                true_rate: truth,
                effective: scenario.effective()[i],
                rejection_rate: p,
                se: (p * (1.0 - p) / reps).sqrt(),
                bias: fits.iter().map(|f| f.types[i].mean - truth).sum::<f64>() / reps,
                eti_width: fits.iter().map(|f| f.types[i].upper - f.types[i].lower).sum::<f64>() / reps,
                prior_ess: mean_opt(fits.iter().map(|f| f.types[i].prior_ess)),
            }
        })
        .collect();
    let dim = scenario.dim();
    let borrowing = fits.iter().all(|f| f.borrowing.is_some()).then(|| {
        (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| fits.iter().map(|f| f.borrowing.as_ref().unwrap()[i][j]).sum::<f64>() / reps)
                    .collect()
            })
            .collect()
    });
    OcResult {
        scenario: scenario.name().to_owned(),
        model,
        cutoff,
        replicates: fits.len(),
        types,
        total_borrowed: mean_opt(fits.iter().map(|f| f.total_borrowed)),
        temperature: mean_opt(fits.iter().map(|f| f.temperature)),
        borrowing: if fits.is_empty() { None } else { borrowing },
    }
}

fn check_cutoff(c: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::validation(format!("cutoff must lie in [0, 1], got {c}")));
    }
    Ok(())
}

/// Simulates `plan.replicates` trials under `scenario`, fits each and
/// declares efficacy when `PP > c`.
pub fn run_oc(scenario: &Scenario, spec: &ModelSpec, plan: &SimPlan, c: f64) -> Result<OcResult> {
    check_cutoff(c)?;
    let fits = replicate_fits(scenario, spec, plan, Phase::Oc)?;
    Ok(aggregate(scenario, spec.kind, c, &fits))
}

/// Null-scenario operating characteristics from replicates independent of
/// both the calibration and the main simulation.
pub fn verify_cutoff(spec: &ModelSpec, plan: &SimPlan, c: f64) -> Result<OcResult> {
    check_cutoff(c)?;
    let null = plan.null_scenario()?;
    let fits = replicate_fits(&null, spec, plan, Phase::Verification)?;
    Ok(aggregate(&null, spec.kind, c, &fits))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PpSummary {
    pub mean: f64,
    pub median: f64,
    pub q90: f64,
    pub q95: f64,
    pub q99: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub model: ModelKind,
    pub cutoff: f64,
    pub target_alpha: f64,
    pub replicates: usize,
    /// Number of pooled posterior probabilities.
    pub pooled: usize,
    pub pp: PpSummary,
    /// Per-type rejection rate at the cutoff on the calibration sample.
    pub achieved: Vec<f64>,
}

/// Smallest pooled null posterior probability `c` with at most
/// `target_alpha` of the pooled values above it.
pub fn calibrate_cutoff(spec: &ModelSpec, plan: &SimPlan, target_alpha: f64) -> Result<Calibration> {
    if !(target_alpha > 0.0 && target_alpha <= 0.5) {
        return Err(Error::validation(format!("target alpha must lie in (0, 0.5], got {target_alpha}")));
    }
    if plan.replicates < MIN_CALIBRATION_REPLICATES {
        return Err(Error::validation(format!(
            "calibration needs at least {MIN_CALIBRATION_REPLICATES} replicates, got {}",
            plan.replicates
        )));
    }
    let null = plan.null_scenario()?;
    let fits = replicate_fits(&null, spec, plan, Phase::Calibration)?;
    let mut pooled: Vec<f64> = fits.iter().flat_map(|f| f.pps()).collect();
    pooled.sort_by(f64::total_cmp);
    let k = pooled.len();
    let rank = ((1.0 - target_alpha) * k as f64).ceil() as usize;
    let cutoff = pooled[rank.clamp(1, k) - 1];
    let at = |q: f64| pooled[((q * k as f64).ceil() as usize).clamp(1, k) - 1];
    let summary = aggregate(&null, spec.kind, cutoff, &fits);
    Ok(Calibration {
        model: spec.kind,
        cutoff,
        target_alpha,
        replicates: fits.len(),
        pooled: k,
        pp: PpSummary {
            mean: pooled.iter().sum::<f64>() / k as f64,
            median: at(0.5),
            q90: at(0.9),
            q95: at(0.95),
            q99: at(0.99),
            max: pooled[k - 1],
        },
        achieved: summary.types.iter().map(|t| t.rejection_rate).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibratedModel {
    /// Display name, e.g. `BUPD-D-18`.
    pub label: String,
    pub spec: ModelSpec,
    pub cutoff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub scenario: String,
    pub model: String,
    pub result: Result<OcResult>,
}

/// Every scenario under every model, model-major. A failing cell does not
/// stop the others.
pub fn sweep(scenarios: &[Scenario], models: &[CalibratedModel], plan: &SimPlan) -> Vec<SweepCell> {
    models
        .iter()
        .flat_map(|m| {
            scenarios.iter().map(move |s| SweepCell {
                scenario: s.name().to_owned(),
                model: m.label.clone(),
                result: run_oc(s, &m.spec, plan, m.cutoff),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AverageRates {
    /// Mean rejection rate over ineffective types.
    pub type1: Option<f64>,
    /// Mean rejection rate over effective types.
    pub power: Option<f64>,
}

/// Averages rejection rates over all (scenario, type) cells of the given
/// results, separately for ineffective and effective types.
pub fn average_rates(results: &[&OcResult]) -> AverageRates {
    let pick = |eff: bool| {
        let v: Vec<f64> = results
            .iter()
            .flat_map(|r| r.types.iter())
            .filter(|t| t.effective == eff)
            .map(|t| t.rejection_rate)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    AverageRates {
        type1: pick(false),
        power: pick(true),
    }
}
