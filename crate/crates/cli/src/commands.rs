use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use bupd::engines::{fit, ModelSpec, PosteriorSummary};
use bupd::harness::{average_rates, calibrate_cutoff, sweep, verify_cutoff, AverageRates, CalibratedModel, Calibration, OcResult, SimPlan};
use bupd::numcore::RngStream;
use bupd::uip::TrialData;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::bundle::{digest_file, fixed, opt, pct, slug, Bundle, Failure, Invocation, Manifest, MANIFEST};
use crate::config::{Model, RunConfig};
use crate::CliError;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Outcome of a command that wrote its bundle.
#[derive(Debug, Default)]
pub struct Status {
    pub failures: usize,
}

pub fn read_config(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Reads a `cutoffs.json` written by `calibrate` (label to cutoff).
pub fn read_cutoffs(path: &Path) -> Result<BTreeMap<String, f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Runs `invocation` against `config_text`, writing the bundle to `out`.
pub fn run(invocation: &Invocation, config_text: &str, out: &Path) -> Result<Status, CliError> {
    let start = Instant::now();
    let cfg = RunConfig::parse(config_text)?;
    let echo: Value = serde_json::from_str(config_text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
    let mut manifest = Manifest::new(invocation.clone(), echo);
    let mut bundle = Bundle::create(out)?;
    let status = match invocation {
        Invocation::Analyze { models, seed } => analyze(&cfg, models, *seed, &mut bundle)?,
        Invocation::Calibrate { models, alpha, reps, seed } => calibrate(&cfg, models, *alpha, *reps, *seed, &mut bundle)?,
        Invocation::Simulate { cutoffs, reps, seed } => {
            let failures = simulate(&cfg, cutoffs, *reps, *seed, &mut bundle)?;
            let n = failures.len();
            manifest.failures = failures;
            Status { failures: n }
        }
    };
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    bundle.finish(manifest)?;
    Ok(status)
}

/// Re-runs the command recorded in a manifest into `out` and compares every
/// output file against the recorded digests.
pub fn replay(manifest_path: &Path, out: &Path) -> Result<Status, CliError> {
    let text = fs::read_to_string(manifest_path).map_err(|e| CliError::io(manifest_path, e))?;
    let old: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", manifest_path.display())))?;
    let config_text = serde_json::to_string(&old.config).expect("config serializes");
    let status = run(&old.invocation, &config_text, out)?;
    let mut differing = Vec::new();
    for (name, digest) in &old.outputs {
        let path = out.join(name);
        if !path.exists() || digest_file(&path)? != *digest {
            differing.push(name.clone());
        }
    }
    let new: Manifest = serde_json::from_str(&fs::read_to_string(out.join(MANIFEST)).map_err(|e| CliError::io(out, e))?)
        .expect("manifest just written");
    differing.extend(new.outputs.keys().filter(|k| !old.outputs.contains_key(*k)).cloned());
    if !differing.is_empty() {
        return Err(CliError::Mismatch(format!("outputs differ from the manifest: {}", differing.join(", "))));
    }
    eprintln!("replayed {} outputs, all identical", old.outputs.len());
    Ok(status)
}

#[derive(Serialize)]
struct ModelResult<'a> {
    label: &'a str,
    spec: &'a ModelSpec,
    summary: &'a PosteriorSummary,
}

#[derive(Serialize)]
struct AnalysisOut<'a> {
    trial: &'a TrialData,
    seed: u64,
    models: Vec<ModelResult<'a>>,
}

fn analyze(cfg: &RunConfig, names: &[String], seed: Option<u64>, bundle: &mut Bundle) -> Result<Status, CliError> {
    let data = cfg
        .trial
        .as_ref()
        .ok_or_else(|| CliError::Validation("config: analyze needs a `trial` section".into()))?;
    if data.dim() < 2 {
        return Err(CliError::Validation(format!("trial needs at least two types, got {}", data.dim())));
    }
    let models = cfg.select(names)?;
    let mcmc = cfg.mcmc();
    mcmc.validate().map_err(|e| CliError::Validation(format!("mcmc: {e}")))?;
    let seed = seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let fits: Vec<Result<PosteriorSummary, CliError>> = models
        .par_iter()
        .map(|m| {
            fit(data, &m.spec, &mcmc, &mut RngStream::new(seed, m.stream)).map_err(|e| CliError::core(&format!("model `{}`", m.label), e))
        })
        .collect();
    let fits = fits.into_iter().collect::<Result<Vec<_>, _>>()?;

    bundle.json(
        "summary.json",
        &AnalysisOut {
            trial: data,
            seed,
            models: models
                .iter()
                .zip(&fits)
                .map(|(m, s)| ModelResult {
                    label: &m.label,
                    spec: &m.spec,
                    summary: s,
                })
                .collect(),
        },
    )?;

    let mut header: Vec<String> = ["type", "n", "x"].map(String::from).to_vec();
    for m in &models {
        for col in ["mean", "lower", "upper", "pp"] {
            header.push(format!("{}_{col}", m.label));
        }
    }
    let rows: Vec<Vec<String>> = (0..data.dim())
        .map(|i| {
            let mut row = vec![data.labels()[i].clone(), data.n()[i].to_string(), data.x()[i].to_string()];
            for s in &fits {
                let t = &s.types[i];
                row.extend([pct(t.mean), pct(t.lower), pct(t.upper), pct(t.pp)]);
            }
            row
        })
        .collect();
    bundle.csv("posterior.csv", &header, &rows)?;

    for (m, s) in models.iter().zip(&fits) {
        let Some(b) = &s.borrowing else { continue };
        let mut header = vec!["type".to_owned()];
        header.extend(data.labels().iter().cloned());
        let rows: Vec<Vec<String>> = b
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = vec![data.labels()[i].clone()];
                r.extend(row.iter().enumerate().map(|(j, v)| if i == j { String::new() } else { fixed(*v, 1) }));
                r
            })
            .collect();
        bundle.csv(&format!("borrowing_{}.csv", slug(&m.label)), &header, &rows)?;
    }
    Ok(Status::default())
}

#[derive(Serialize)]
struct CalibrationOut<'a> {
    label: &'a str,
    spec: &'a ModelSpec,
    calibration: Calibration,
    verification: OcResult,
}

fn calibrate(
    cfg: &RunConfig,
    names: &[String],
    alpha: f64,
    reps: Option<usize>,
    seed: Option<u64>,
    bundle: &mut Bundle,
) -> Result<Status, CliError> {
    let models = cfg.select(names)?;
    let plan = cfg.plan(reps, seed)?;
    let mut results = Vec::new();
    for m in &models {
        let what = format!("model `{}`", m.label);
        let calibration = calibrate_cutoff(&m.spec, &plan, alpha).map_err(|e| CliError::core(&what, e))?;
        let verification = verify_cutoff(&m.spec, &plan, calibration.cutoff).map_err(|e| CliError::core(&what, e))?;
        results.push(CalibrationOut {
            label: &m.label,
            spec: &m.spec,
            calibration,
            verification,
        });
    }
    let header = ["model", "type", "true_rate", "cutoff", "calibration_type1", "verification_type1", "verification_se"]
        .map(String::from)
        .to_vec();
    let mut rows = Vec::new();
    for r in &results {
        for (i, t) in r.verification.types.iter().enumerate() {
            rows.push(vec![
                r.label.to_owned(),
                (i + 1).to_string(),
                pct(t.true_rate),
                fixed(r.calibration.cutoff, 6),
                pct(r.calibration.achieved[i]),
                pct(t.rejection_rate),
                pct(t.se),
            ]);
        }
    }
    bundle.json("calibration.json", &results)?;
    bundle.csv("calibration.csv", &header, &rows)?;
    let cutoffs: BTreeMap<&str, f64> = results.iter().map(|r| (r.label, r.calibration.cutoff)).collect();
    bundle.json("cutoffs.json", &cutoffs)?;
    Ok(Status::default())
}

#[derive(Serialize)]
struct CellOut<'a> {
    scenario: &'a str,
    model: &'a str,
    result: Option<&'a OcResult>,
    error: Option<String>,
}

#[derive(Serialize)]
struct ModelAverages<'a> {
    model: &'a str,
    cutoff: f64,
    scenarios: usize,
    #[serde(flatten)]
    rates: AverageRates,
}

#[derive(Serialize)]
struct SimulationOut<'a> {
    plan: &'a SimPlan,
    cells: Vec<CellOut<'a>>,
    averages: Vec<ModelAverages<'a>>,
}

fn calibrated(models: &[Model], cutoffs: &BTreeMap<String, f64>) -> Result<Vec<CalibratedModel>, CliError> {
    models
        .iter()
        .map(|m| {
            let cutoff = cutoffs
                .get(&m.label)
                .copied()
                .ok_or_else(|| CliError::Validation(format!("no cutoff for model `{}`", m.label)))?;
            Ok(CalibratedModel {
                label: m.label.clone(),
                spec: m.spec.clone(),
                cutoff,
            })
        })
        .collect()
}

fn simulate(
    cfg: &RunConfig,
    cutoffs: &BTreeMap<String, f64>,
    reps: Option<usize>,
    seed: Option<u64>,
    bundle: &mut Bundle,
) -> Result<Vec<Failure>, CliError> {
    let models = calibrated(&cfg.select(&[])?, cutoffs)?;
    let scenarios = cfg.scenarios()?;
    let plan = cfg.plan(reps, seed)?;
    for s in &scenarios {
        if s.dim() != plan.dim {
            return Err(CliError::Validation(format!(
                "scenario `{}` has {} types, plan expects {}",
                s.name(),
                s.dim(),
                plan.dim
            )));
        }
    }
    let cells = sweep(&scenarios, &models, &plan);
    let failures: Vec<Failure> = cells
        .iter()
        .filter_map(|c| {
            c.result.as_ref().err().map(|e| Failure {
                scenario: c.scenario.clone(),
                model: c.model.clone(),
                error: e.to_string(),
            })
        })
        .collect();

    let header = [
        "scenario", "model", "type", "true_rate", "effective", "rejection_rate", "se", "bias", "eti_width", "prior_ess",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::new();
    for c in &cells {
        let Ok(r) = &c.result else { continue };
        for (i, t) in r.types.iter().enumerate() {
            rows.push(vec![
                c.scenario.clone(),
                c.model.clone(),
                (i + 1).to_string(),
                pct(t.true_rate),
                t.effective.to_string(),
                pct(t.rejection_rate),
                pct(t.se),
                pct(t.bias),
                pct(t.eti_width),
                opt(t.prior_ess, |v| fixed(v, 1)),
            ]);
        }
    }
    bundle.csv("oc.csv", &header, &rows)?;

    let mut header = ["scenario", "model", "total_borrowed", "temperature"].map(String::from).to_vec();
    for i in 0..plan.dim {
        for j in i + 1..plan.dim {
            header.push(format!("Mw_{}_{}", i + 1, j + 1));
        }
    }
    let rows: Vec<Vec<String>> = cells
        .iter()
        .filter_map(|c| c.result.as_ref().ok().map(|r| (c, r)))
        .map(|(c, r)| {
            let mut row = vec![
                c.scenario.clone(),
                c.model.clone(),
                opt(r.total_borrowed, |v| fixed(v, 3)),
                opt(r.temperature, |v| fixed(v, 3)),
            ];
            for i in 0..plan.dim {
                for j in i + 1..plan.dim {
                    row.push(opt(r.borrowing.as_ref().map(|b| b[i][j]), |v| fixed(v, 3)));
                }
            }
            row
        })
        .collect();
    bundle.csv("hyper.csv", &header, &rows)?;

    let averages = models
        .iter()
        .map(|m| {
            let ok: Vec<&OcResult> = cells
                .iter()
                .filter(|c| c.model == m.label)
                .filter_map(|c| c.result.as_ref().ok())
                .collect();
            ModelAverages {
                model: &m.label,
                cutoff: m.cutoff,
                scenarios: ok.len(),
                rates: average_rates(&ok),
            }
        })
        .collect();
    let out = SimulationOut {
        plan: &plan,
        cells: cells
            .iter()
            .map(|c| CellOut {
                scenario: &c.scenario,
                model: &c.model,
                result: c.result.as_ref().ok(),
                error: c.result.as_ref().err().map(|e| e.to_string()),
            })
            .collect(),
        averages,
    };
    bundle.json("oc.json", &out)?;
    Ok(failures)
}
