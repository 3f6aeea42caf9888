use std::collections::{BTreeMap, HashSet};

use bupd::engines::{McmcConfig, ModelKind, ModelSpec};
use bupd::harness::{Scenario, SimPlan};
use bupd::uip::TrialData;
use serde::{Deserialize, Deserializer};
use serde_json::Value;

use crate::CliError;

/// Parsed configuration file. See `docs/config.md` for the schema.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub trial: Option<TrialData>,
    #[serde(default)]
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub pi_h0: Option<f64>,
    #[serde(default)]
    pub pi_h1: Option<f64>,
    /// Default `M` for models that do not set `total_borrowed`.
    #[serde(default)]
    pub total_borrowed: Option<f64>,
    /// Overrides `plan.mcmc`.
    #[serde(default)]
    pub mcmc: Option<McmcConfig>,
    #[serde(default)]
    pub plan: Option<SimPlan>,
    #[serde(default)]
    pub scenarios: Option<Vec<ScenarioEntry>>,
    #[serde(default)]
    pub cutoffs: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub alpha: Option<f64>,
}

/// A model given either by name (`"BUPD-JS"`) or as an object with an
/// optional `label` next to the model fields.
#[derive(Debug, Clone)]
pub struct ModelEntry {
    pub label: String,
    pub spec: ModelSpec,
    sets_total_borrowed: bool,
}

impl<'de> Deserialize<'de> for ModelEntry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match Value::deserialize(d)? {
            Value::String(name) => {
                let kind: ModelKind = name.parse().map_err(D::Error::custom)?;
                Ok(Self {
                    label: kind.name().to_owned(),
                    spec: ModelSpec::new(kind),
                    sets_total_borrowed: false,
                })
            }
            Value::Object(mut map) => {
                let label = match map.remove("label") {
                    None => None,
                    Some(Value::String(s)) => Some(s),
                    Some(other) => return Err(D::Error::custom(format!("model label must be a string, got {other}"))),
                };
                if !map.contains_key("kind") {
                    return Err(D::Error::missing_field("kind"));
                }
                let sets_total_borrowed = map.contains_key("total_borrowed");
                let spec: ModelSpec = serde_json::from_value(Value::Object(map)).map_err(|e| {
                    D::Error::custom(format!("model `{}`: {e}", label.as_deref().unwrap_or("?")))
                })?;
                Ok(Self {
                    label: label.unwrap_or_else(|| spec.kind.name().to_owned()),
                    spec,
                    sets_total_borrowed,
                })
            }
            other => Err(D::Error::custom(format!("model must be a name or an object, got {other}"))),
        }
    }
}

/// A preset scenario number (1 to 8) or an explicit scenario object.
#[derive(Debug, Clone)]
pub struct ScenarioEntry(pub Scenario);

impl<'de> Deserialize<'de> for ScenarioEntry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let v = Value::deserialize(d)?;
        let scenario = match &v {
            Value::Number(n) => {
                let k = n.as_u64().ok_or_else(|| D::Error::custom(format!("scenario number must be 1 to 8, got {n}")))?;
                Scenario::preset(k as usize).map_err(D::Error::custom)?
            }
            Value::Object(_) => serde_json::from_value(v).map_err(D::Error::custom)?,
            other => return Err(D::Error::custom(format!("scenario must be a number or an object, got {other}"))),
        };
        Ok(Self(scenario))
    }
}

/// A model after top-level defaults have been applied. `stream` selects
/// its random stream in `analyze`.
#[derive(Debug, Clone)]
pub struct Model {
    pub label: String,
    pub spec: ModelSpec,
    pub stream: u64,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    fn finish(&self, label: String, mut spec: ModelSpec, sets_total_borrowed: bool, stream: u64) -> Model {
        if let (Some(m), false) = (self.total_borrowed, sets_total_borrowed) {
            spec.total_borrowed = m;
        }
        spec.pi_h0 = self.pi_h0.unwrap_or(spec.pi_h0);
        spec.pi_h1 = self.pi_h1.unwrap_or(spec.pi_h1);
        Model { label, spec, stream }
    }

    /// Models named on the command line, or every configured model when
    /// `names` is empty. A name matches a configured label first, then a
    /// model kind.
    pub fn select(&self, names: &[String]) -> Result<Vec<Model>, CliError> {
        let configured: Vec<Model> = self
            .models
            .iter()
            .enumerate()
            .map(|(k, e)| self.finish(e.label.clone(), e.spec.clone(), e.sets_total_borrowed, k as u64))
            .collect();
        let mut seen = HashSet::new();
        for m in &configured {
            if !seen.insert(m.label.to_lowercase()) {
                return Err(CliError::Validation(format!("duplicate model label `{}`", m.label)));
            }
        }
        let chosen = if names.is_empty() {
            configured
        } else {
            let mut extra = configured.len() as u64;
            let mut out = Vec::new();
            for name in names {
                if let Some(m) = configured.iter().find(|m| m.label.eq_ignore_ascii_case(name)) {
                    out.push(m.clone());
                } else if let Ok(kind) = name.parse::<ModelKind>() {
                    out.push(self.finish(kind.name().to_owned(), ModelSpec::new(kind), false, extra));
                    extra += 1;
                } else {
                    let known: Vec<&str> = configured.iter().map(|m| m.label.as_str()).collect();
                    return Err(CliError::Validation(format!(
                        "unknown model `{name}`; configured labels: [{}]",
                        known.join(", ")
                    )));
                }
            }
            out
        };
        if chosen.is_empty() {
            return Err(CliError::Validation("no models requested".into()));
        }
        for m in &chosen {
            m.spec.validate().map_err(|e| CliError::Validation(format!("model `{}`: {e}", m.label)))?;
        }
        Ok(chosen)
    }

    pub fn mcmc(&self) -> McmcConfig {
        self.mcmc
            .clone()
            .or_else(|| self.plan.as_ref().map(|p| p.mcmc.clone()))
            .unwrap_or_default()
    }

    pub fn plan(&self, reps: Option<usize>, seed: Option<u64>) -> Result<SimPlan, CliError> {
        let mut plan = self.plan.clone().unwrap_or_default();
        plan.mcmc = self.mcmc();
        plan.pi_h0 = self.pi_h0.unwrap_or(plan.pi_h0);
        plan.pi_h1 = self.pi_h1.unwrap_or(plan.pi_h1);
        plan.replicates = reps.unwrap_or(plan.replicates);
        plan.base_seed = seed.or(self.seed).unwrap_or(plan.base_seed);
        plan.validate().map_err(|e| CliError::Validation(format!("plan: {e}")))?;
        Ok(plan)
    }

    pub fn scenarios(&self) -> Result<Vec<Scenario>, CliError> {
        match &self.scenarios {
            None => Ok(Scenario::presets()),
            Some(list) if list.is_empty() => Err(CliError::Validation("scenario list is empty".into())),
            Some(list) => Ok(list.iter().map(|s| s.0.clone()).collect()),
        }
    }
}
