//! Unit-information prior: each type's beta prior is assembled from the
//! other types' observed response rates, weighted by the pairwise borrowing
//! weights and scaled by the total borrowed sample size `M`.

use serde::{Deserialize, Serialize};

use crate::divergence::{Counts, WeightVector};
use crate::numcore::BetaParams;
use crate::{Error, Result};

/// Per-type enrolment and responder counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrial")]
pub struct TrialData {
    labels: Vec<String>,
    n: Vec<u32>,
    x: Vec<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrial {
    #[serde(default)]
    labels: Option<Vec<String>>,
    n: Vec<u32>,
    x: Vec<u32>,
}

impl TryFrom<RawTrial> for TrialData {
    type Error = Error;

    fn try_from(raw: RawTrial) -> Result<Self> {
        match raw.labels {
            Some(labels) => TrialData::new(labels, raw.n, raw.x),
            None => TrialData::unlabeled(raw.n, raw.x),
        }
    }
}

impl TrialData {
    pub fn new(labels: Vec<String>, n: Vec<u32>, x: Vec<u32>) -> Result<Self> {
        if n.len() < 2 {
            return Err(Error::validation(format!("need at least two cancer types, got {}", n.len())));
        }
        if x.len() != n.len() || labels.len() != n.len() {
            return Err(Error::validation(format!(
                "length mismatch: {} labels, {} n, {} x",
                labels.len(),
                n.len(),
                x.len()
            )));
        }
        for (i, (&ni, &xi)) in n.iter().zip(&x).enumerate() {
            if xi > ni {
                return Err(Error::validation(format!(
                    "type {} ({}): responders {xi} exceed enrolled {ni}",
                    i + 1,
                    labels[i]
                )));
            }
        }
        if n.iter().all(|&ni| ni == 0) {
            return Err(Error::validation("no patients enrolled in any type"));
        }
        Ok(Self { labels, n, x })
    }

    /// Types labelled `1..=I`.
    pub fn unlabeled(n: Vec<u32>, x: Vec<u32>) -> Result<Self> {
        let labels = (1..=n.len()).map(|i| i.to_string()).collect();
        Self::new(labels, n, x)
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n(&self) -> &[u32] {
        &self.n
    }

    pub fn x(&self) -> &[u32] {
        &self.x
    }

    pub fn total_n(&self) -> u32 {
        self.n.iter().sum()
    }

    pub fn counts(&self, i: usize) -> Counts {
        Counts {
            n: self.n[i],
            x: self.x[i],
        }
    }

    pub fn arms(&self) -> Vec<Counts> {
        (0..self.dim()).map(|i| self.counts(i)).collect()
    }

    /// `x_i / n_i`, or `None` for a type with no patients.
    pub fn mles(&self) -> Vec<Option<f64>> {
        self.n
            .iter()
            .zip(&self.x)
            .map(|(&n, &x)| (n > 0).then(|| x as f64 / n as f64))
            .collect()
    }

    /// Reorders types so that new position `k` holds old type `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.dim()];
        if order.len() != self.dim() || order.iter().any(|&k| k >= self.dim() || std::mem::replace(&mut seen[k], true)) {
            return Err(Error::validation("permutation must list every type exactly once"));
        }
        Ok(Self {
            labels: order.iter().map(|&k| self.labels[k].clone()).collect(),
            n: order.iter().map(|&k| self.n[k]).collect(),
            x: order.iter().map(|&k| self.x[k]).collect(),
        })
    }
}

pub const DEFAULT_CLAMP_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UipConfig {
    /// Total borrowed sample size `M` across all pairs.
    pub total_borrowed: f64,
    pub clamp_rate: f64,
}

impl UipConfig {
    pub fn new(total_borrowed: f64, clamp_rate: f64) -> Result<Self> {
        if !(total_borrowed > 0.0) || !total_borrowed.is_finite() {
            return Err(Error::InvalidParameter {
                name: "M",
                value: total_borrowed,
                reason: "total borrowed sample size must be positive",
            });
        }
        if !(clamp_rate > 0.0 && clamp_rate < 0.5) {
            return Err(Error::InvalidParameter {
                name: "clamp_rate",
                value: clamp_rate,
                reason: "clamp rate must lie in (0, 0.5)",
            });
        }
        Ok(Self {
            total_borrowed,
            clamp_rate,
        })
    }
}

/// Fisher information of a response rate per patient, `1 / (p (1 - p))`.
pub fn unit_information(rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::Domain {
            func: "unit_information",
            value: rate,
            expected: "rate in (0, 1); clamp first",
        });
    }
    Ok(1.0 / (rate * (1.0 - rate)))
}

/// Keeps an observed rate inside `[clamp, 1 - clamp]` before it enters the
/// unit information.
pub fn clamp_rate(mle: f64, clamp: f64) -> f64 {
    mle.max(clamp).min(1.0 - clamp)
}

/// Weighted mean of the rates of neighbours that carry data, and the
/// weighted unit information per borrowed patient. Neighbours with no data
/// are dropped and the remaining weights rescaled to the full row sum.
fn row_moments(weights: &WeightVector, mles: &[Option<f64>], ui: &[f64], i: usize) -> Result<(f64, f64)> {
    let (mut active, mut mean, mut info) = (0.0, 0.0, 0.0);
    for (j, mle) in mles.iter().enumerate() {
        if let (true, Some(p)) = (j != i, mle) {
            let w = weights.get(i, j);
            active += w;
            mean += w * p;
            info += w * ui[j];
        }
    }
    if !(active > 0.0) {
        return Err(Error::DegenerateWeights { index: i });
    }
    Ok((mean / active, info * weights.row_sum(i) / active))
}

fn clamped_information(mles: &[Option<f64>], clamp: f64) -> Result<Vec<f64>> {
    mles.iter()
        .map(|m| m.map_or(Ok(0.0), |p| unit_information(clamp_rate(p, clamp))))
        .collect()
}

/// Weighted mean of the other types' observed rates (raw, unclamped).
pub fn prior_mean(weights: &WeightVector, mles: &[Option<f64>], i: usize) -> Result<f64> {
    check_dims(weights, mles, i)?;
    let ui = vec![0.0; mles.len()];
    Ok(row_moments(weights, mles, &ui, i)?.0)
}

/// `{ M sum_{j != i} w_ij UI(clamp(p_j)) }^-1`
pub fn prior_variance(weights: &WeightVector, mles: &[Option<f64>], total_borrowed: f64, clamp: f64, i: usize) -> Result<f64> {
    check_dims(weights, mles, i)?;
    let ui = clamped_information(mles, clamp)?;
    Ok(1.0 / (total_borrowed * row_moments(weights, mles, &ui, i)?.1))
}

fn check_dims(weights: &WeightVector, mles: &[Option<f64>], i: usize) -> Result<()> {
    if weights.dim() != mles.len() || i >= mles.len() {
        return Err(Error::validation(format!(
            "weights for {} types, {} rates, index {i}",
            weights.dim(),
            mles.len()
        )));
    }
    Ok(())
}

/// Beta shapes with mean `mu` and variance `eta2`.
pub fn beta_from_moments(mu: f64, eta2: f64) -> Result<BetaParams> {
    let spread = mu * (1.0 - mu);
    if !(mu > 0.0 && mu < 1.0) || !(eta2 > 0.0) || eta2 >= spread {
        return Err(Error::MomentInfeasible { mu, eta2 });
    }
    let k = spread / eta2 - 1.0;
    BetaParams::new(mu * k, (1.0 - mu) * k).map_err(|_| Error::MomentInfeasible { mu, eta2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypePrior {
    pub params: BetaParams,
    /// Prior mean and variance implied by the weights; `None` when the
    /// construction fell back to `Beta(1, 1)`.
    pub moments: Option<(f64, f64)>,
}

impl TypePrior {
    pub fn is_fallback(&self) -> bool {
        self.moments.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UipPrior {
    pub types: Vec<TypePrior>,
}

impl UipPrior {
    pub fn params(&self, i: usize) -> BetaParams {
        self.types[i].params
    }

    /// Types whose borrowed information was weaker than a uniform prior.
    pub fn fallbacks(&self) -> Vec<usize> {
        self.types
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.is_fallback().then_some(i))
            .collect()
    }
}

/// Observed rates and their clamped unit information, fixed for one data
/// set so that priors can be rebuilt cheaply for many weight vectors.
#[derive(Debug, Clone)]
pub struct PriorKernel {
    mles: Vec<Option<f64>>,
    ui: Vec<f64>,
}

impl PriorKernel {
    pub fn new(mles: Vec<Option<f64>>, clamp: f64) -> Result<Self> {
        let ui = clamped_information(&mles, clamp)?;
        Ok(Self { mles, ui })
    }

    pub fn from_data(data: &TrialData, clamp: f64) -> Result<Self> {
        Self::new(data.mles(), clamp)
    }

    /// True when every type falls back to `Beta(1, 1)` whatever the weights
    /// and `M`: the neighbours with data of each type all sit at rate 0, or
    /// all at rate 1.
    pub fn is_inert(&self) -> bool {
        (0..self.mles.len()).all(|i| {
            let mut others = self.mles.iter().enumerate().filter(|&(j, _)| j != i).filter_map(|(_, m)| *m);
            match others.next() {
                None => true,
                Some(first) => (first == 0.0 || first == 1.0) && others.all(|p| p == first),
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.mles.len()
    }

    pub fn mles(&self) -> &[Option<f64>] {
        &self.mles
    }

    /// Prior for type `i`; infeasible moments or an all-zero weight row give
    /// `Beta(1, 1)`.
    pub fn type_prior(&self, weights: &WeightVector, total_borrowed: f64, i: usize) -> TypePrior {
        let fallback = TypePrior {
            params: BetaParams::uniform(),
            moments: None,
        };
        let Ok((mu, info)) = row_moments(weights, &self.mles, &self.ui, i) else {
            return fallback;
        };
        let eta2 = 1.0 / (total_borrowed * info);
        match beta_from_moments(mu, eta2) {
            Ok(params) => TypePrior {
                params,
                moments: Some((mu, eta2)),
            },
            Err(_) => fallback,
        }
    }

    pub fn build(&self, weights: &WeightVector, total_borrowed: f64) -> Result<UipPrior> {
        if weights.dim() != self.dim() {
            return Err(Error::validation(format!("weights for {} types, data for {}", weights.dim(), self.dim())));
        }
        Ok(UipPrior {
            types: (0..self.dim()).map(|i| self.type_prior(weights, total_borrowed, i)).collect(),
        })
    }
}

pub fn type_prior(weights: &WeightVector, mles: &[Option<f64>], cfg: &UipConfig, i: usize) -> Result<TypePrior> {
    check_dims(weights, mles, i)?;
    Ok(PriorKernel::new(mles.to_vec(), cfg.clamp_rate)?.type_prior(weights, cfg.total_borrowed, i))
}

pub fn build_prior(data: &TrialData, weights: &WeightVector, cfg: &UipConfig) -> Result<UipPrior> {
    PriorKernel::from_data(data, cfg.clamp_rate)?.build(weights, cfg.total_borrowed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveSampleSize {
    /// `n_i + alpha_i + beta_i`
    pub exact: f64,
    /// `n_i + M sum_l w_il - 1`, exact when all observed rates coincide.
    pub approx: f64,
}

pub fn effective_sample_size(n_i: u32, prior: &BetaParams, weights: &WeightVector, total_borrowed: f64, i: usize) -> EffectiveSampleSize {
    EffectiveSampleSize {
        exact: n_i as f64 + prior.concentration(),
        approx: n_i as f64 + total_borrowed * weights.row_sum(i) - 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform6() -> WeightVector {
        WeightVector::uniform(6).unwrap()
    }

    fn rates(v: &[f64]) -> Vec<Option<f64>> {
        v.iter().map(|&p| Some(p)).collect()
    }

    #[test]
    fn trial_validation() {
        assert!(TrialData::unlabeled(vec![10], vec![1]).is_err());
        assert!(TrialData::unlabeled(vec![10, 5], vec![1, 6]).is_err());
        assert!(TrialData::unlabeled(vec![0, 0], vec![0, 0]).is_err());
        assert!(TrialData::unlabeled(vec![10, 5], vec![1]).is_err());
        let t = TrialData::unlabeled(vec![10, 0], vec![3, 0]).unwrap();
        assert_eq!(t.mles(), vec![Some(0.3), None]);
        let err = serde_json::from_str::<TrialData>(r#"{"n":[1,2]}"#).unwrap_err();
        assert!(err.to_string().contains("missing field `x`"), "{err}");
    }

    #[test]
    fn unit_information_values() {
        assert_eq!(unit_information(0.5).unwrap(), 4.0);
        assert!((unit_information(0.10).unwrap() - 11.111_111_111_111).abs() < 1e-9);
        assert!((unit_information(0.40).unwrap() - 4.166_666_666_667).abs() < 1e-9);
        assert!(unit_information(0.0).is_err());
        assert!(unit_information(1.0).is_err());
    }

    #[test]
    fn clamping() {
        assert_eq!(clamp_rate(0.0, 0.05), 0.05);
        assert_eq!(clamp_rate(0.10, 0.05), 0.10);
        assert_eq!(clamp_rate(1.0, 0.05), 0.95);
    }

    #[test]
    fn mean_examples() {
        let w = uniform6();
        let mles = rates(&[0.9, 0.1, 0.1, 0.1, 0.1, 0.4]);
        assert!((prior_mean(&w, &mles, 0).unwrap() - 0.16).abs() < 1e-12);
        let flat = rates(&[0.3; 6]);
        assert!((prior_mean(&w, &flat, 2).unwrap() - 0.3).abs() < 1e-15);
        // All weight of type 0 on type 3.
        let mut z = vec![0.0; 15];
        z[2] = 1.0;
        let peaked = WeightVector::from_pair_mass(6, &z).unwrap();
        let mles = rates(&[0.5, 0.1, 0.2, 0.7, 0.3, 0.4]);
        assert!((prior_mean(&peaked, &mles, 0).unwrap() - 0.7).abs() < 1e-15);
        assert!(matches!(prior_mean(&peaked, &mles, 1), Err(Error::DegenerateWeights { index: 1 })));
    }

    #[test]
    fn variance_examples() {
        let w = uniform6();
        let mles = rates(&[0.5; 6]);
        let eta2 = prior_variance(&w, &mles, 72.0, 0.05, 0).unwrap();
        assert!((eta2 - 1.0 / 48.0).abs() < 1e-15);
        let halved = prior_variance(&w, &mles, 144.0, 0.05, 0).unwrap();
        assert!((halved - eta2 / 2.0).abs() < 1e-15);
        let tiny = prior_variance(&w, &mles, 1e-12, 0.05, 0).unwrap();
        assert!(tiny > 1e10);
        // Zero rates are clamped inside the unit information only.
        let zeros = rates(&[0.0; 6]);
        let eta2 = prior_variance(&w, &zeros, 72.0, 0.05, 0).unwrap();
        assert!((eta2 - 1.0 / (12.0 * unit_information(0.05).unwrap())).abs() < 1e-15);
        assert_eq!(prior_mean(&w, &zeros, 0).unwrap(), 0.0);
    }

    #[test]
    fn moments_to_shapes() {
        let b = beta_from_moments(0.5, 1.0 / 48.0).unwrap();
        assert!((b.alpha() - 5.5).abs() < 1e-12 && (b.beta() - 5.5).abs() < 1e-12);
        let u = beta_from_moments(0.5, 1.0 / 12.0).unwrap();
        assert!((u.alpha() - 1.0).abs() < 1e-12 && (u.beta() - 1.0).abs() < 1e-12);
        assert!(matches!(beta_from_moments(0.5, 0.25), Err(Error::MomentInfeasible { .. })));
        assert!(matches!(beta_from_moments(0.0, 0.01), Err(Error::MomentInfeasible { .. })));
    }

    #[test]
    fn ess_worked_value() {
        let w = uniform6();
        let prior = BetaParams::new(5.5, 5.5).unwrap();
        let ess = effective_sample_size(12, &prior, &w, 72.0, 0);
        assert_eq!(ess.approx, 23.0);
    }

    #[test]
    fn inert_kernels() {
        let inert = |mles: Vec<Option<f64>>| PriorKernel::new(mles, 0.05).unwrap().is_inert();
        assert!(inert(vec![Some(0.0); 4]));
        assert!(inert(vec![Some(1.0), Some(1.0), None]));
        assert!(inert(vec![Some(0.0), Some(0.0), None]));
        assert!(!inert(vec![Some(0.0), Some(0.0), Some(0.2)]));
        assert!(!inert(vec![Some(0.0), Some(1.0), Some(0.0)]));
        assert!(!inert(vec![Some(0.0), Some(0.3)]));
    }

    #[test]
    fn fallback_to_uniform() {
        let data = TrialData::unlabeled(vec![10, 10, 10], vec![5, 5, 5]).unwrap();
        let w = WeightVector::uniform(3).unwrap();
        let cfg = UipConfig::new(0.5, 0.05).unwrap();
        let prior = build_prior(&data, &w, &cfg).unwrap();
        assert_eq!(prior.fallbacks(), vec![0, 1, 2]);
        assert_eq!(prior.params(0), BetaParams::uniform());
    }

    #[test]
    fn empty_type_is_skipped() {
        let data = TrialData::unlabeled(vec![10, 0, 20], vec![2, 0, 10]).unwrap();
        let w = WeightVector::uniform(3).unwrap();
        let mles = data.mles();
        // Type 0 borrows only from type 2, with its full row mass.
        assert!((prior_mean(&w, &mles, 0).unwrap() - 0.5).abs() < 1e-15);
        let eta2 = prior_variance(&w, &mles, 30.0, 0.05, 0).unwrap();
        assert!((eta2 - 1.0 / (30.0 * (1.0 / 3.0) * 4.0)).abs() < 1e-15);
        // The empty type still gets a prior from the others.
        let mu = prior_mean(&w, &mles, 1).unwrap();
        assert!((mu - 0.35).abs() < 1e-15);
    }

    #[test]
    fn deterministic_pipeline() {
        let data = TrialData::unlabeled(vec![19, 10, 26, 8, 14, 7], vec![8, 0, 1, 1, 6, 2]).unwrap();
        let w = uniform6();
        let cfg = UipConfig::new(84.0, 0.05).unwrap();
        let a = build_prior(&data, &w, &cfg).unwrap();
        let b = build_prior(&data, &w, &cfg).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn homogeneous_ess_identity(p in 0.05f64..0.95, m in 1.0f64..200.0, n in 1u32..40, pick in 0usize..6) {
            let z: Vec<f64> = (0..15).map(|k| 1.0 + (k as f64 * 0.37).sin().abs()).collect();
            let total: f64 = z.iter().sum();
            let z: Vec<f64> = z.iter().map(|v| v / total).collect();
            let w = WeightVector::from_pair_mass(6, &z).unwrap();
            let mles = rates(&[p; 6]);
            let cfg = UipConfig::new(m, 0.05).unwrap();
            let tp = type_prior(&w, &mles, &cfg, pick).unwrap();
            prop_assume!(!tp.is_fallback());
            let ess = effective_sample_size(n, &tp.params, &w, m, pick);
            prop_assert!((ess.exact - ess.approx).abs() < 1e-8, "{:?}", ess);
        }

        #[test]
        fn concentration_identity(mu in 0.01f64..0.99, frac in 0.001f64..0.999) {
            let eta2 = frac * mu * (1.0 - mu);
            let b = beta_from_moments(mu, eta2).unwrap();
            prop_assert!((b.concentration() - (mu * (1.0 - mu) / eta2 - 1.0)).abs() <= 1e-9 * b.concentration().max(1.0));
            prop_assert!((b.mean() - mu).abs() < 1e-10);
            prop_assert!((b.variance() - eta2).abs() <= 1e-10 * eta2.max(1e-3));
        }

        #[test]
        fn ess_non_decreasing_in_m(x in prop::collection::vec(0u32..12, 6), m1 in 1.0f64..100.0, dm in 0.0f64..100.0) {
            let data = TrialData::unlabeled(vec![12; 6], x).unwrap();
            let w = uniform6();
            let lo = build_prior(&data, &w, &UipConfig::new(m1, 0.05).unwrap()).unwrap();
            let hi = build_prior(&data, &w, &UipConfig::new(m1 + dm, 0.05).unwrap()).unwrap();
            for i in 0..6 {
                let (a, b) = (lo.types[i], hi.types[i]);
                if !a.is_fallback() && !b.is_fallback() {
                    prop_assert!(b.params.concentration() >= a.params.concentration() - 1e-9);
                }
            }
        }
    }
}
