use bupd::divergence::WeightVector;
use bupd::engines::{fit, fit_bhm, fit_bupd_d, fit_bupd_jsh, FrozenHyper, McmcConfig, ModelKind, ModelSpec};
use bupd::numcore::{beta_cdf, BetaParams, RngStream};
use bupd::uip::{build_prior, TrialData, UipConfig};
use bupd::Error;
use rand::Rng;

fn vemurafenib() -> TrialData {
    TrialData::new(
        ["NSCLC", "CRC-V", "CRC-VC", "CCA", "ECD/LCH", "ATC"].map(String::from).to_vec(),
        vec![19, 10, 26, 8, 14, 7],
        vec![8, 0, 1, 1, 6, 2],
    )
    .unwrap()
}

fn spec(kind: ModelKind) -> ModelSpec {
    ModelSpec::new(kind).with_hypotheses(0.15, 0.35).with_total_borrowed(84.0)
}

/// Kolmogorov-Smirnov distance between a sample and a beta distribution.
fn ks_distance(mut draws: Vec<f64>, dist: &BetaParams) -> f64 {
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    draws
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let f = beta_cdf(v, dist).unwrap();
            (f - k as f64 / n).max((k + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Reruns a frozen sampler and collects the draws of every rate by
/// replaying one draw per retained iteration through the summary quantiles.
fn check_conjugate(kind: ModelKind, frozen: FrozenHyper, weights: &WeightVector, m: f64) {
    let data = vemurafenib();
    let mcmc = McmcConfig {
        frozen,
        ..McmcConfig::default()
    };
    let prior = build_prior(&data, weights, &UipConfig::new(m, 0.05).unwrap()).unwrap();
    let draws = bupd::engines::sample_rates(&data, &spec(kind), &mcmc, &mut RngStream::new(5, 1)).unwrap();
    assert_eq!(draws[0].len(), 10000);
    for (i, d) in draws.into_iter().enumerate() {
        let post = prior.params(i).update(data.x()[i], data.n()[i]);
        let ks = ks_distance(d, &post);
        assert!(ks < 0.02, "{kind} type {i}: KS {ks}");
    }
}

#[test]
fn frozen_pair_masses_give_conjugate_marginals() {
    let mut rng = RngStream::new(9, 0);
    let raw: Vec<f64> = (0..15).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let z: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let w = WeightVector::from_pair_mass(6, &z).unwrap();
    let frozen = FrozenHyper {
        total_borrowed: Some(40.0),
        pair_mass: Some(z),
        ..FrozenHyper::default()
    };
    check_conjugate(ModelKind::BupdD, frozen, &w, 40.0);
}

#[test]
fn huge_temperature_gives_uniform_weight_conjugate_marginals() {
    let frozen = FrozenHyper {
        total_borrowed: Some(84.0),
        temperature: Some(1e8),
        ..FrozenHyper::default()
    };
    check_conjugate(ModelKind::BupdJsh, frozen, &WeightVector::uniform(6).unwrap(), 84.0);
}

#[test]
fn seeded_runs_are_reproducible() {
    let data = vemurafenib();
    let mcmc = McmcConfig {
        burn_in: 500,
        iterations: 2000,
        ..McmcConfig::default()
    };
    for kind in [ModelKind::Bhm, ModelKind::BupdD, ModelKind::BupdJsh] {
        let a = fit(&data, &spec(kind), &mcmc, &mut RngStream::new(42, 7)).unwrap();
        let b = fit(&data, &spec(kind), &mcmc, &mut RngStream::new(42, 7)).unwrap();
        let c = fit(&data, &spec(kind), &mcmc, &mut RngStream::new(42, 8)).unwrap();
        assert_eq!(a, b, "{kind}");
        assert_ne!(a.means(), c.means(), "{kind}");
    }
}

#[test]
fn sampled_borrowing_is_symmetric() {
    let data = vemurafenib();
    let mcmc = McmcConfig {
        iterations: 4000,
        ..McmcConfig::default()
    };
    for kind in [ModelKind::BupdD, ModelKind::BupdJsh] {
        let s = fit(&data, &spec(kind), &mcmc, &mut RngStream::new(3, 3)).unwrap();
        let b = s.borrowing.unwrap();
        let total: f64 = b.iter().flatten().sum();
        assert!((total - s.total_borrowed.unwrap()).abs() < 1e-9);
        for i in 0..6 {
            for j in 0..6 {
                assert!((b[i][j] - b[j][i]).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn strong_precision_pools_completely() {
    let mcmc = McmcConfig {
        frozen: FrozenHyper {
            precision: Some(1e4),
            ..FrozenHyper::default()
        },
        ..McmcConfig::default()
    };
    let s = fit_bhm(&vemurafenib(), &spec(ModelKind::Bhm), &mcmc, &mut RngStream::new(8, 0)).unwrap();
    let means = s.means();
    let lo = means.iter().cloned().fold(1.0, f64::min);
    let hi = means.iter().cloned().fold(0.0, f64::max);
    assert!(hi - lo < 0.01, "{means:?}");
}

#[test]
fn single_type_trials_are_rejected() {
    assert!(TrialData::unlabeled(vec![10], vec![3]).unwrap_err().is_validation());
}

#[test]
fn stuck_sampler_is_reported() {
    let mcmc = McmcConfig {
        burn_in: 0,
        iterations: 2000,
        theta_step: 1e6,
        ..McmcConfig::default()
    };
    let err = fit_bhm(&vemurafenib(), &spec(ModelKind::Bhm), &mcmc, &mut RngStream::new(1, 1)).unwrap_err();
    assert!(matches!(err, Error::Sampler { .. }), "{err}");
}

#[test]
fn frozen_values_are_validated() {
    let mcmc = McmcConfig {
        frozen: FrozenHyper {
            temperature: Some(-1.0),
            ..FrozenHyper::default()
        },
        ..McmcConfig::default()
    };
    let err = fit_bupd_jsh(&vemurafenib(), &spec(ModelKind::BupdJsh), &mcmc, &mut RngStream::new(1, 1)).unwrap_err();
    assert!(err.is_validation());
    let mcmc = McmcConfig {
        frozen: FrozenHyper {
            pair_mass: Some(vec![0.5; 15]),
            ..FrozenHyper::default()
        },
        ..McmcConfig::default()
    };
    assert!(fit_bupd_d(&vemurafenib(), &spec(ModelKind::BupdD), &mcmc, &mut RngStream::new(1, 1)).is_err());
}

#[test]
fn sampler_pp_increases_with_responders() {
    let mcmc = McmcConfig {
        burn_in: 1000,
        iterations: 8000,
        ..McmcConfig::default()
    };
    for kind in [ModelKind::Bhm, ModelKind::BupdD, ModelKind::BupdJsh] {
        let mut last = -1.0;
        for x0 in [0, 2, 4, 6, 8, 10] {
            let data = TrialData::unlabeled(vec![10, 10, 10], vec![x0, 2, 5]).unwrap();
            let sp = ModelSpec::new(kind).with_total_borrowed(30.0);
            let pp = fit(&data, &sp, &mcmc, &mut RngStream::new(17, x0 as u64)).unwrap().types[0].pp;
            assert!(pp >= last - 0.03, "{kind} x0={x0}: {pp} after {last}");
            last = pp;
        }
    }
}

#[test]
fn no_responders_leave_hyperparameters_at_their_priors() {
    let n = vec![5, 12, 17, 8, 13, 17];
    let data = TrialData::unlabeled(n.clone(), vec![0; 6]).unwrap();
    let mcmc = McmcConfig::default();
    for kind in [ModelKind::BupdD, ModelKind::BupdJsh] {
        let s = fit(&data, &spec(kind), &mcmc, &mut RngStream::new(3, 0)).unwrap();
        assert!(s.acceptance.is_empty());
        for (t, &ni) in s.types.iter().zip(&n) {
            let exact = 1.0 / (ni as f64 + 2.0);
            assert!((t.mean - exact).abs() < 0.005, "{kind:?}: {} vs {exact}", t.mean);
        }
        let m = s.total_borrowed.unwrap();
        assert!((m - 42.0).abs() < 1.0, "{kind:?}: M {m}");
        let b = s.borrowing.unwrap();
        let total: f64 = (0..6).flat_map(|i| (0..6).map(move |j| (i, j))).filter(|(i, j)| i < j).map(|(i, j)| b[i][j]).sum();
        assert!((total - 0.5 * m).abs() < 1e-6 * m, "{kind:?}: {total} vs {m}");
        if kind == ModelKind::BupdD {
            assert!((b[0][1] - 42.0 / 30.0).abs() < 0.1, "{}", b[0][1]);
        }
    }
}
