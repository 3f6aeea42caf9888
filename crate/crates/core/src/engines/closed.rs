use super::{ModelKind, ModelSpec, PosteriorSummary, TypeSummary};
use crate::divergence::{js_mixture_similarity, weights_from_divergence, DivergenceMatrix};
use crate::numcore::{beta_quantile, beta_sf, BetaParams};
use crate::uip::{PriorKernel, TrialData};
use crate::Result;

fn beta_summary(label: &str, post: &BetaParams, pi_h0: f64, prior_ess: f64) -> Result<TypeSummary> {
    Ok(TypeSummary {
        label: label.to_owned(),
        mean: post.mean(),
        lower: beta_quantile(0.025, post)?,
        upper: beta_quantile(0.975, post)?,
        pp: beta_sf(pi_h0, post)?,
        prior_ess: Some(prior_ess),
    })
}

fn closed_summary(model: ModelKind, spec: &ModelSpec, types: Vec<TypeSummary>) -> PosteriorSummary {
    PosteriorSummary {
        model,
        pi_h0: spec.pi_h0,
        types,
        borrowing: None,
        total_borrowed: None,
        temperature: None,
        acceptance: Vec::new(),
        fallbacks: Vec::new(),
    }
}

/// Independent `Beta(1, 1)` priors, no borrowing.
pub fn fit_bbm_nb(data: &TrialData, spec: &ModelSpec) -> Result<PosteriorSummary> {
    spec.validate()?;
    let prior = BetaParams::uniform();
    let types = (0..data.dim())
        .map(|i| {
            let post = prior.update(data.x()[i], data.n()[i]);
            beta_summary(&data.labels()[i], &post, spec.pi_h0, prior.concentration())
        })
        .collect::<Result<_>>()?;
    Ok(closed_summary(ModelKind::BbmNb, spec, types))
}

/// Pairwise similarities of the flat-prior posteriors, diagonal one.
pub fn similarity_matrix(data: &TrialData) -> Result<Vec<Vec<f64>>> {
    let dim = data.dim();
    let mut s = vec![vec![1.0; dim]; dim];
    for i in 0..dim {
        for j in (i + 1)..dim {
            let v = js_mixture_similarity(data.counts(i), data.counts(j))?;
            s[i][j] = v;
            s[j][i] = v;
        }
    }
    Ok(s)
}

/// Each type pools every arm whose similarity exceeds the threshold,
/// discounted by the similarity raised to the exponent. Its own arm always
/// enters with full weight.
pub fn fit_bbm_js(data: &TrialData, spec: &ModelSpec) -> Result<PosteriorSummary> {
    spec.validate()?;
    let sim = similarity_matrix(data)?;
    let dim = data.dim();
    let mut types = Vec::with_capacity(dim);
    for i in 0..dim {
        let (mut a, mut b, mut borrowed) = (1.0, 1.0, 0.0);
        for j in 0..dim {
            let s = sim[i][j];
            if j == i || s > spec.js_threshold {
                let g = if j == i { 1.0 } else { s.powf(spec.js_exponent) };
                let (x, n) = (data.x()[j] as f64, data.n()[j] as f64);
                a += g * x;
                b += g * (n - x);
                if j != i {
                    borrowed += g * n;
                }
            }
        }
        let post = BetaParams::new(a, b)?;
        types.push(beta_summary(&data.labels()[i], &post, spec.pi_h0, 2.0 + borrowed)?);
    }
    Ok(closed_summary(ModelKind::BbmJs, spec, types))
}

/// Unit-information prior with fixed `M` and weights from the Jeffreys
/// divergence at unit temperature.
pub fn fit_bupd_js(data: &TrialData, spec: &ModelSpec) -> Result<PosteriorSummary> {
    spec.validate()?;
    let d = DivergenceMatrix::jeffreys(&data.arms())?;
    let w = weights_from_divergence(&d, 1.0)?;
    let m = spec.total_borrowed;
    let prior = PriorKernel::from_data(data, spec.clamp_rate)?.build(&w, m)?;
    let types = (0..data.dim())
        .map(|i| {
            let p = prior.params(i);
            beta_summary(&data.labels()[i], &p.update(data.x()[i], data.n()[i]), spec.pi_h0, p.concentration())
        })
        .collect::<Result<_>>()?;
    let mut summary = closed_summary(ModelKind::BupdJs, spec, types);
    summary.borrowing = Some(
        w.to_rows()
            .into_iter()
            .map(|row| row.into_iter().map(|v| m * v).collect())
            .collect(),
    );
    summary.total_borrowed = Some(m);
    summary.temperature = Some(1.0);
    summary.fallbacks = prior.fallbacks();
    Ok(summary)
}
