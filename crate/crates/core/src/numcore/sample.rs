use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Gamma, StandardNormal};

use super::BetaParams;
use crate::{Error, Result};

fn invalid(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::InvalidParameter { name, value, reason }
}

/// Gamma draw with the given shape and rate (inverse scale).
pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(invalid("shape", shape, "gamma shape must be positive"));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(invalid("rate", rate, "gamma rate must be positive"));
    }
    let dist = Gamma::new(shape, 1.0 / rate).map_err(|_| invalid("shape", shape, "rejected by gamma sampler"))?;
    Ok(dist.sample(rng))
}

pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, params: &BetaParams) -> f64 {
    // BetaParams guarantees valid shapes.
    Beta::new(params.alpha(), params.beta())
        .expect("validated beta shapes")
        .sample(rng)
}

pub fn sample_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + sd * z
}

pub fn sample_binomial<R: Rng + ?Sized>(rng: &mut R, trials: u64, p: f64) -> Result<u64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", p, "binomial probability must lie in [0, 1]"));
    }
    Ok(Binomial::new(trials, p)
        .map_err(|_| invalid("p", p, "rejected by binomial sampler"))?
        .sample(rng))
}

/// Dirichlet draw via normalized gamma variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, concentration: &[f64]) -> Result<Vec<f64>> {
    if concentration.len() < 2 {
        return Err(invalid(
            "concentration",
            concentration.len() as f64,
            "dirichlet needs at least two components",
        ));
    }
    let mut draw = Vec::with_capacity(concentration.len());
    for &c in concentration {
        draw.push(sample_gamma(rng, c, 1.0)?);
    }
    let total: f64 = draw.iter().sum();
    if !(total > 0.0) {
        return Err(invalid("concentration", total, "all gamma components underflowed"));
    }
    draw.iter_mut().for_each(|v| *v /= total);
    Ok(draw)
}

/// Multinomial counts by sequential conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(rng: &mut R, trials: u64, probs: &[f64]) -> Result<Vec<u64>> {
    if probs.is_empty() {
        return Err(invalid("probs", 0.0, "multinomial needs at least one cell"));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(invalid("probs", f64::NAN, "cell probabilities must lie in [0, 1]"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid("probs", total, "cell probabilities must sum to 1"));
    }
    let mut remaining = trials;
    let mut mass = 1.0;
    let mut counts = Vec::with_capacity(probs.len());
    for (k, &p) in probs.iter().enumerate() {
        if k + 1 == probs.len() {
            counts.push(remaining);
            break;
        }
        let conditional = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let c = sample_binomial(rng, remaining, conditional)?;
        counts.push(c);
        remaining -= c;
        mass -= p;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::RngStream;

    fn within_3se(samples: &[f64], mean: f64, var: f64) -> bool {
        let n = samples.len() as f64;
        let m = samples.iter().sum::<f64>() / n;
        (m - mean).abs() <= 3.0 * (var / n).sqrt()
    }

    #[test]
    fn gamma_mean() {
        let mut rng = RngStream::new(11, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_gamma(&mut rng, 2.5, 4.0).unwrap()).collect();
        assert!(within_3se(&xs, 2.5 / 4.0, 2.5 / 16.0));
        assert!(sample_gamma(&mut rng, 0.0, 1.0).is_err());
        assert!(sample_gamma(&mut rng, 1.0, -1.0).is_err());
    }

    #[test]
    fn beta_mean() {
        let mut rng = RngStream::new(11, 1);
        let params = BetaParams::new(9.0, 12.0).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| sample_beta(&mut rng, &params)).collect();
        assert!(within_3se(&xs, params.mean(), params.variance()));
    }

    #[test]
    fn binomial_mean() {
        let mut rng = RngStream::new(11, 2);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_binomial(&mut rng, 12, 0.10).unwrap() as f64)
            .collect();
        assert!(within_3se(&xs, 1.2, 12.0 * 0.1 * 0.9));
        assert!(sample_binomial(&mut rng, 12, 1.5).is_err());
    }

    #[test]
    fn dirichlet_on_simplex() {
        let mut rng = RngStream::new(11, 3);
        let conc = vec![1.0; 15];
        let mut first = Vec::new();
        for _ in 0..20_000 {
            let d = sample_dirichlet(&mut rng, &conc).unwrap();
            assert_eq!(d.len(), 15);
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(d.iter().all(|&v| v >= 0.0));
            first.push(d[0]);
        }
        // Marginal Beta(1, 14).
        assert!(within_3se(&first, 1.0 / 15.0, 14.0 / (225.0 * 16.0)));
        assert!(sample_dirichlet(&mut rng, &[1.0]).is_err());
        assert!(sample_dirichlet(&mut rng, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn multinomial_equal_cells() {
        let mut rng = RngStream::new(11, 4);
        let probs = [1.0 / 6.0; 6];
        let reps = 10_000;
        let mut sums = [0.0; 6];
        for _ in 0..reps {
            let c = sample_multinomial(&mut rng, 72, &probs).unwrap();
            assert_eq!(c.iter().sum::<u64>(), 72);
            for (s, v) in sums.iter_mut().zip(&c) {
                *s += *v as f64;
            }
        }
        let se = (72.0 * (1.0 / 6.0) * (5.0 / 6.0) / reps as f64).sqrt();
        for s in sums {
            assert!((s / reps as f64 - 12.0).abs() <= 3.0 * se, "{}", s / reps as f64);
        }
        assert!(sample_multinomial(&mut rng, 10, &[0.5, 0.6]).is_err());
    }

    #[test]
    fn seeded_draws_are_reproducible() {
        let run = || {
            let mut rng = RngStream::new(99, 5);
            (0..50).map(|_| sample_gamma(&mut rng, 0.7, 1.0).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
