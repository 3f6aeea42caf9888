//! Divergences between the per-type `Beta(1 + x, 1 + n - x)` posteriors and
//! the pairwise borrowing weights derived from them.
//!
//! Two distinct measures live here. [`jeffreys_divergence`] is the halved
//! symmetric Kullback–Leibler sum that feeds the unit-information weights;
//! [`js_mixture_similarity`] is one minus the bounded, base-2, mixture
//! Jensen–Shannon divergence used by the BBM-JS comparator's gate.

use serde::{Deserialize, Serialize};

use crate::numcore::{beta_ln_pdf, digamma, integrate, ln_beta, BetaParams, QuadConfig};
use crate::{Error, Result};

/// Enrolled patients and responders for one cancer type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub n: u32,
    pub x: u32,
}

impl Counts {
    pub fn new(n: u32, x: u32) -> Result<Self> {
        if x > n {
            return Err(Error::validation(format!("responders {x} exceed enrolled {n}")));
        }
        Ok(Self { n, x })
    }

    /// Posterior under a uniform prior.
    pub fn flat_posterior(&self) -> BetaParams {
        BetaParams::uniform().update(self.x, self.n)
    }
}

/// `KL(p || q)` between two beta densities, closed form.
pub fn kl_beta(p: &BetaParams, q: &BetaParams) -> Result<f64> {
    let (a1, b1) = (p.alpha(), p.beta());
    let (a2, b2) = (q.alpha(), q.beta());
    let kl = ln_beta(a2, b2)? - ln_beta(a1, b1)?
        + (a1 - a2) * digamma(a1)?
        + (b1 - b2) * digamma(b1)?
        + (a2 - a1 + b2 - b1) * digamma(a1 + b1)?;
    // Rounding can leave a tiny negative value for identical inputs.
    Ok(kl.max(0.0))
}

/// Halved symmetric KL sum between the flat-prior posteriors of two arms.
pub fn jeffreys_divergence(a: Counts, b: Counts) -> Result<f64> {
    let (fa, fb) = (a.flat_posterior(), b.flat_posterior());
    Ok(0.5 * (kl_beta(&fa, &fb)? + kl_beta(&fb, &fa)?))
}

const JS_EPS: f64 = 1e-10;

/// `1 - JSD(f_a, f_b)` with the mixture Jensen–Shannon divergence in bits,
/// so the result lies in `[0, 1]` and equals 1 for identical arms.
pub fn js_mixture_similarity(a: Counts, b: Counts) -> Result<f64> {
    if a == b {
        return Ok(1.0);
    }
    let (fa, fb) = (a.flat_posterior(), b.flat_posterior());
    let cfg = QuadConfig {
        abs_tol: 1e-11,
        rel_tol: 1e-10,
        ..QuadConfig::default()
    };
    let integrand = |p: f64| {
        let la = beta_ln_pdf(p, &fa);
        let lb = beta_ln_pdf(p, &fb);
        let hi = la.max(lb);
        if hi == f64::NEG_INFINITY {
            return 0.0;
        }
        // ln of the mixture density (f_a + f_b) / 2
        let lm = hi + ((la - hi).exp() + (lb - hi).exp()).ln() - std::f64::consts::LN_2;
        let mut acc = 0.0;
        if la > f64::NEG_INFINITY {
            acc += la.exp() * (la - lm);
        }
        if lb > f64::NEG_INFINITY {
            acc += lb.exp() * (lb - lm);
        }
        0.5 * acc
    };
    let jsd_nats = integrate(integrand, JS_EPS, 1.0 - JS_EPS, &cfg)?.value;
    let jsd_bits = jsd_nats / std::f64::consts::LN_2;
    Ok((1.0 - jsd_bits).clamp(0.0, 1.0))
}

/// Symmetric `I x I` matrix of non-negative divergences with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceMatrix {
    dim: usize,
    values: Vec<f64>,
}

impl DivergenceMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim < 2 {
            return Err(Error::validation("divergence matrix needs at least two types"));
        }
        let mut values = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::validation("divergence matrix must be square"));
            }
            values.extend_from_slice(row);
        }
        let m = Self { dim, values };
        for i in 0..dim {
            if m.get(i, i) != 0.0 {
                return Err(Error::validation(format!("divergence diagonal entry {i} is not zero")));
            }
            for j in 0..dim {
                let v = m.get(i, j);
                if !(v >= 0.0 && v.is_finite()) || v != m.get(j, i) {
                    return Err(Error::validation(format!(
                        "divergence ({i},{j}) must be finite, non-negative and symmetric"
                    )));
                }
            }
        }
        Ok(m)
    }

    /// Pairwise [`jeffreys_divergence`] between all arms.
    pub fn jeffreys(arms: &[Counts]) -> Result<Self> {
        let dim = arms.len();
        if dim < 2 {
            return Err(Error::validation("divergence matrix needs at least two types"));
        }
        let mut values = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in (i + 1)..dim {
                let d = jeffreys_divergence(arms[i], arms[j])?;
                values[i * dim + j] = d;
                values[j * dim + i] = d;
            }
        }
        Ok(Self { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim + j]
    }
}

/// Symmetric off-diagonal borrowing weights summing to one over all
/// ordered pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    dim: usize,
    values: Vec<f64>,
}

#[cfg(test)]
const WEIGHT_SUM_TOL: f64 = 1e-12;

impl WeightVector {
    /// Every ordered pair gets `1 / (I (I - 1))`.
    pub fn uniform(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::validation("weights need at least two types"));
        }
        let w = 1.0 / (dim * (dim - 1)) as f64;
        let mut values = vec![w; dim * dim];
        for i in 0..dim {
            values[i * dim + i] = 0.0;
        }
        Ok(Self { dim, values })
    }

    /// Builds weights from one value per unordered pair, in
    /// [`pair_index`] order, each split evenly between `w_ij` and `w_ji`.
    /// The pair values must lie on the simplex.
    pub fn from_pair_mass(dim: usize, pair_mass: &[f64]) -> Result<Self> {
        if dim < 2 || pair_mass.len() != dim * (dim - 1) / 2 {
            return Err(Error::validation(format!(
                "expected {} pair weights for {dim} types, got {}",
                dim * dim.saturating_sub(1) / 2,
                pair_mass.len()
            )));
        }
        let total: f64 = pair_mass.iter().sum();
        if pair_mass.iter().any(|z| !(*z >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation("pair weights must be non-negative and sum to 1"));
        }
        let mut values = vec![0.0; dim * dim];
        let mut l = 0;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let half = 0.5 * pair_mass[l] / total;
                values[i * dim + j] = half;
                values[j * dim + i] = half;
                l += 1;
            }
        }
        Ok(Self { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim + j]
    }

    /// `sum_{j != i} w_ij`
    pub fn row_sum(&self, i: usize) -> f64 {
        self.values[i * self.dim..(i + 1) * self.dim].iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Dense rows, diagonal zero.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    #[cfg(test)]
    pub(crate) fn check_invariants(&self) -> Result<()> {
        for i in 0..self.dim {
            for j in 0..self.dim {
                let w = self.get(i, j);
                if i == j && w != 0.0 {
                    return Err(Error::validation("weight diagonal must be zero"));
                }
                if !(0.0..=0.5).contains(&w) || w != self.get(j, i) {
                    return Err(Error::validation(format!("weight ({i},{j}) = {w} violates symmetry or [0, 0.5]")));
                }
            }
        }
        let total = self.total();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::validation(format!("weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// Position of unordered pair `(i, j)`, `i < j`, in row-major upper-triangle
/// order: (0,1), (0,2), ..., (1,2), ...
pub fn pair_index(dim: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < dim);
    i * (2 * dim - i - 1) / 2 + (j - i - 1)
}

/// Tempered softmax `w_ij = exp(-d_ij / s) / sum_{k != l} exp(-d_kl / s)`.
pub fn weights_from_divergence(d: &DivergenceMatrix, temperature: f64) -> Result<WeightVector> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::InvalidParameter {
            name: "temperature",
            value: temperature,
            reason: "divergence temperature must be positive and finite",
        });
    }
    let dim = d.dim();
    let mut min = f64::INFINITY;
    for i in 0..dim {
        for j in 0..dim {
            if i != j {
                min = min.min(d.get(i, j));
            }
        }
    }
    let mut values = vec![0.0; dim * dim];
    let mut total = 0.0;
    for i in 0..dim {
        for j in (i + 1)..dim {
            let e = (-(d.get(i, j) - min) / temperature).exp();
            values[i * dim + j] = e;
            values[j * dim + i] = e;
            total += 2.0 * e;
        }
    }
    values.iter_mut().for_each(|v| *v /= total);
    Ok(WeightVector { dim, values })
}
