use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ScmWeights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariance {
    /// Per-coordinate variances.
    Diagonal(Vec<f64>),
    /// Row-major full matrix.
    Full(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub covariance: Covariance,
}

/// Gaussian mixture over SCM weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<MixtureComponent>", into = "Vec<MixtureComponent>")]
pub struct MixturePrior {
    components: Vec<MixtureComponent>,
    factors: Vec<Factor>,
    dim: usize,
}

impl PartialEq for MixturePrior {
    fn eq(&self, other: &Self) -> bool {
        self.components == other.components
    }
}

/// Cholesky factor (or per-coordinate std devs) plus the log normaliser.
#[derive(Debug, Clone)]
enum Factor {
    Diagonal { std: Vec<f64>, log_norm: Option<f64> },
    Full { chol: DMatrix<f64>, log_norm: f64 },
}

impl TryFrom<Vec<MixtureComponent>> for MixturePrior {
    type Error = Error;

    fn try_from(c: Vec<MixtureComponent>) -> Result<Self> {
        Self::new(c)
    }
}

impl From<MixturePrior> for Vec<MixtureComponent> {
    fn from(p: MixturePrior) -> Self {
        p.components
    }
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

impl MixturePrior {
    /// Validates weights (positive, summing to one) and covariances.
    ///
    /// Diagonal covariances may contain zero variances, in which case the
    /// prior can be sampled but has no density (see [`Self::has_density`]).
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Prior("mixture has no components".into()))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::Prior("zero-dimensional mixture".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Prior(format!("mixing weights sum to {total}, expected 1")));
        }
        let mut factors = Vec::with_capacity(components.len());
        for (i, c) in components.iter().enumerate() {
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::Prior(format!("component {i} has a non-positive weight")));
            }
            if c.mean.len() != dim || c.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::Prior(format!("component {i} mean must be finite with length {dim}")));
            }
            factors.push(match &c.covariance {
                Covariance::Diagonal(var) => {
                    if var.len() != dim || var.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                        return Err(Error::Prior(format!(
                            "component {i} variances must be finite, non-negative, length {dim}"
                        )));
                    }
                    let log_norm = var
                        .iter()
                        .all(|&v| v > 0.0)
                        .then(|| -0.5 * (dim as f64 * LN_2PI + var.iter().map(|v| v.ln()).sum::<f64>()));
                    Factor::Diagonal {
                        std: var.iter().map(|v| v.sqrt()).collect(),
                        log_norm,
                    }
                }
                Covariance::Full(rows) => {
                    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                        return Err(Error::Prior(format!("component {i} covariance must be {dim}x{dim}")));
                    }
                    let m = DMatrix::from_fn(dim, dim, |r, c| rows[r][c]);
                    if (&m - m.transpose()).abs().max() > 1e-9 {
                        return Err(Error::Prior(format!("component {i} covariance is not symmetric")));
                    }
                    let chol = m.cholesky().ok_or_else(|| {
                        Error::Prior(format!("component {i} covariance is not positive-definite"))
                    })?;
                    let l = chol.unpack();
                    let log_det: f64 = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
                    Factor::Full {
                        chol: l,
                        log_norm: -0.5 * (dim as f64 * LN_2PI + log_det),
                    }
                }
            });
        }
        Ok(Self {
            components,
            factors,
            dim,
        })
    }

    /// Single isotropic component.
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let dim = mean.len();
        Self::new(vec![MixtureComponent {
            weight: 1.0,
            mean,
            covariance: Covariance::Diagonal(vec![variance; dim]),
        }])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn has_density(&self) -> bool {
        self.factors.iter().all(|f| match f {
            Factor::Diagonal { log_norm, .. } => log_norm.is_some(),
            Factor::Full { .. } => true,
        })
    }

    /// `E[w] = sum_i alpha_i mu_i`.
    pub fn mean(&self) -> ScmWeights {
        let mut m = vec![0.0; self.dim];
        for c in &self.components {
            for (acc, v) in m.iter_mut().zip(&c.mean) {
                *acc += c.weight * v;
            }
        }
        ScmWeights::new(m)
    }

    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                return i;
            }
        }
        self.components.len() - 1
    }

    pub fn sample_from<R: Rng + ?Sized>(&self, component: usize, rng: &mut R) -> Vec<f64> {
        let c = &self.components[component];
        let z: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(rng)).collect();
        match &self.factors[component] {
            Factor::Diagonal { std, .. } => c
                .mean
                .iter()
                .zip(std)
                .zip(&z)
                .map(|((m, s), z)| m + s * z)
                .collect(),
            Factor::Full { chol, .. } => {
                let x = DVector::from_column_slice(&c.mean) + chol * DVector::from_vec(z);
                x.iter().copied().collect()
            }
        }
    }

    /// Component index and draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, ScmWeights) {
        let k = self.sample_component(rng);
        (k, ScmWeights::new(self.sample_from(k, rng)))
    }

    fn component_log_density(&self, i: usize, x: &[f64]) -> f64 {
        let c = &self.components[i];
        match &self.factors[i] {
            Factor::Diagonal { std, log_norm } => {
                let Some(log_norm) = log_norm else {
                    return f64::NEG_INFINITY;
                };
                let q: f64 = x
                    .iter()
                    .zip(&c.mean)
                    .zip(std)
                    .map(|((x, m), s)| ((x - m) / s).powi(2))
                    .sum();
                log_norm - 0.5 * q
            }
            Factor::Full { chol, log_norm } => {
                let d = DVector::from_iterator(self.dim, x.iter().zip(&c.mean).map(|(x, m)| x - m));
                let y = chol.solve_lower_triangular(&d).expect("cholesky factor is invertible");
                log_norm - 0.5 * y.norm_squared()
            }
        }
    }

    /// Log density via log-sum-exp over components.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..self.components.len())
            .map(|i| self.components[i].weight.ln() + self.component_log_density(i, x))
            .collect();
        log_sum_exp(&terms)
    }

    /// Posterior responsibility of each component for `x`.
    pub fn responsibilities(&self, x: &[f64]) -> Vec<f64> {
        let terms: Vec<f64> = (0..self.components.len())
            .map(|i| self.components[i].weight.ln() + self.component_log_density(i, x))
            .collect();
        let z = log_sum_exp(&terms);
        terms.iter().map(|t| (t - z).exp()).collect()
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let comp = |w: f64| MixtureComponent {
            weight: w,
            mean: vec![0.0, 0.0],
            covariance: Covariance::Diagonal(vec![1.0, 1.0]),
        };
        assert!(MixturePrior::new(vec![comp(0.5), comp(0.5)]).is_ok());
        assert!(MixturePrior::new(vec![comp(0.5), comp(0.4)]).is_err());
        assert!(MixturePrior::new(vec![comp(1.2), comp(-0.2)]).is_err());
        assert!(MixturePrior::new(vec![]).is_err());
        let bad = MixtureComponent {
            weight: 1.0,
            mean: vec![0.0, 0.0],
            covariance: Covariance::Full(vec![vec![1.0, 2.0], vec![2.0, 1.0]]),
        };
        assert!(MixturePrior::new(vec![bad]).is_err());
    }

    #[test]
    fn full_and_diagonal_densities_agree() {
        let diag = MixturePrior::new(vec![MixtureComponent {
            weight: 1.0,
            mean: vec![1.0, -1.0],
            covariance: Covariance::Diagonal(vec![0.5, 2.0]),
        }])
        .unwrap();
        let full = MixturePrior::new(vec![MixtureComponent {
            weight: 1.0,
            mean: vec![1.0, -1.0],
            covariance: Covariance::Full(vec![vec![0.5, 0.0], vec![0.0, 2.0]]),
        }])
        .unwrap();
        for x in [[0.0, 0.0], [1.0, -1.0], [3.0, 2.5]] {
            assert!((diag.log_density(&x) - full.log_density(&x)).abs() < 1e-12);
        }
        // Standard normal at the origin in 2-D: -ln(2 pi).
        let std = MixturePrior::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        assert!((std.log_density(&[0.0, 0.0]) + LN_2PI).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_prior_samples_its_mean() {
        let p = MixturePrior::isotropic(vec![2.0, 3.0], 0.0).unwrap();
        assert!(!p.has_density());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let (_, w) = p.sample(&mut rng);
        assert_eq!(w.values(), &[2.0, 3.0]);
    }

    use rand::SeedableRng;
}
