//! Ensemble MCMC with the split-ensemble scheme: walkers are divided into two
//! halves and each half is updated using directions drawn from the other.
//!
//! Two moves are available: the differential ensemble slice move (never
//! rejects; the scale `mu` is tuned during burn-in from the ratio of
//! stepping-out expansions to shrink contractions) and the affine-invariant
//! stretch move.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleMove {
    Slice { mu: f64 },
    Stretch { a: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub walkers: usize,
    pub steps: usize,
    pub burn_in_fraction: f64,
    pub thin: usize,
    #[serde(rename = "move")]
    pub ensemble_move: EnsembleMove,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            walkers: 32,
            steps: 500,
            burn_in_fraction: 0.5,
            thin: 1,
            ensemble_move: EnsembleMove::Stretch { a: 2.0 },
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walkers < 4 || self.walkers % 2 != 0 {
            return Err(Error::Config("walker count must be even and at least 4".into()));
        }
        if self.steps == 0 || self.thin == 0 {
            return Err(Error::Config("steps and thin must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::Config("burn-in fraction must lie in [0, 1)".into()));
        }
        match self.ensemble_move {
            EnsembleMove::Stretch { a } if a <= 1.0 => {
                Err(Error::Config("stretch parameter must exceed 1".into()))
            }
            EnsembleMove::Slice { mu } if mu <= 0.0 => Err(Error::Config("slice scale must be positive".into())),
            _ => Ok(()),
        }
    }

    pub fn burn_in(&self) -> usize {
        (self.steps as f64 * self.burn_in_fraction).floor() as usize
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    pub walkers: usize,
    pub steps: usize,
    /// Fraction of accepted stretch proposals (1 for slice moves).
    pub acceptance_rate: f64,
    pub expansions: u64,
    pub contractions: u64,
    pub final_mu: Option<f64>,
}

const MAX_STEP_OUT: usize = 64;
const MAX_SHRINK: usize = 128;

/// Runs the ensemble and returns the retained positions (post burn-in,
/// thinned), ordered by step then walker.
pub fn run_ensemble<F, R>(
    log_prob: F,
    mut positions: Vec<Vec<f64>>,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<(Vec<Vec<f64>>, SamplerDiagnostics)>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if positions.len() != cfg.walkers {
        return Err(Error::Config("initial positions must match the walker count".into()));
    }
    let dim = positions[0].len();
    let mut lp: Vec<f64> = positions.iter().map(|p| log_prob(p)).collect();
    if lp.iter().all(|v| !v.is_finite()) {
        return Err(Error::Prior("log posterior is non-finite at every initial walker".into()));
    }
    let half = cfg.walkers / 2;
    let burn_in = cfg.burn_in();
    let mut kept = Vec::with_capacity((cfg.steps - burn_in) / cfg.thin * cfg.walkers);
    let mut diag = SamplerDiagnostics {
        walkers: cfg.walkers,
        steps: cfg.steps,
        ..Default::default()
    };
    let mut proposals = 0u64;
    let mut accepted = 0u64;
    let mut mu = match cfg.ensemble_move {
        EnsembleMove::Slice { mu } => mu,
        EnsembleMove::Stretch { .. } => 0.0,
    };

    for step in 0..cfg.steps {
        let mut step_expansions = 0u64;
        let mut step_contractions = 0u64;
        for active in 0..2 {
            let (lo, hi) = if active == 0 { (0, half) } else { (half, cfg.walkers) };
            let (clo, chi) = if active == 0 { (half, cfg.walkers) } else { (0, half) };
            for k in lo..hi {
                match cfg.ensemble_move {
                    EnsembleMove::Stretch { a } => {
                        let j = rng.random_range(clo..chi);
                        let u: f64 = rng.random();
                        let z = ((a - 1.0) * u + 1.0).powi(2) / a;
                        let proposal: Vec<f64> = positions[j]
                            .iter()
                            .zip(&positions[k])
                            .map(|(xj, xk)| xj + z * (xk - xj))
                            .collect();
                        let lp_new = log_prob(&proposal);
                        let log_accept = (dim as f64 - 1.0) * z.ln() + lp_new - lp[k];
                        proposals += 1;
                        let u: f64 = rng.random();
                        if lp_new.is_finite() && (log_accept >= 0.0 || u.ln() < log_accept) {
                            positions[k] = proposal;
                            lp[k] = lp_new;
                            accepted += 1;
                        }
                    }
                    EnsembleMove::Slice { .. } => {
                        let picks = sample_indices(rng, chi - clo, 2);
                        let (j, l) = (clo + picks.index(0), clo + picks.index(1));
                        let direction: Vec<f64> = positions[j]
                            .iter()
                            .zip(&positions[l])
                            .map(|(a, b)| mu * (a - b))
                            .collect();
                        let (x, new_lp, e, c) = slice_along(&log_prob, &positions[k], lp[k], &direction, rng);
                        positions[k] = x;
                        lp[k] = new_lp;
                        step_expansions += e;
                        step_contractions += c;
                        proposals += 1;
                        accepted += 1;
                    }
                }
            }
        }
        diag.expansions += step_expansions;
        diag.contractions += step_contractions;
        if step < burn_in && matches!(cfg.ensemble_move, EnsembleMove::Slice { .. }) {
            let total = step_expansions + step_contractions;
            if total > 0 {
                mu *= 2.0 * step_expansions.max(1) as f64 / total as f64;
            }
        }
        if step >= burn_in && (step - burn_in) % cfg.thin == 0 {
            kept.extend(positions.iter().cloned());
        }
    }
    diag.acceptance_rate = if proposals > 0 {
        accepted as f64 / proposals as f64
    } else {
        0.0
    };
    if matches!(cfg.ensemble_move, EnsembleMove::Slice { .. }) {
        diag.final_mu = Some(mu);
    }
    Ok((kept, diag))
}

/// One univariate slice-sampling update of `x` along `direction`.
fn slice_along<F, R>(
    log_prob: &F,
    x: &[f64],
    lp_x: f64,
    direction: &[f64],
    rng: &mut R,
) -> (Vec<f64>, f64, u64, u64)
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let at = |t: f64| -> Vec<f64> { x.iter().zip(direction).map(|(xi, di)| xi + t * di).collect() };
    let e: f64 = Exp1.sample(rng);
    let level = lp_x - e;
    let mut left = -rng.random::<f64>();
    let mut right = left + 1.0;
    let mut expansions = 0u64;
    let mut contractions = 0u64;
    for _ in 0..MAX_STEP_OUT {
        if log_prob(&at(left)) <= level {
            break;
        }
        left -= 1.0;
        expansions += 1;
    }
    for _ in 0..MAX_STEP_OUT {
        if log_prob(&at(right)) <= level {
            break;
        }
        right += 1.0;
        expansions += 1;
    }
    for _ in 0..MAX_SHRINK {
        let t = rng.random_range(left..right);
        let candidate = at(t);
        let lp = log_prob(&candidate);
        if lp > level {
            return (candidate, lp, expansions, contractions);
        }
        contractions += 1;
        if t < 0.0 {
            left = t;
        } else {
            right = t;
        }
    }
    (x.to_vec(), lp_x, expansions, contractions)
}
