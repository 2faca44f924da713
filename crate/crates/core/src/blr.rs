//! Bounded-likelihood regions: size and credibility curves as a check on
//! posterior samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{mle, ClickRecord, Pom, Posterior};
use crate::state::{rho_to_bloch, BlochVector, DensityMatrix};

pub const DEFAULT_GRID_POINTS: usize = 101;

pub fn default_lambda_grid() -> Vec<f64> {
    (0..DEFAULT_GRID_POINTS)
        .map(|i| i as f64 / (DEFAULT_GRID_POINTS - 1) as f64)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlrCurve {
    pub lambdas: Vec<f64>,
    pub size: Vec<f64>,
    pub credibility_empirical: Vec<f64>,
    pub credibility_theoretical: Vec<f64>,
}

impl BlrCurve {
    pub fn max_credibility_gap(&self) -> f64 {
        self.credibility_empirical
            .iter()
            .zip(&self.credibility_theoretical)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Likelihood regions {L ≥ λ L_ML} of one data set.
pub struct BlrRegion {
    posterior: Posterior,
    ln_l_max: f64,
}

impl BlrRegion {
    pub fn new(pom: &Pom, clicks: &ClickRecord) -> Result<Self> {
        let peak = mle(pom, clicks)?;
        Ok(Self {
            posterior: Posterior::new(pom.clone(), clicks.clone())?,
            ln_l_max: peak.log_likelihood_at_peak,
        })
    }

    pub fn ln_likelihood_max(&self) -> f64 {
        self.ln_l_max
    }

    /// L/L_ML, capped at 1 against optimizer tolerance.
    pub fn relative_likelihood(&self, b: &BlochVector) -> f64 {
        (self.posterior.log_likelihood(b) - self.ln_l_max).exp().min(1.0)
    }

    pub fn contains(&self, lambda: f64, b: &BlochVector) -> bool {
        self.posterior.log_likelihood(b) >= lambda.ln() + self.ln_l_max
    }
}

pub fn region_indicator(pom: &Pom, clicks: &ClickRecord, lambda: f64, rho: &DensityMatrix) -> Result<bool> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidInput(format!("lambda = {lambda} outside [0, 1]")));
    }
    Ok(BlrRegion::new(pom, clicks)?.contains(lambda, &rho_to_bloch(rho)?))
}

fn sorted_ratios(region: &BlrRegion, sample: &[BlochVector]) -> Vec<f64> {
    let mut v: Vec<f64> = sample.par_iter().map(|b| region.relative_likelihood(b)).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Fraction of sorted `v` with value ≥ λ.
fn tail_fraction(v: &[f64], lambda: f64) -> f64 {
    (v.len() - v.partition_point(|&x| x < lambda)) as f64 / v.len() as f64
}

/// The theoretical credibility integrates the empirical size curve exactly:
/// with ℓ = L/L_ML over the uniform sample, λ s_λ + ∫_λ¹ s = mean(ℓ·[ℓ ≥ λ]).
pub fn blr_curves(
    pom: &Pom,
    clicks: &ClickRecord,
    uniform_sample: &[BlochVector],
    posterior_sample: &[BlochVector],
    lambdas: &[f64],
) -> Result<BlrCurve> {
    if uniform_sample.is_empty() || posterior_sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) || lambdas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("lambda grid must be sorted within [0, 1]".into()));
    }
    let region = BlrRegion::new(pom, clicks)?;
    let u = sorted_ratios(&region, uniform_sample);
    let p = sorted_ratios(&region, posterior_sample);
    // suffix[i] = Σ_{j ≥ i} u[j]
    let mut suffix = vec![0.0; u.len() + 1];
    for i in (0..u.len()).rev() {
        suffix[i] = suffix[i + 1] + u[i];
    }
    let total = suffix[0];
    if !(total > 0.0) {
        return Err(Error::InvalidInput("uniform sample has zero likelihood everywhere".into()));
    }
    let mut curve = BlrCurve {
        lambdas: lambdas.to_vec(),
        size: Vec::with_capacity(lambdas.len()),
        credibility_empirical: Vec::with_capacity(lambdas.len()),
        credibility_theoretical: Vec::with_capacity(lambdas.len()),
    };
    for &l in lambdas {
        curve.size.push(tail_fraction(&u, l));
        curve.credibility_empirical.push(tail_fraction(&p, l));
        curve
            .credibility_theoretical
            .push(suffix[u.partition_point(|&x| x < l)] / total);
    }
    Ok(curve)
}
