use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridworld::Observation;
use crate::world_model::{CategoricalBelief, LatentSample, RecurrentContext, WorldModel};

/// Mean absolute difference over all `W·H·3` entries.
pub fn mare(a: &Observation, b: &Observation) -> Result<f64> {
    if !a.same_shape(b) || a.pixels.len() != b.pixels.len() {
        return Err(Error::Contract(format!(
            "image shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.pixels.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(x, y)| (*x as f64 - *y as f64).abs())
        .sum();
    Ok(total / a.pixels.len() as f64)
}

fn check_pair(p: &CategoricalBelief, q: &CategoricalBelief) -> Result<()> {
    if p.sizes() != q.sizes() {
        return Err(Error::Contract(format!(
            "belief shapes differ: {:?} vs {:?}",
            p.sizes(),
            q.sizes()
        )));
    }
    Ok(())
}

/// KL(p || q) in nats, summed over factors.
pub fn kl_divergence(p: &CategoricalBelief, q: &CategoricalBelief) -> Result<f64> {
    check_pair(p, q)?;
    let mut total = 0.0;
    for (pf, qf) in p.factors().iter().zip(q.factors()) {
        for (a, b) in pf.iter().zip(qf) {
            if *a > 0.0 {
                total += a * (a.ln() - b.ln());
            }
        }
    }
    Ok(total.max(0.0))
}

/// H(p, q) = -sum p log q, summed over factors.
pub fn cross_entropy(p: &CategoricalBelief, q: &CategoricalBelief) -> Result<f64> {
    check_pair(p, q)?;
    let mut total = 0.0;
    for (pf, qf) in p.factors().iter().zip(q.factors()) {
        for (a, b) in pf.iter().zip(qf) {
            if *a > 0.0 {
                total -= a * b.ln();
            }
        }
    }
    Ok(total)
}

/// Bayesian surprise KL[p(z|h,x) || p(z|h)].
pub fn surprise(h: &RecurrentContext, x: &Observation, model: &WorldModel) -> Result<f64> {
    kl_divergence(&model.represent(h, x)?, &model.prior(h))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MahalanobisForm {
    /// Sum of floored squared deviations.
    #[default]
    Squared,
    /// Square root of the same sum.
    Root,
}

/// Distance of a one-hot sample from a categorical belief under the
/// diagonal covariance `mu (1 - mu)`, with each variance floored.
pub fn mahalanobis(
    z: &LatentSample,
    belief: &CategoricalBelief,
    floor: f64,
    form: MahalanobisForm,
) -> Result<f64> {
    if z.0.len() != belief.num_factors() {
        return Err(Error::Contract(format!(
            "sample has {} factors, belief has {}",
            z.0.len(),
            belief.num_factors()
        )));
    }
    let mut total = 0.0;
    for (&idx, mu) in z.0.iter().zip(belief.factors()) {
        if idx >= mu.len() {
            return Err(Error::Contract(format!(
                "sampled code {idx} outside a factor of size {}",
                mu.len()
            )));
        }
        for (i, m) in mu.iter().enumerate() {
            let zi = if i == idx { 1.0 } else { 0.0 };
            let var = (m * (1.0 - m)).max(floor);
            total += (zi - m) * (zi - m) / var;
        }
    }
    Ok(match form {
        MahalanobisForm::Squared => total,
        MahalanobisForm::Root => total.sqrt(),
    })
}
