//! Dynamic KL bound and its Mahalanobis-relaxed form.

use serde::{Deserialize, Serialize};

use super::kernels::{kl_divergence, mahalanobis};
use super::verdict::{DetectorConfig, DetectorVerdict, Method};
use crate::error::Result;
use crate::gridworld::Observation;
use crate::world_model::{LatentSample, RecurrentContext, StepBeliefs, WorldModel};

/// Sides of the bound for one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    /// KL[p(z|h,x) || p(z|h)]
    pub lhs: f64,
    /// KL[p(z|h,x) || p(z|h0)]
    pub kl_prior_h0: f64,
    /// KL[p(z|h,x) || p(z|h0,x)]
    pub kl_repr_h0: f64,
}

impl BoundTerms {
    pub fn from_beliefs(b: &StepBeliefs) -> Result<Self> {
        Ok(BoundTerms {
            lhs: kl_divergence(&b.posterior, &b.prior)?,
            kl_prior_h0: kl_divergence(&b.posterior, &b.prior_h0)?,
            kl_repr_h0: kl_divergence(&b.posterior, &b.posterior_h0)?,
        })
    }

    pub fn rhs(&self) -> f64 {
        self.kl_prior_h0 - self.kl_repr_h0
    }

    /// Flag rule of the bound: a negative right side flags outright,
    /// otherwise the score must exceed it. `tol` absorbs rounding.
    pub fn flags(&self, score: f64, tol: f64) -> bool {
        let rhs = self.rhs();
        rhs < -tol || score - rhs > tol
    }

    /// Same decision written as a dropout generalization test:
    /// `lhs + KL[post || post_h0] > KL[post || prior_h0]`.
    pub fn flags_rearranged(&self, score: f64, tol: f64) -> bool {
        self.rhs() < -tol || (score + self.kl_repr_h0) - self.kl_prior_h0 > tol
    }
}

pub fn kl_bound_verdict(terms: &BoundTerms, step: usize, tol: f64) -> DetectorVerdict {
    DetectorVerdict {
        method: Method::Kl,
        step,
        score: terms.lhs,
        threshold: terms.rhs(),
        flag: terms.flags(terms.lhs, tol),
    }
}

pub fn kl_md_verdict(
    terms: &BoundTerms,
    distance: f64,
    step: usize,
    config: &DetectorConfig,
) -> DetectorVerdict {
    let score = terms.lhs + config.lambda(step) * distance;
    DetectorVerdict {
        method: Method::KlMd,
        step,
        score,
        threshold: terms.rhs(),
        flag: terms.flags(score, config.decision_tolerance),
    }
}

pub fn kl_bound_detect(
    h: &RecurrentContext,
    x: &Observation,
    model: &WorldModel,
    step: usize,
    config: &DetectorConfig,
) -> Result<DetectorVerdict> {
    let terms = BoundTerms::from_beliefs(&model.query(h, x)?)?;
    Ok(kl_bound_verdict(&terms, step, config.decision_tolerance))
}

/// `z_sample` should be drawn from `represent(h, x)`.
pub fn kl_md_detect(
    h: &RecurrentContext,
    x: &Observation,
    z_sample: &LatentSample,
    step: usize,
    model: &WorldModel,
    config: &DetectorConfig,
) -> Result<DetectorVerdict> {
    let beliefs = model.query(h, x)?;
    let terms = BoundTerms::from_beliefs(&beliefs)?;
    let d = mahalanobis(
        z_sample,
        &beliefs.posterior,
        config.md_floor,
        config.md_form,
    )?;
    Ok(kl_md_verdict(&terms, d, step, config))
}
