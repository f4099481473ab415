use super::kernels::mare;
use super::verdict::{DetectorVerdict, Method};
use crate::error::Result;
use crate::gridworld::Observation;

/// Flags when the prior and posterior reconstructions differ by more than
/// `epsilon` (unit-interval intensities).
pub fn pp_mare_detect(
    prior_image: &Observation,
    posterior_image: &Observation,
    epsilon: f64,
    step: usize,
) -> Result<DetectorVerdict> {
    Ok(pp_mare_verdict(
        mare(prior_image, posterior_image)?,
        epsilon,
        step,
    ))
}

pub fn pp_mare_verdict(score: f64, epsilon: f64, step: usize) -> DetectorVerdict {
    DetectorVerdict {
        method: Method::PpMare,
        step,
        score,
        threshold: epsilon,
        flag: score > epsilon,
    }
}
