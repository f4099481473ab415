use serde::{Deserialize, Serialize};

use super::kernels::mare;
use super::verdict::{DetectorVerdict, Method};
use crate::error::{Error, Result};
use crate::gridworld::Observation;

/// Reconstruction-error thresholds from the two calibration populations and
/// their equally weighted pool.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MareThresholds {
    pub trained: f64,
    pub random: f64,
    pub combination: f64,
}

impl MareThresholds {
    pub fn for_method(&self, method: Method) -> Option<f64> {
        match method {
            Method::CmtreTrained => Some(self.trained),
            Method::CmtreRandom => Some(self.random),
            Method::CmtreCombo => Some(self.combination),
            _ => None,
        }
    }
}

/// Mean and population standard deviation (divisor n).
pub fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `mean + sigmas · std` of a sample of at least two values.
pub fn threshold(samples: &[f64], sigmas: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Calibration(format!(
            "need at least 2 calibration samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Calibration(
            "calibration sample is not finite".into(),
        ));
    }
    let (mean, std) = mean_std(samples);
    Ok(mean + sigmas * std)
}

/// Thresholds at half a standard deviation above each sample mean.
pub fn cmtre_calibrate(trained: &[f64], random: &[f64]) -> Result<MareThresholds> {
    cmtre_calibrate_with(trained, random, 0.5)
}

pub fn cmtre_calibrate_with(
    trained: &[f64],
    random: &[f64],
    sigmas: f64,
) -> Result<MareThresholds> {
    let t = threshold(trained, sigmas)?;
    let r = threshold(random, sigmas)?;
    let pooled: Vec<f64> = trained.iter().chain(random).copied().collect();
    Ok(MareThresholds {
        trained: t,
        random: r,
        combination: threshold(&pooled, sigmas)?,
    })
}

pub fn cmtre_detect(
    x: &Observation,
    reconstruction: &Observation,
    threshold: f64,
    method: Method,
    step: usize,
) -> Result<DetectorVerdict> {
    let score = mare(x, reconstruction)?;
    Ok(DetectorVerdict {
        method,
        step,
        score,
        threshold,
        flag: score > threshold,
    })
}
