use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::kernels::MahalanobisForm;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    CmtreTrained,
    CmtreRandom,
    CmtreCombo,
    PpMare,
    Kl,
    KlMd,
    Cusum,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::CmtreTrained,
        Method::CmtreRandom,
        Method::CmtreCombo,
        Method::PpMare,
        Method::Kl,
        Method::KlMd,
        Method::Cusum,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::CmtreTrained => "cmtre-trained",
            Method::CmtreRandom => "cmtre-random",
            Method::CmtreCombo => "cmtre-combo",
            Method::PpMare => "pp-mare",
            Method::Kl => "kl",
            Method::KlMd => "kl-md",
            Method::Cusum => "cusum",
        }
    }

    /// Methods that score reconstructions in pixel space.
    pub fn is_observation_method(self) -> bool {
        matches!(
            self,
            Method::CmtreTrained | Method::CmtreRandom | Method::CmtreCombo | Method::PpMare
        )
    }

    /// Methods whose verdict compares the bound's two sides.
    pub fn is_latent_method(self) -> bool {
        matches!(self, Method::Kl | Method::KlMd)
    }

    pub fn is_cmtre(self) -> bool {
        matches!(
            self,
            Method::CmtreTrained | Method::CmtreRandom | Method::CmtreCombo
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| {
                let ids: Vec<_> = Method::ALL.iter().map(|m| m.id()).collect();
                Error::Config(format!("unknown method `{s}`; known: {}", ids.join(", ")))
            })
    }
}

/// One detector's output at one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorVerdict {
    pub method: Method,
    pub step: usize,
    pub score: f64,
    pub threshold: f64,
    pub flag: bool,
}

impl DetectorVerdict {
    /// Continuous statistic used for ranking: the signed bound margin for
    /// latent methods, the raw score otherwise.
    pub fn statistic(&self) -> f64 {
        if self.method.is_latent_method() {
            self.score - self.threshold
        } else {
            self.score
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorDecode {
    /// Decode a code drawn from each belief.
    #[default]
    Sample,
    /// Decode the belief-weighted mean image.
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// PP-MARE bound on the raw pixel scale.
    pub epsilon_raw: f64,
    /// Intensity corresponding to 1.0 in rendered images.
    pub pixel_scale: f64,
    pub pp_decode: PriorDecode,
    pub lambda0: f64,
    pub lambda_decay: f64,
    pub md_floor: f64,
    pub md_form: MahalanobisForm,
    /// Multiple of the calibration deviation added to the CMTRE mean.
    pub cmtre_sigmas: f64,
    /// Overrides for the CUSUM parameters; by default they come from the
    /// calibration surprise stream.
    pub cusum_drift: Option<f64>,
    pub cusum_decision: Option<f64>,
    pub cusum_sigmas: f64,
    /// Slack when comparing the two sides of the KL bound.
    pub decision_tolerance: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            epsilon_raw: 1.0,
            pixel_scale: 255.0,
            pp_decode: PriorDecode::Sample,
            lambda0: 1.0,
            lambda_decay: 10.0,
            md_floor: 1e-6,
            md_form: MahalanobisForm::Squared,
            cmtre_sigmas: 0.5,
            cusum_drift: None,
            cusum_decision: None,
            cusum_sigmas: 5.0,
            decision_tolerance: 1e-9,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("epsilon_raw", self.epsilon_raw)?;
        positive("pixel_scale", self.pixel_scale)?;
        positive("lambda_decay", self.lambda_decay)?;
        positive("md_floor", self.md_floor)?;
        if !(self.lambda0 > 0.0 && self.lambda0 <= 1.0) {
            return Err(Error::Config(format!(
                "lambda0 must be in (0, 1], got {}",
                self.lambda0
            )));
        }
        if !(self.cmtre_sigmas >= 0.0 && self.cusum_sigmas >= 0.0) {
            return Err(Error::Config(
                "sigma multipliers must be non-negative".into(),
            ));
        }
        if self.decision_tolerance.is_nan() || self.decision_tolerance < 0.0 {
            return Err(Error::Config(
                "decision_tolerance must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// PP-MARE bound in unit-interval intensities.
    pub fn epsilon(&self) -> f64 {
        self.epsilon_raw / self.pixel_scale
    }

    /// Mahalanobis weight at step `t`.
    pub fn lambda(&self, t: usize) -> f64 {
        self.lambda0 * (-(t as f64) / self.lambda_decay).exp()
    }
}
