use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// One or more independent categorical distributions over latent codes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalBelief {
    factors: Vec<Vec<f64>>,
}

/// Drawn code index per factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatentSample(pub Vec<usize>);

impl LatentSample {
    pub fn single(index: usize) -> Self {
        LatentSample(vec![index])
    }

    /// Primary code (first factor).
    pub fn code(&self) -> usize {
        self.0[0]
    }

    /// Concatenated one-hot encoding given each factor's size.
    pub fn one_hot(&self, sizes: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(sizes.iter().sum());
        for (idx, &k) in self.0.iter().zip(sizes) {
            out.extend((0..k).map(|i| if i == *idx { 1.0 } else { 0.0 }));
        }
        out
    }
}

fn check_factor(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Contract("empty belief factor".into()));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Contract(
            "belief has negative or non-finite mass".into(),
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Contract(format!("belief sums to {total}")));
    }
    Ok(())
}

impl CategoricalBelief {
    pub fn new(factors: Vec<Vec<f64>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Contract("belief needs at least one factor".into()));
        }
        for f in &factors {
            check_factor(f)?;
        }
        Ok(CategoricalBelief { factors })
    }

    pub fn single(probs: Vec<f64>) -> Result<Self> {
        Self::new(vec![probs])
    }

    pub fn uniform(k: usize) -> Self {
        CategoricalBelief {
            factors: vec![vec![1.0 / k as f64; k]],
        }
    }

    pub fn one_hot(k: usize, index: usize) -> Self {
        let mut p = vec![0.0; k];
        p[index] = 1.0;
        CategoricalBelief { factors: vec![p] }
    }

    /// Normalizes unnormalized log weights. Entries that would underflow are
    /// clamped to the smallest positive double so every code keeps support.
    pub fn from_log_weights(log_w: &[f64]) -> Self {
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = log_w.iter().map(|w| (w - max).exp()).collect();
        let total: f64 = p.iter().sum();
        for v in &mut p {
            *v = (*v / total).max(f64::MIN_POSITIVE);
        }
        CategoricalBelief { factors: vec![p] }
    }

    /// Stacks the factors of several beliefs into one factored belief.
    pub fn concat(beliefs: Vec<CategoricalBelief>) -> Self {
        CategoricalBelief {
            factors: beliefs.into_iter().flat_map(|b| b.factors).collect(),
        }
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factors
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.factors.iter().map(Vec::len).collect()
    }

    /// First-factor probabilities.
    pub fn probs(&self) -> &[f64] {
        &self.factors[0]
    }

    pub fn argmax(&self) -> LatentSample {
        LatentSample(
            self.factors
                .iter()
                .map(|f| {
                    f.iter()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                            if v > best.1 {
                                (i, v)
                            } else {
                                best
                            }
                        })
                        .0
                })
                .collect(),
        )
    }

    pub fn max_mass(&self) -> f64 {
        self.probs().iter().copied().fold(0.0, f64::max)
    }

    pub fn is_valid(&self) -> bool {
        self.factors.iter().all(|f| check_factor(f).is_ok())
    }

    /// Inverse-CDF draw per factor.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LatentSample {
        LatentSample(
            self.factors
                .iter()
                .map(|f| {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    for (i, p) in f.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            return i;
                        }
                    }
                    // rounding left u above the cumulative total
                    f.iter().rposition(|p| *p > 0.0).unwrap_or(f.len() - 1)
                })
                .collect(),
        )
    }
}

pub fn sample<R: Rng + ?Sized>(belief: &CategoricalBelief, rng: &mut R) -> LatentSample {
    belief.sample(rng)
}
