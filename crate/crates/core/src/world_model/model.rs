//! Count-based latent conditionals over a codebook.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::belief::{CategoricalBelief, LatentSample};
use super::codebook::Codebook;
use super::context::{ContextKey, RecurrentContext, MAX_CONTEXT_LEN};
use crate::error::{Error, Result};
use crate::gridworld::Observation;
use crate::harness::EpisodeTrace;

pub const CHECKPOINT_FORMAT: &str = "novelty-wm-model";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Pseudo-count added to every code at query time.
    pub alpha: f64,
    /// Temperature of the observation-match likelihood exp(-MARE / tau).
    pub tau: f64,
    pub context_len: usize,
    /// Codebook match radius in MARE units.
    pub radius: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            alpha: 1e-3,
            tau: 1e-4,
            context_len: 1,
            radius: 0.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(1..=MAX_CONTEXT_LEN).contains(&self.context_len) {
            return Err(Error::Config(format!(
                "context length must be in 1..={MAX_CONTEXT_LEN}, got {}",
                self.context_len
            )));
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!(
                "radius must be non-negative, got {}",
                self.radius
            )));
        }
        Ok(())
    }
}

/// Raw counts. Smoothing is applied only when a distribution is queried.
/// The per-(context, code) table doubles as the representation counts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldModelTables {
    #[serde(with = "context_table")]
    pub prior_counts: BTreeMap<ContextKey, BTreeMap<u32, u64>>,
    pub marginal_counts: Vec<u64>,
    pub alpha: f64,
}

mod context_table {
    use super::*;
    use serde::{Deserializer, Serializer};

    type Row = (ContextKey, Vec<(u32, u64)>);

    pub fn serialize<S: Serializer>(
        table: &BTreeMap<ContextKey, BTreeMap<u32, u64>>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Row> = table
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().map(|(c, n)| (*c, *n)).collect()))
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BTreeMap<ContextKey, BTreeMap<u32, u64>>, D::Error> {
        let rows = Vec::<Row>::deserialize(d)?;
        Ok(rows
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().collect()))
            .collect())
    }
}

impl WorldModelTables {
    pub fn num_contexts(&self) -> usize {
        self.prior_counts.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.prior_counts.values().map(BTreeMap::len).sum()
    }

    pub fn total_steps(&self) -> u64 {
        self.marginal_counts.iter().sum()
    }
}

/// The four belief conditionals of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepBeliefs {
    /// p(z | h)
    pub prior: CategoricalBelief,
    /// p(z | h, x)
    pub posterior: CategoricalBelief,
    /// p(z | h0)
    pub prior_h0: CategoricalBelief,
    /// p(z | h0, x)
    pub posterior_h0: CategoricalBelief,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    codebook: Codebook,
    tables: WorldModelTables,
    params: ModelParams,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    model: WorldModel,
}

fn smoothed(counts: impl Iterator<Item = (usize, u64)>, k: usize, alpha: f64) -> Vec<f64> {
    let mut p = vec![alpha; k];
    let mut total = 0u64;
    for (code, n) in counts {
        p[code] += n as f64;
        total += n;
    }
    let z = total as f64 + alpha * k as f64;
    for v in &mut p {
        *v /= z;
    }
    p
}

fn posterior(prior: &CategoricalBelief, log_lik: &[f64]) -> CategoricalBelief {
    let lw: Vec<f64> = prior
        .probs()
        .iter()
        .zip(log_lik)
        .map(|(p, l)| p.ln() + l)
        .collect();
    CategoricalBelief::from_log_weights(&lw)
}

impl WorldModel {
    /// Fits the codebook and count tables to the given episodes.
    pub fn train(buffer: &[EpisodeTrace], params: ModelParams) -> Result<Self> {
        Self::train_prefix(buffer, params, usize::MAX)
    }

    /// Fits on the first `max_steps` observations of `buffer`, taken in order.
    pub fn train_prefix(
        buffer: &[EpisodeTrace],
        params: ModelParams,
        max_steps: usize,
    ) -> Result<Self> {
        params.validate()?;
        let total: usize = buffer.iter().map(EpisodeTrace::len).sum();
        if total == 0 || max_steps == 0 {
            return Err(Error::Calibration(
                "training buffer holds no observations".into(),
            ));
        }
        let mut used = Vec::new();
        let mut remaining = max_steps;
        for trace in buffer {
            if remaining == 0 {
                break;
            }
            let n = trace.len().min(remaining);
            used.push((trace, n));
            remaining -= n;
        }
        let frames = used
            .iter()
            .flat_map(|(trace, n)| (0..*n).map(move |t| trace.observation(t)));
        let (codebook, assignment) = Codebook::build(frames, params.radius)?;

        let mut tables = WorldModelTables {
            prior_counts: BTreeMap::new(),
            marginal_counts: vec![0; codebook.len()],
            alpha: params.alpha,
        };
        let mut codes = assignment.into_iter();
        for (trace, n) in &used {
            let mut h = RecurrentContext::null(params.context_len);
            for step in &trace.steps[..*n] {
                let z = codes.next().expect("one code per frame");
                tables.marginal_counts[z] += 1;
                if !h.is_null() {
                    *tables
                        .prior_counts
                        .entry(h.key())
                        .or_default()
                        .entry(z as u32)
                        .or_insert(0) += 1;
                }
                match step.action {
                    Some(a) => h = h.update(z, a),
                    None => break,
                }
            }
        }
        Ok(WorldModel {
            codebook,
            tables,
            params,
        })
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn tables(&self) -> &WorldModelTables {
        &self.tables
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn num_codes(&self) -> usize {
        self.codebook.len()
    }

    pub fn null_context(&self) -> RecurrentContext {
        RecurrentContext::null(self.params.context_len)
    }

    /// p(z | h0): the smoothed code marginal.
    pub fn prior_h0(&self) -> CategoricalBelief {
        let counts = self.tables.marginal_counts.iter().copied().enumerate();
        CategoricalBelief::single(smoothed(counts, self.num_codes(), self.params.alpha))
            .expect("smoothed counts are normalized")
    }

    /// p(z | h). The null context falls back to the marginal; an unseen
    /// context yields the uniform distribution.
    pub fn prior(&self, h: &RecurrentContext) -> CategoricalBelief {
        if h.is_null() {
            return self.prior_h0();
        }
        let k = self.num_codes();
        let p = match self.tables.prior_counts.get(&h.key()) {
            Some(row) => smoothed(
                row.iter().map(|(c, n)| (*c as usize, *n)),
                k,
                self.params.alpha,
            ),
            None => vec![1.0 / k as f64; k],
        };
        CategoricalBelief::single(p).expect("smoothed counts are normalized")
    }

    /// log exp(-MARE(x, image_k) / tau) for every code k.
    pub fn log_likelihood(&self, x: &Observation) -> Result<Vec<f64>> {
        let tau = self.params.tau;
        Ok(self
            .codebook
            .distances(x)?
            .into_iter()
            .map(|d| -d / tau)
            .collect())
    }

    /// p(z | h, x) ∝ exp(-MARE(x, image_z) / tau) · p(z | h).
    pub fn represent(&self, h: &RecurrentContext, x: &Observation) -> Result<CategoricalBelief> {
        Ok(posterior(&self.prior(h), &self.log_likelihood(x)?))
    }

    pub fn represent_h0(&self, x: &Observation) -> Result<CategoricalBelief> {
        Ok(posterior(&self.prior_h0(), &self.log_likelihood(x)?))
    }

    /// All four conditionals, sharing one likelihood evaluation.
    pub fn query(&self, h: &RecurrentContext, x: &Observation) -> Result<StepBeliefs> {
        let ll = self.log_likelihood(x)?;
        let prior = self.prior(h);
        let prior_h0 = self.prior_h0();
        Ok(StepBeliefs {
            posterior: posterior(&prior, &ll),
            posterior_h0: posterior(&prior_h0, &ll),
            prior,
            prior_h0,
        })
    }

    /// Image of the sampled code. The tabular decoder ignores `h`.
    pub fn decode(&self, _h: &RecurrentContext, z: &LatentSample) -> Observation {
        self.codebook.mean_image(z.code())
    }

    /// Belief-weighted average of the code images.
    pub fn decode_belief(&self, _h: &RecurrentContext, belief: &CategoricalBelief) -> Observation {
        let (w, h) = self.codebook.image_shape();
        let mut acc = vec![0.0f64; w * h * 3];
        for (k, p) in belief.probs().iter().enumerate() {
            // mass below this cannot move a pixel at f32 precision
            if *p < 1e-12 {
                continue;
            }
            let img = self.codebook.mean_image(k);
            for (a, v) in acc.iter_mut().zip(&img.pixels) {
                *a += p * *v as f64;
            }
        }
        Observation {
            width: w,
            height: h,
            pixels: acc.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            model: self.clone(),
        };
        serde_json::to_string(&ck).map_err(|e| Error::Contract(format!("checkpoint encoding: {e}")))
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::format(origin, e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::format(
                origin,
                format!(
                    "expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}, found {} v{}",
                    ck.format, ck.version
                ),
            ));
        }
        let mut model = ck.model;
        model.codebook.reindex();
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::harness::write_text(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{Action, EnvVariant, GridState};
    use crate::harness::{PolicyKind, StepRecord};

    /// Trace whose frames are distinguished by agent position along row 1.
    fn trace(cols: &[usize], action: Action) -> EpisodeTrace {
        let steps = cols
            .iter()
            .enumerate()
            .map(|(t, &c)| {
                let mut s = GridState::walled(6, 6);
                s.agent_pos = (c, 1);
                StepRecord {
                    t,
                    state: s,
                    action: (t + 1 < cols.len()).then_some(action),
                    reward: 0.0,
                    done: false,
                    novel: false,
                    code: None,
                    verdicts: Vec::new(),
                }
            })
            .collect();
        EpisodeTrace {
            variant: EnvVariant::nominal(),
            seed: 0,
            policy: PolicyKind::Scripted,
            tile_size: 8,
            steps,
            onset: None,
            truncated: false,
        }
    }

    fn params(alpha: f64) -> ModelParams {
        ModelParams {
            alpha,
            ..ModelParams::default()
        }
    }

    #[test]
    fn empty_buffer_is_calibration_error() {
        assert!(matches!(
            WorldModel::train(&[], ModelParams::default()),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn repeated_frame_gives_single_code() {
        let m = WorldModel::train(&[trace(&[1, 1, 1, 1], Action::Done)], params(1e-3)).unwrap();
        assert_eq!(m.num_codes(), 1);
        let h = m.null_context().update(0, Action::Done);
        assert_eq!(m.prior(&h).probs(), &[1.0]);
        assert_eq!(m.prior_h0().probs(), &[1.0]);
    }

    #[test]
    fn alternating_frames_predict_each_other() {
        let m = WorldModel::train(&[trace(&[1, 2, 1, 2, 1, 2], Action::Forward)], params(1e-9))
            .unwrap();
        assert_eq!(m.num_codes(), 2);
        let after_a = m.null_context().update(0, Action::Forward);
        let p = m.prior(&after_a);
        assert!((p.probs()[1] - 1.0).abs() < 1e-8, "{:?}", p.probs());
    }

    #[test]
    fn laplace_prior_arithmetic() {
        // context (0, Forward) followed by code 1 thirty times and code 2 ten times
        let mut tables = WorldModelTables {
            prior_counts: BTreeMap::new(),
            marginal_counts: vec![40, 30, 10],
            alpha: 1.0,
        };
        tables.prior_counts.insert(
            vec![(0, Action::Forward)],
            [(1, 30), (2, 10)].into_iter().collect(),
        );
        let base = WorldModel::train(&[trace(&[1, 2, 3], Action::Forward)], params(1.0)).unwrap();
        let m = WorldModel { tables, ..base };
        let h = m.null_context().update(0, Action::Forward);
        let p = m.prior(&h);
        let expect = [1.0 / 43.0, 31.0 / 43.0, 11.0 / 43.0];
        for (a, b) in p.probs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        // with only the two observed outcomes the familiar 31/42, 11/42 appears
        let two = smoothed([(0, 30u64), (1, 10)].into_iter(), 2, 1.0);
        assert!((two[0] - 31.0 / 42.0).abs() < 1e-15);
        assert!((two[1] - 11.0 / 42.0).abs() < 1e-15);
    }

    #[test]
    fn unseen_context_is_uniform() {
        let m = WorldModel::train(&[trace(&[1, 2, 3], Action::Forward)], params(1e-3)).unwrap();
        let h = m.null_context().update(2, Action::Toggle);
        for p in m.prior(&h).probs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn marginal_matches_histogram() {
        let m = WorldModel::train(&[trace(&[1, 1, 1, 2], Action::Forward)], params(1e-12)).unwrap();
        let p = m.prior_h0();
        assert!((p.probs()[0] - 0.75).abs() < 1e-9);
        assert!((p.probs()[1] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn exact_frame_concentrates_posterior() {
        let m = WorldModel::train(&[trace(&[1, 2, 3, 4], Action::Forward)], params(1e-6)).unwrap();
        for k in 0..m.num_codes() {
            let img = m.decode(&m.null_context(), &LatentSample::single(k));
            let b = m.represent_h0(&img).unwrap();
            assert_eq!(b.argmax().code(), k);
            assert!(b.max_mass() > 0.999);
        }
    }

    #[test]
    fn decode_of_uniform_belief_averages() {
        let m = WorldModel::train(&[trace(&[1, 2], Action::Forward)], params(1e-3)).unwrap();
        let h = m.null_context();
        let a = m.decode(&h, &LatentSample::single(0));
        let b = m.decode(&h, &LatentSample::single(1));
        let mid = m.decode_belief(&h, &CategoricalBelief::uniform(2));
        for ((x, y), z) in a.pixels.iter().zip(&b.pixels).zip(&mid.pixels) {
            assert!(((x + y) / 2.0 - z).abs() < 1e-6);
        }
    }

    #[test]
    fn checkpoint_round_trips() {
        let m =
            WorldModel::train(&[trace(&[1, 2, 3, 2, 1], Action::Forward)], params(1e-3)).unwrap();
        let back = WorldModel::from_json(&m.to_json().unwrap(), Path::new("mem")).unwrap();
        assert_eq!(back, m);
        let x = trace(&[3], Action::Forward).observation(0);
        let h = m.null_context().update(1, Action::Forward);
        assert_eq!(back.query(&h, &x).unwrap(), m.query(&h, &x).unwrap());
    }

    #[test]
    fn wrong_checkpoint_tag_is_rejected() {
        let m = WorldModel::train(&[trace(&[1, 2], Action::Forward)], params(1e-3)).unwrap();
        let text = m.to_json().unwrap().replace(CHECKPOINT_FORMAT, "other");
        assert!(matches!(
            WorldModel::from_json(&text, Path::new("x")),
            Err(Error::Format { .. })
        ));
    }
}
