use serde::{Deserialize, Serialize};

use super::pipeline::replay_scores;
use super::seeds::derive_seed;
use super::trace::EpisodeTrace;
use crate::detectors::{DetectorConfig, Method};
use crate::error::Result;
use crate::world_model::WorldModel;

/// Delay statistics over the episodes that carry an onset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelaySummary {
    /// Mean |first flag − onset| over detected episodes; absent when none
    /// was detected.
    pub ade: Option<f64>,
    pub detected: usize,
    /// Episodes with an onset but no flag at all.
    pub missed: usize,
}

pub fn delay_summary(traces: &[EpisodeTrace], method: Method) -> DelaySummary {
    let mut total = 0.0;
    let mut detected = 0;
    let mut missed = 0;
    for t in traces {
        let Some(onset) = t.onset else { continue };
        match t.first_flag(method) {
            Some(f) => {
                total += (f as f64 - onset as f64).abs();
                detected += 1;
            }
            None => missed += 1,
        }
    }
    DelaySummary {
        ade: (detected > 0).then(|| total / detected as f64),
        detected,
        missed,
    }
}

pub fn average_delay_error(traces: &[EpisodeTrace], method: Method) -> Option<f64> {
    delay_summary(traces, method).ade
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn fp_rate(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn fn_rate(&self) -> Option<f64> {
        ratio(self.fn_, self.fn_ + self.tp)
    }
}

/// Ground-truth label of step `t`: positive from the onset on.
pub fn step_label(trace: &EpisodeTrace, t: usize) -> bool {
    trace.onset.is_some_and(|o| t >= o)
}

/// Step-level confusion counts. Steps without a verdict for `method` are
/// skipped.
pub fn confusion(traces: &[&EpisodeTrace], method: Method) -> Confusion {
    let mut c = Confusion::default();
    for trace in traces {
        for step in &trace.steps {
            if let Some(v) = step.verdict(method) {
                c.add(v.flag, step_label(trace, step.t));
            }
        }
    }
    c
}

/// Summary rates of a confusion table; undefined cells stay absent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRates {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
    pub fp_rate: Option<f64>,
    pub fn_rate: Option<f64>,
}

impl From<&Confusion> for ConfusionRates {
    fn from(c: &Confusion) -> Self {
        ConfusionRates {
            precision: c.precision(),
            recall: c.recall(),
            accuracy: c.accuracy(),
            fp_rate: c.fp_rate(),
            fn_rate: c.fn_rate(),
        }
    }
}

/// Pools novel-variant traces (labelled by onset) with nominal traces (all
/// negative) and returns the step-level rates.
pub fn confusion_metrics(
    traces_novel: &[EpisodeTrace],
    traces_nominal: &[EpisodeTrace],
    method: Method,
) -> (Confusion, ConfusionRates) {
    let all: Vec<&EpisodeTrace> = traces_novel.iter().chain(traces_nominal).collect();
    let c = confusion(&all, method);
    let rates = ConfusionRates::from(&c);
    (c, rates)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Absent unless both classes occur.
pub fn auc(scores: &[(f64, bool)]) -> Option<f64> {
    let pos = scores.iter().filter(|s| s.1).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut sorted: Vec<(f64, bool)> = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Twice the number of (positive, negative) pairs won by the positive.
    let mut wins2: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0.total_cmp(&sorted[i].0).is_eq() {
            j += 1;
        }
        let group_pos = sorted[i..j].iter().filter(|s| s.1).count() as u128;
        let group_neg = (j - i) as u128 - group_pos;
        wins2 += group_pos * (2 * neg_below + group_neg);
        neg_below += group_neg;
        i = j;
    }
    Some(wins2 as f64 / (2 * pos as u128 * neg as u128) as f64)
}

/// (statistic, label) pairs of every step carrying a verdict for `method`.
pub fn scored_steps(traces: &[&EpisodeTrace], method: Method) -> Vec<(f64, bool)> {
    traces
        .iter()
        .flat_map(|t| {
            t.steps.iter().filter_map(move |s| {
                s.verdict(method)
                    .map(|v| (v.statistic(), step_label(t, s.t)))
            })
        })
        .collect()
}

/// Fraction of episodes flagged at each step index, over the episodes that
/// reach that index. The curve is as long as the longest episode.
pub fn fp_by_step(nominal: &[EpisodeTrace], method: Method) -> Vec<f64> {
    let len = nominal.iter().map(EpisodeTrace::len).max().unwrap_or(0);
    let mut flagged = vec![0usize; len];
    let mut reached = vec![0usize; len];
    for trace in nominal {
        for step in &trace.steps {
            reached[step.t] += 1;
            if step.verdict(method).is_some_and(|v| v.flag) {
                flagged[step.t] += 1;
            }
        }
    }
    flagged
        .iter()
        .zip(&reached)
        .map(|(f, r)| if *r == 0 { 0.0 } else { *f as f64 / *r as f64 })
        .collect()
}

/// Step-averaged bound quantities of one model snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub train_steps: usize,
    /// KL[p(z|h,x) || p(z|h)], the Bayesian surprise.
    pub mean_lhs: f64,
    /// KL[p(z|h,x) || p(z|h0)] − KL[p(z|h,x) || p(z|h0,x)].
    pub mean_rhs: f64,
    /// KL[p(z|h,x) || p(z|h0,x)].
    pub mean_repr_h0: f64,
    /// Steps scored.
    pub steps: usize,
}

/// Averages of the bound terms over `nominal` for every snapshot. Each
/// snapshot pairs a training size with the model fitted on that many steps.
pub fn bound_behavior_curves(
    snapshots: &[(usize, WorldModel)],
    nominal: &[EpisodeTrace],
    config: &DetectorConfig,
    seed: u64,
) -> Result<Vec<BoundPoint>> {
    let mut out = Vec::with_capacity(snapshots.len());
    for (train_steps, model) in snapshots {
        let (mut lhs, mut rhs, mut gap, mut n) = (0.0, 0.0, 0.0, 0usize);
        for (i, trace) in nominal.iter().enumerate() {
            let scores =
                replay_scores(model, config, trace, derive_seed(seed, "curves", i as u64))?;
            for s in scores {
                lhs += s.terms.lhs;
                rhs += s.terms.rhs();
                gap += s.terms.kl_repr_h0;
                n += 1;
            }
        }
        let n_f = n.max(1) as f64;
        out.push(BoundPoint {
            train_steps: *train_steps,
            mean_lhs: lhs / n_f,
            mean_rhs: rhs / n_f,
            mean_repr_h0: gap / n_f,
            steps: n,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::DetectorVerdict;
    use crate::gridworld::{GridState, VariantKind};
    use crate::harness::{PolicyKind, StepRecord};

    fn toy(flags: &[bool], onset: Option<usize>, kind: VariantKind) -> EpisodeTrace {
        EpisodeTrace {
            variant: kind.into(),
            seed: 0,
            policy: PolicyKind::Scripted,
            tile_size: 8,
            steps: flags
                .iter()
                .enumerate()
                .map(|(t, &f)| StepRecord {
                    t,
                    state: GridState::walled(6, 6),
                    action: None,
                    reward: 0.0,
                    done: false,
                    novel: onset.is_some_and(|o| t >= o),
                    code: None,
                    verdicts: vec![DetectorVerdict {
                        method: Method::Kl,
                        step: t,
                        score: if f { 1.0 } else { 0.0 },
                        threshold: 0.5,
                        flag: f,
                    }],
                })
                .collect(),
            onset,
            truncated: false,
        }
    }

    #[test]
    fn ade_examples() {
        let exact = vec![
            toy(&[false, true, true], Some(1), VariantKind::Teleport),
            toy(&[true, true], Some(0), VariantKind::Teleport),
        ];
        assert_eq!(average_delay_error(&exact, Method::Kl), Some(0.0));

        let mut late_a = vec![false; 10];
        late_a[7] = true;
        let mut late_b = vec![false; 10];
        late_b[9] = true;
        let late = vec![
            toy(&late_a, Some(5), VariantKind::Teleport),
            toy(&late_b, Some(5), VariantKind::Teleport),
        ];
        assert_eq!(average_delay_error(&late, Method::Kl), Some(3.0));

        let mut early = vec![false; 10];
        early[3] = true;
        assert_eq!(
            average_delay_error(&[toy(&early, Some(5), VariantKind::Teleport)], Method::Kl),
            Some(2.0)
        );
    }

    #[test]
    fn missed_episodes_are_reported_separately() {
        let traces = vec![
            toy(&[false, false, false], Some(1), VariantKind::Teleport),
            toy(&[false, false, true], Some(1), VariantKind::Teleport),
            toy(&[false, false], None, VariantKind::Nominal),
        ];
        let d = delay_summary(&traces, Method::Kl);
        assert_eq!(d.detected, 1);
        assert_eq!(d.missed, 1);
        assert_eq!(d.ade, Some(1.0));
        assert_eq!(average_delay_error(&traces[..1], Method::Kl), None);
    }

    #[test]
    fn perfect_and_silent_detectors() {
        let novel = vec![toy(&[false, true, true], Some(1), VariantKind::BrokenDoor)];
        let nominal = vec![toy(&[false, false], None, VariantKind::Nominal)];
        let (c, r) = confusion_metrics(&novel, &nominal, Method::Kl);
        assert_eq!(c.total(), 5);
        assert_eq!(
            (r.precision, r.recall, r.accuracy),
            (Some(1.0), Some(1.0), Some(1.0))
        );

        let silent = vec![toy(
            &[false, false, false],
            Some(1),
            VariantKind::BrokenDoor,
        )];
        let (c, r) = confusion_metrics(&silent, &nominal, Method::Kl);
        assert_eq!(r.recall, Some(0.0));
        assert_eq!(r.fp_rate, Some(0.0));
        assert_eq!(r.precision, None);
        assert_eq!(c.tp + c.fp, 0);
    }

    #[test]
    fn auc_examples() {
        let sep = [(0.1, false), (0.4, true), (0.35, false), (0.8, true)];
        assert_eq!(auc(&sep), Some(1.0));
        let inv: Vec<_> = sep.iter().map(|(s, l)| (-s, *l)).collect();
        assert_eq!(auc(&inv), Some(0.0));
        // positives {0.35, 0.8} vs negatives {0.1, 0.35}: wins 1, 1, 0.5, 1
        let tie = [(0.1, false), (0.35, true), (0.35, false), (0.8, true)];
        assert_eq!(auc(&tie), Some(3.5 / 4.0));
        assert_eq!(auc(&[(0.1, true), (0.2, true)]), None);
    }

    #[test]
    fn fp_curve_shape() {
        let nominal = vec![
            toy(&[true, false, false], None, VariantKind::Nominal),
            toy(&[true, true], None, VariantKind::Nominal),
        ];
        assert_eq!(fp_by_step(&nominal, Method::Kl), vec![1.0, 0.5, 0.0]);
        let quiet = vec![toy(&[false; 4], None, VariantKind::Nominal)];
        assert_eq!(fp_by_step(&quiet, Method::Kl), vec![0.0; 4]);
        assert!(fp_by_step(&[], Method::Kl).is_empty());
    }
}
