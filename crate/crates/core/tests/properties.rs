use proptest::prelude::*;

use novelty_wm::detectors::{cross_entropy, cusum_update, kl_divergence, mare, BoundTerms, Method};
use novelty_wm::gridworld::{GridState, Observation, VariantKind};
use novelty_wm::harness::{
    auc, confusion, delay_summary, derive_seed, EpisodeTrace, PolicyKind, StepRecord,
};
use novelty_wm::world_model::{CategoricalBelief, NORMALIZATION_TOLERANCE};

fn probs(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-4f64..1.0, k).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn belief_pair() -> impl Strategy<Value = (CategoricalBelief, CategoricalBelief)> {
    (2usize..12).prop_flat_map(|k| {
        (probs(k), probs(k)).prop_map(|(p, q)| {
            (
                CategoricalBelief::single(p).unwrap(),
                CategoricalBelief::single(q).unwrap(),
            )
        })
    })
}

fn image_pair() -> impl Strategy<Value = (Observation, Observation)> {
    (1usize..6, 1usize..6).prop_flat_map(|(w, h)| {
        let n = w * h * 3;
        (
            prop::collection::vec(0f32..=1.0, n),
            prop::collection::vec(0f32..=1.0, n),
        )
            .prop_map(move |(a, b)| {
                (
                    Observation {
                        width: w,
                        height: h,
                        pixels: a,
                    },
                    Observation {
                        width: w,
                        height: h,
                        pixels: b,
                    },
                )
            })
    })
}

fn trace(flags: Vec<bool>, onset: Option<usize>) -> EpisodeTrace {
    EpisodeTrace {
        variant: VariantKind::Teleport.into(),
        seed: 0,
        policy: PolicyKind::Scripted,
        tile_size: 8,
        steps: flags
            .into_iter()
            .enumerate()
            .map(|(t, f)| StepRecord {
                t,
                state: GridState::walled(6, 6),
                action: None,
                reward: 0.0,
                done: false,
                novel: false,
                code: None,
                verdicts: vec![novelty_wm::detectors::DetectorVerdict {
                    method: Method::Kl,
                    step: t,
                    score: f as u8 as f64,
                    threshold: 0.5,
                    flag: f,
                }],
            })
            .collect(),
        onset,
        truncated: false,
    }
}

proptest! {
    #[test]
    fn kl_is_non_negative_and_zero_on_itself((p, q) in belief_pair()) {
        prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_decomposes((p, q) in belief_pair()) {
        let h = cross_entropy(&p, &p).unwrap();
        let lhs = cross_entropy(&p, &q).unwrap();
        prop_assert!((lhs - h - kl_divergence(&p, &q).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn mare_is_a_bounded_metric((a, b) in image_pair()) {
        let d = mare(&a, &b).unwrap();
        prop_assert_eq!(d, mare(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(mare(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn log_weights_normalize(w in prop::collection::vec(-800f64..50.0, 1..40)) {
        let b = CategoricalBelief::from_log_weights(&w);
        let s: f64 = b.probs().iter().sum();
        prop_assert!((s - 1.0).abs() <= NORMALIZATION_TOLERANCE);
        prop_assert!(b.is_valid());
    }

    #[test]
    fn bound_forms_agree(lhs in 0f64..5.0, a in 0f64..5.0, b in 0f64..5.0) {
        let t = BoundTerms { lhs, kl_prior_h0: a, kl_repr_h0: b };
        prop_assert!(((lhs - t.rhs()) - ((lhs + b) - a)).abs() < 1e-12);
    }

    #[test]
    fn auc_stays_in_range_and_flips(scores in prop::collection::vec((0u8..10, any::<bool>()), 2..150)) {
        let s: Vec<(f64, bool)> = scores.iter().map(|(v, l)| (*v as f64, *l)).collect();
        if let Some(a) = auc(&s) {
            prop_assert!((0.0..=1.0).contains(&a));
            let flipped: Vec<(f64, bool)> = s.iter().map(|(v, l)| (*v, !*l)).collect();
            let f = auc(&flipped).unwrap();
            prop_assert!((a + f - 1.0).abs() < 1e-12);
            let shifted: Vec<(f64, bool)> = s.iter().map(|(v, l)| (v.exp() + 3.0, *l)).collect();
            prop_assert_eq!(auc(&shifted), Some(a));
        }
    }

    #[test]
    fn confusion_cells_cover_every_step(
        eps in prop::collection::vec((prop::collection::vec(any::<bool>(), 1..25), prop::option::of(0usize..25)), 1..6)
    ) {
        let traces: Vec<EpisodeTrace> = eps
            .into_iter()
            .map(|(f, o)| {
                let len = f.len();
                trace(f, o.map(|o| o % len))
            })
            .collect();
        let refs: Vec<&EpisodeTrace> = traces.iter().collect();
        let c = confusion(&refs, Method::Kl);
        prop_assert_eq!(c.total(), traces.iter().map(EpisodeTrace::len).sum::<usize>());
    }

    #[test]
    fn ade_is_zero_when_first_flags_hit_onset(onsets in prop::collection::vec(0usize..20, 1..8), tail in 0usize..5) {
        let traces: Vec<EpisodeTrace> = onsets
            .iter()
            .map(|&o| {
                let flags: Vec<bool> = (0..o + 1 + tail).map(|t| t >= o).collect();
                trace(flags, Some(o))
            })
            .collect();
        let d = delay_summary(&traces, Method::Kl);
        prop_assert_eq!(d.ade, Some(0.0));
        prop_assert_eq!(d.missed, 0);
    }

    #[test]
    fn cusum_statistic_is_non_negative(scores in prop::collection::vec(0f64..3.0, 1..100), drift in 0f64..2.0) {
        let mut s = 0.0;
        for x in scores {
            let (next, flag) = cusum_update(s, x, drift, 4.0);
            prop_assert!(next >= 0.0);
            prop_assert_eq!(flag, next > 4.0);
            s = if flag { 0.0 } else { next };
        }
    }

    #[test]
    fn seed_streams_depend_on_every_input(root in any::<u64>(), i in 0u64..1000) {
        let a = derive_seed(root, "x", i);
        prop_assert_eq!(a, derive_seed(root, "x", i));
        prop_assert_ne!(a, derive_seed(root, "x", i + 1));
        prop_assert_ne!(a, derive_seed(root, "y", i));
    }
}
