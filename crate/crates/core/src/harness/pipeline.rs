//! Per-step scoring shared by evaluation, calibration and training curves.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::collect::{finish_trace, run_until_budget, Agent};
use super::seeds::{derive_rng, derive_seed};
use super::trace::{EpisodeTrace, PolicyKind, StepRecord};
use crate::detectors::{
    cmtre_calibrate_with, kl_bound_verdict, kl_md_verdict, mahalanobis, mare, mean_std,
    pp_mare_verdict, BoundTerms, Cusum, DetectorConfig, DetectorVerdict, MareThresholds, Method,
    PriorDecode,
};
use crate::error::{Error, Result};
use crate::gridworld::{EnvConfig, EnvVariant, Environment, Observation};
use crate::world_model::{LatentSample, RecurrentContext, WorldModel};

/// Everything the detectors need from one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepScores {
    pub terms: BoundTerms,
    /// MARE between the frame and its argmax-posterior reconstruction.
    pub recon_mare: f64,
    /// MARE between prior and posterior reconstructions.
    pub pp_mare: f64,
    /// Mahalanobis distance of the posterior sample.
    pub md_distance: f64,
    pub z_posterior: LatentSample,
}

impl StepScores {
    /// Bayesian surprise of the step.
    pub fn surprise(&self) -> f64 {
        self.terms.lhs
    }
}

/// Scores `x` under context `h`. Draws exactly two codes from `rng`
/// (posterior, then prior) whatever the configuration, so the random stream
/// does not depend on which detectors are enabled.
pub fn score_step<R: Rng + ?Sized>(
    model: &WorldModel,
    config: &DetectorConfig,
    h: &RecurrentContext,
    x: &Observation,
    rng: &mut R,
) -> Result<StepScores> {
    let beliefs = model.query(h, x)?;
    let terms = BoundTerms::from_beliefs(&beliefs)?;
    let z_post = beliefs.posterior.sample(rng);
    let z_prior = beliefs.prior.sample(rng);

    let recon = model.decode(h, &beliefs.posterior.argmax());
    let recon_mare = mare(x, &recon)?;
    let pp_mare = match config.pp_decode {
        PriorDecode::Sample if z_post == z_prior => 0.0,
        PriorDecode::Sample => mare(&model.decode(h, &z_prior), &model.decode(h, &z_post))?,
        PriorDecode::Mean => mare(
            &model.decode_belief(h, &beliefs.prior),
            &model.decode_belief(h, &beliefs.posterior),
        )?,
    };
    let md_distance = mahalanobis(&z_post, &beliefs.posterior, config.md_floor, config.md_form)?;
    Ok(StepScores {
        terms,
        recon_mare,
        pp_mare,
        md_distance,
        z_posterior: z_post,
    })
}

/// Thresholds fitted on held-out data before evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub mare: MareThresholds,
    pub cusum_drift: f64,
    pub cusum_decision: f64,
    pub trained_samples: usize,
    pub random_samples: usize,
}

impl Calibration {
    /// Standard deviation convention used for every threshold.
    pub const STD_DIVISOR: &'static str = "population (n)";
}

/// Replays a recorded episode through the model, feeding the context with
/// posterior samples drawn from `rng_seed`.
pub fn replay_scores(
    model: &WorldModel,
    config: &DetectorConfig,
    trace: &EpisodeTrace,
    rng_seed: u64,
) -> Result<Vec<StepScores>> {
    let mut rng = derive_rng(rng_seed, "detector", 0);
    let mut h = model.null_context();
    let mut out = Vec::with_capacity(trace.len());
    for (t, step) in trace.steps.iter().enumerate() {
        let s = score_step(model, config, &h, &trace.observation(t), &mut rng)?;
        if let Some(a) = step.action {
            h = h.update(s.z_posterior.code(), a);
        }
        out.push(s);
    }
    Ok(out)
}

/// CMTRE thresholds from trained-agent and random-agent reconstruction
/// errors; CUSUM drift and decision from the trained-agent surprise stream.
pub fn calibrate(
    model: &WorldModel,
    config: &DetectorConfig,
    trained: &[EpisodeTrace],
    random: &[EpisodeTrace],
    seed: u64,
) -> Result<Calibration> {
    let mut trained_mare = Vec::new();
    let mut surprise = Vec::new();
    for (i, t) in trained.iter().enumerate() {
        for s in replay_scores(
            model,
            config,
            t,
            derive_seed(seed, "calibrate/trained", i as u64),
        )? {
            trained_mare.push(s.recon_mare);
            surprise.push(s.surprise());
        }
    }
    let mut random_mare = Vec::new();
    for (i, t) in random.iter().enumerate() {
        for s in replay_scores(
            model,
            config,
            t,
            derive_seed(seed, "calibrate/random", i as u64),
        )? {
            random_mare.push(s.recon_mare);
        }
    }
    let mare = cmtre_calibrate_with(&trained_mare, &random_mare, config.cmtre_sigmas)?;
    if surprise.len() < 2 {
        return Err(Error::Calibration(
            "surprise stream too short for CUSUM".into(),
        ));
    }
    let (mean, std) = mean_std(&surprise);
    Ok(Calibration {
        mare,
        cusum_drift: config.cusum_drift.unwrap_or(mean),
        cusum_decision: config
            .cusum_decision
            .unwrap_or(mean + config.cusum_sigmas * std),
        trained_samples: trained_mare.len(),
        random_samples: random_mare.len(),
    })
}

/// Verdicts of the requested methods for one step. The CUSUM tracker is
/// always advanced so its state does not depend on the method list.
pub fn step_verdicts(
    scores: &StepScores,
    t: usize,
    calibration: &Calibration,
    config: &DetectorConfig,
    cusum: &mut Cusum,
    methods: &[Method],
) -> Vec<DetectorVerdict> {
    let cusum_verdict = cusum.observe(scores.surprise(), t);
    let mut out = Vec::with_capacity(methods.len());
    for &m in methods {
        let v = match m {
            Method::CmtreTrained | Method::CmtreRandom | Method::CmtreCombo => {
                let th = calibration.mare.for_method(m).expect("cmtre method");
                DetectorVerdict {
                    method: m,
                    step: t,
                    score: scores.recon_mare,
                    threshold: th,
                    flag: scores.recon_mare > th,
                }
            }
            Method::PpMare => pp_mare_verdict(scores.pp_mare, config.epsilon(), t),
            Method::Kl => kl_bound_verdict(&scores.terms, t, config.decision_tolerance),
            Method::KlMd => kl_md_verdict(&scores.terms, scores.md_distance, t, config),
            Method::Cusum => cusum_verdict,
        };
        out.push(v);
    }
    out
}

/// Everything fixed across the episodes of one evaluation.
#[derive(Clone, Copy, Debug)]
pub struct Detectors<'a> {
    pub model: &'a WorldModel,
    pub calibration: &'a Calibration,
    pub config: &'a DetectorConfig,
    pub methods: &'a [Method],
}

/// Plays one episode with the model attached. The model is only read.
pub fn run_episode(
    variant: EnvVariant,
    policy: PolicyKind,
    detectors: &Detectors<'_>,
    seed: u64,
    env_config: EnvConfig,
) -> Result<EpisodeTrace> {
    let Detectors {
        model,
        calibration,
        config,
        methods,
    } = *detectors;
    let mut env = Environment::new(variant, seed, env_config);
    model.codebook().check_shape(&env.observation())?;
    let mut agent = Agent::new(policy, derive_rng(seed, "policy", 0));
    let mut rng = derive_rng(seed, "detector", 0);
    let mut cusum = Cusum::new(calibration.cusum_drift, calibration.cusum_decision);
    let mut h = model.null_context();
    let mut steps = Vec::new();
    let (mut reward, mut done, mut truncated) = (0.0, false, false);
    loop {
        let t = steps.len();
        let x = env.observation();
        let scores = score_step(model, config, &h, &x, &mut rng)?;
        let verdicts = step_verdicts(&scores, t, calibration, config, &mut cusum, methods);
        let action = (!env.is_finished()).then(|| agent.act(env.state()));
        let code = scores.z_posterior.code();
        steps.push(StepRecord {
            t,
            state: env.state().clone(),
            action,
            reward,
            done,
            novel: env.novel_now(),
            code: Some(code),
            verdicts,
        });
        let Some(a) = action else { break };
        h = h.update(code, a);
        let out = env.step(a);
        reward = out.reward.reward;
        done = out.reward.done;
        truncated = out.truncated;
    }
    Ok(finish_trace(
        variant,
        seed,
        policy,
        env_config.tile_size,
        steps,
        truncated,
    ))
}

pub fn eval_episode_seed(root: u64, variant: &EnvVariant, index: u64) -> u64 {
    derive_seed(
        root,
        &format!("evaluate/{}/{}", variant.kind, variant.activation_step),
        index,
    )
}

/// Episodes of `variant` totalling exactly `steps` observations.
pub fn evaluate_variant(
    variant: EnvVariant,
    policy: PolicyKind,
    detectors: &Detectors<'_>,
    steps: usize,
    root_seed: u64,
    env_config: EnvConfig,
) -> Result<Vec<EpisodeTrace>> {
    run_until_budget(steps, |i| {
        run_episode(
            variant,
            policy,
            detectors,
            eval_episode_seed(root_seed, &variant, i),
            env_config,
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{Action, VariantKind};
    use crate::harness::collect::collect_steps;
    use crate::world_model::ModelParams;

    fn small_model() -> WorldModel {
        let buf = collect_steps(
            EnvVariant::nominal(),
            PolicyKind::Scripted,
            3000,
            1,
            EnvConfig::default(),
        );
        WorldModel::train(&buf, ModelParams::default()).unwrap()
    }

    fn calib(model: &WorldModel, config: &DetectorConfig) -> Calibration {
        let t = collect_steps(
            EnvVariant::nominal(),
            PolicyKind::Scripted,
            300,
            2,
            EnvConfig::default(),
        );
        let r = collect_steps(
            EnvVariant::nominal(),
            PolicyKind::Random,
            300,
            2,
            EnvConfig::default(),
        );
        calibrate(model, config, &t, &r, 9).unwrap()
    }

    #[test]
    fn omitted_methods_produce_no_verdicts() {
        let model = small_model();
        let config = DetectorConfig::default();
        let c = calib(&model, &config);
        let all = Detectors {
            model: &model,
            calibration: &c,
            config: &config,
            methods: &Method::ALL,
        };
        let some = Detectors {
            methods: &[Method::Kl],
            ..all
        };
        let a = run_episode(
            VariantKind::Teleport.into(),
            PolicyKind::Scripted,
            &all,
            4,
            EnvConfig::default(),
        )
        .unwrap();
        let b = run_episode(
            VariantKind::Teleport.into(),
            PolicyKind::Scripted,
            &some,
            4,
            EnvConfig::default(),
        )
        .unwrap();
        assert!(a.steps.iter().all(|s| s.verdicts.len() == 7));
        assert!(b.steps.iter().all(|s| s.verdicts.len() == 1));
        for (x, y) in a.steps.iter().zip(&b.steps) {
            assert_eq!(x.state, y.state);
            assert_eq!(x.verdict(Method::Kl), y.verdict(Method::Kl));
        }
    }

    #[test]
    fn broken_door_is_flagged_after_failed_toggle() {
        let model = small_model();
        let config = DetectorConfig::default();
        let c = calib(&model, &config);
        let d = Detectors {
            model: &model,
            calibration: &c,
            config: &config,
            methods: &Method::ALL,
        };
        let tr = run_episode(
            VariantKind::BrokenDoor.into(),
            PolicyKind::Scripted,
            &d,
            11,
            EnvConfig::default(),
        )
        .unwrap();
        let onset = tr.onset.unwrap();
        assert_eq!(tr.steps[onset - 1].action, Some(Action::Toggle));
        assert!(tr.steps[onset].verdict(Method::Kl).unwrap().flag);
        assert!(!tr.steps[onset].verdict(Method::CmtreTrained).unwrap().flag);
    }

    #[test]
    fn mismatched_model_shape_is_contract_error() {
        let model = small_model();
        let config = DetectorConfig::default();
        let c = calib(&model, &config);
        let d = Detectors {
            model: &model,
            calibration: &c,
            config: &config,
            methods: &Method::ALL,
        };
        let env = EnvConfig {
            tile_size: 4,
            ..EnvConfig::default()
        };
        assert!(matches!(
            run_episode(EnvVariant::nominal(), PolicyKind::Scripted, &d, 0, env),
            Err(Error::Contract(_))
        ));
    }
}
