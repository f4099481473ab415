//! Collection, calibration, evaluation and metrics over episode traces.

mod collect;
mod io;
mod metrics;
mod pipeline;
mod report;
mod seeds;
mod trace;

pub use collect::{
    collect, collect_steps, episode_seed, record_episode, truncate_trace, EnvVariantKey,
    ReplayBuffer,
};
pub use io::{
    config_digest, read_buffer, read_trace, write_buffer, write_trace, BufferHeader, TraceHeader,
    BUFFER_FORMAT, FILE_VERSION, TRACE_FORMAT,
};
pub(crate) use io::{create_parent, write_text};
pub use metrics::{
    auc, average_delay_error, bound_behavior_curves, confusion, confusion_metrics, delay_summary,
    fp_by_step, scored_steps, step_label, BoundPoint, Confusion, ConfusionRates, DelaySummary,
};
pub use pipeline::{
    calibrate, eval_episode_seed, evaluate_variant, replay_scores, run_episode, score_step,
    step_verdicts, Calibration, Detectors, StepScores,
};
pub use report::{
    build_report, MetricsReport, MetricsRow, NominalFp, VariantTraces, REPORT_FORMAT,
    REPORT_VERSION,
};
pub use seeds::{derive_rng, derive_seed};
pub use trace::{EpisodeTrace, PolicyKind, StepRecord};
