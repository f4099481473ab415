//! Tabular categorical world model: an image codebook, count-based prior and
//! representation conditionals, and a bounded recurrent context.

mod belief;
mod codebook;
mod context;
mod model;

pub use belief::{sample, CategoricalBelief, LatentSample, NORMALIZATION_TOLERANCE};
pub use codebook::Codebook;
pub use context::{recurrent_update, ContextKey, RecurrentContext, MAX_CONTEXT_LEN};
pub use model::{
    ModelParams, StepBeliefs, WorldModel, WorldModelTables, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};
