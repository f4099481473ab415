//! Scoring kernels and per-step detectors.

mod bound;
mod cmtre;
mod cusum;
mod kernels;
mod pp_mare;
mod verdict;

pub use bound::{kl_bound_detect, kl_bound_verdict, kl_md_detect, kl_md_verdict, BoundTerms};
pub use cmtre::{
    cmtre_calibrate, cmtre_calibrate_with, cmtre_detect, mean_std, threshold, MareThresholds,
};
pub use cusum::{cusum_update, Cusum};
pub use kernels::{cross_entropy, kl_divergence, mahalanobis, mare, surprise, MahalanobisForm};
pub use pp_mare::{pp_mare_detect, pp_mare_verdict};
pub use verdict::{DetectorConfig, DetectorVerdict, Method, PriorDecode};
