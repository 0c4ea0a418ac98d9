//! Leave-one-out cross-validation by importance-resampling MCMC.
//!
//! One anchor chain targets the posterior with the anchor site's climate held
//! out. For every other site the stored anchor draws are reweighted towards
//! that site's leave-one-out posterior, a subset is resampled without
//! replacement, and each resampled state seeds a short chain over the held-out
//! site's climate and latents.

mod anchor;
mod irmcmc;
mod weights;

pub use anchor::select_anchor;
pub use irmcmc::{run_loo, run_loo_sites, CvPosterior, IrmcmcConfig, LooOutput};
pub use weights::{importance_log_weight, resample_without_replacement};
