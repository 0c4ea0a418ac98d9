//! The hierarchical zero-inflated multinomial model.

pub mod data;
pub mod density;
pub mod latent;
pub mod posterior;
pub mod predictive;
pub mod prior;
pub mod response;
pub mod urn;

pub use data::{ClimateTable, CountMatrix, Dataset, Standardization};
pub use density::{gamma_log_density, lambda_log_prior, zim_log_pmf, LAMBDA_FLOOR};
pub use latent::{HeldOut, LatentState};
pub use posterior::{joint_log_posterior, site_point, LogPosteriorTerms};
pub use predictive::predictive_abundance_draw;
pub use prior::{BiBase, PriorConfig, UniBase, XPrior};
pub use response::{response_xi, Bivariate, Cov2, Response, SpeciesParams, UniAtom, Univariate, XI_FLOOR};
pub use urn::{draw_species, polya_urn_draw, urn_log_prior};
