//! Posterior summaries, coverage and model-adequacy tests.

mod coverage;
mod discrepancy;
mod hpd;
pub mod kde;

pub use coverage::{
    coverage_summary, lattice_median_surface, predictive_band, CoverageSummary, LatticeCell, PredictiveBand,
};
pub use discrepancy::{
    adequacy_test, d_variant, t1_statistic, t2_statistic, Center, DensityOptions, DiscrepancyReport, Measure, Prepared,
    DEFAULT_LOG_FLOOR,
};
pub use hpd::{
    default_bins, hpd_line_pushing, median, posterior_mode, summarize, variance, CvSummary, HpdRegion, MIN_SAMPLES,
};
