//! Data ingestion, synthetic data, run configuration and persistence.

pub mod config;
pub mod pipeline;
pub mod store;
pub mod synth;
pub mod tables;

pub use config::{FitConfig, RunConfig, PRESETS};
pub use pipeline::Layout;
pub use store::{load_chain, save_chain, ChainFile};
pub use synth::{generate_synthetic, PiProfile, SynthConfig, SyntheticTruth, Totals};
pub use tables::{fmt_f64, load_dataset, LoadOptions, Loaded};
