//! Markov transition kernels and the chain driver.

pub mod chain;
pub mod gibbs;
pub mod tmcmc;
pub mod tuning;

pub use chain::{
    rng_stream, run_chain, AcceptanceStats, ChainState, ChainTuning, Draw, LambdaBlocks, Model, Rate, RunSpec,
    SampleStore, Sampler, TuneSchedule, RW_ACCEPTANCE,
};
pub use gibbs::{draw_pi, z_one_probability};
pub use tmcmc::{accept, tmcmc_step, tmcmc_step_with, AdditiveMove, Innovation, TmcmcConfig, OPTIMAL_ACCEPTANCE};
pub use tuning::{pilot_tune, rescale_factor, PilotOptions, TuneOutcome};
