use super::anchor::select_anchor;
use super::weights::{importance_log_weight, resample_without_replacement};
use crate::adequacy::{summarize, CvSummary};
use crate::error::{Error, Result};
use crate::model::{HeldOut, Response};
use crate::par::{try_map_indexed, Execution};
use crate::samplers::{
    rng_stream, AcceptanceStats, ChainState, ChainTuning, Draw, Model, RunSpec, Sampler, TuneSchedule,
};

#[derive(Debug, Clone, PartialEq)]
pub struct IrmcmcConfig {
    /// Stored anchor draws `L`.
    pub stored: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Resampled states per site `K1`.
    pub resample: usize,
    /// Inner-chain draws per resampled state `K2`.
    pub inner: usize,
    pub anchor_override: Option<usize>,
    pub tune: TuneSchedule,
    /// HPD level of the per-site summaries.
    pub level: f64,
    pub bins: Option<usize>,
}

impl Default for IrmcmcConfig {
    fn default() -> Self {
        Self {
            stored: 10_000,
            burn_in: 20_000,
            thin: 1,
            resample: 200,
            inner: 50,
            anchor_override: None,
            tune: TuneSchedule::default(),
            level: 0.95,
            bins: None,
        }
    }
}

impl IrmcmcConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.stored == 0 || self.thin == 0 || self.resample == 0 || self.inner == 0 {
            return Err(Error::InvalidParameter("L, thin, K1 and K2 must be positive".into()));
        }
        if self.resample > self.stored {
            return Err(Error::InvalidParameter(format!(
                "K1 = {} exceeds the {} stored anchor draws",
                self.resample, self.stored
            )));
        }
        if let Some(a) = self.anchor_override {
            if a >= n {
                return Err(Error::InvalidParameter(format!("anchor site {a} out of range")));
            }
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidParameter("HPD level must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Cross-validation posterior of one site's climate.
#[derive(Debug, Clone, PartialEq)]
pub struct CvPosterior {
    pub site: usize,
    pub dim: usize,
    /// `K1 * K2` draws, coordinates interleaved.
    pub samples: Vec<f64>,
    pub summary: CvSummary,
}

impl CvPosterior {
    pub fn new(site: usize, dim: usize, samples: Vec<f64>, level: f64, bins: Option<usize>) -> Result<Self> {
        if dim == 0 || !samples.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter("sample length is not a multiple of the dimension".into()));
        }
        let summary = summarize(&samples, dim, level, bins)?;
        Ok(Self { site, dim, samples, summary })
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn draw(&self, t: usize) -> &[f64] {
        &self.samples[t * self.dim..(t + 1) * self.dim]
    }

    pub fn coordinate(&self, d: usize) -> Vec<f64> {
        self.samples.iter().skip(d).step_by(self.dim).copied().collect()
    }
}

#[derive(Debug, Clone)]
pub struct LooOutput {
    pub anchor: usize,
    pub posteriors: Vec<CvPosterior>,
    pub anchor_acceptance: AcceptanceStats,
    pub tuning: ChainTuning,
    pub tuned: bool,
}

/// Cross-validation posteriors of every site. The anchor chain uses RNG
/// stream 0 of `seed`; site `i` uses stream `i + 1`, so results do not depend
/// on how folds are scheduled.
pub fn run_loo<R: Response>(model: Model<'_>, cfg: &IrmcmcConfig, seed: u64, exec: Execution) -> Result<LooOutput> {
    let all: Vec<usize> = (0..model.counts.n_sites()).collect();
    run_loo_sites::<R>(model, cfg, seed, exec, &all)
}

/// As [`run_loo`], for the listed sites only. A site's posterior does not
/// depend on which other sites are listed.
pub fn run_loo_sites<R: Response>(
    model: Model<'_>,
    cfg: &IrmcmcConfig,
    seed: u64,
    exec: Execution,
    sites: &[usize],
) -> Result<LooOutput> {
    let n = model.counts.n_sites();
    cfg.validate(n)?;
    if let Some(&s) = sites.iter().find(|&&s| s >= n) {
        return Err(Error::InvalidParameter(format!("site {s} out of range (n = {n})")));
    }
    model.validate::<R>()?;
    let anchor = cfg.anchor_override.unwrap_or_else(|| select_anchor(model.climate));
    let mut chain = Sampler::<R>::from_prior(model, Some(anchor), rng_stream(seed, 0))?;
    let tuned = chain.tune(cfg.tune)?;
    let store =
        chain.run(RunSpec { iterations: cfg.burn_in + cfg.stored * cfg.thin, burn_in: cfg.burn_in, thin: cfg.thin })?;
    let tuning = chain.tuning.clone();
    let draws = &store.draws;
    let posteriors = try_map_indexed(sites.len(), exec, |j| fold(model, draws, &tuning, anchor, sites[j], cfg, seed))?;
    Ok(LooOutput { anchor, posteriors, anchor_acceptance: store.acceptance, tuning, tuned })
}

fn fold<R: Response>(
    model: Model<'_>,
    draws: &[Draw<R>],
    tuning: &ChainTuning,
    anchor: usize,
    site: usize,
    cfg: &IrmcmcConfig,
    seed: u64,
) -> Result<CvPosterior> {
    let mut rng = rng_stream(seed, site as u64 + 1);
    let held_x = |d: &Draw<R>| d.latent.heldout.as_ref().map(|h| h.x.clone()).expect("anchor draws carry x");
    let log_w: Vec<f64> = draws
        .iter()
        .map(|d| importance_log_weight(&d.theta, &d.latent, &held_x(d), site, anchor, model.climate, model.prior.psi))
        .collect();
    let picks = resample_without_replacement(&log_w, cfg.resample, site, &mut rng)?;
    let mut samples = Vec::with_capacity(cfg.resample * cfg.inner * R::DIM);
    for r in picks {
        let d = &draws[r];
        let mut latent = d.latent.clone();
        latent.heldout = Some(HeldOut { site, x: held_x(d) });
        let state = ChainState { theta: d.theta.clone(), latent, iteration: 0, rng };
        let mut inner = Sampler::new(model, state, tuning.clone())?;
        for _ in 0..cfg.inner {
            inner.sweep_site(site)?;
            samples.extend_from_slice(&inner.state().latent.heldout.as_ref().expect("held out").x);
        }
        rng = inner.into_state().rng;
    }
    CvPosterior::new(site, R::DIM, samples, cfg.level, cfg.bins)
}
