use super::data::{ClimateTable, CountMatrix};
use super::density::{bernoulli_log_mass, lambda_log_prior, zim_log_pmf};
use super::latent::LatentState;
use super::prior::PriorConfig;
use super::response::{Response, SpeciesParams};
use super::urn::urn_log_prior;
use crate::error::{Error, Result};

/// Additive pieces of the unnormalized joint log posterior.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogPosteriorTerms {
    pub likelihood: f64,
    pub zero_inflation: f64,
    pub lambda_prior: f64,
    pub atom_prior: f64,
    pub shared_prior: f64,
    pub x_prior: f64,
}

impl LogPosteriorTerms {
    pub fn total(&self) -> f64 {
        self.likelihood + self.zero_inflation + self.lambda_prior + self.atom_prior + self.shared_prior + self.x_prior
    }
}

/// Climate point used for site `i`: the held-out parameter if `i` is held out.
pub fn site_point<'a>(climate: &'a ClimateTable, latent: &'a LatentState, i: usize) -> &'a [f64] {
    match &latent.heldout {
        Some(h) if h.site == i => &h.x,
        _ => climate.point(i),
    }
}

/// Evaluates every term of the joint log posterior. The `pi` prior is
/// uniform and contributes nothing.
pub fn joint_log_posterior<R: Response>(
    counts: &CountMatrix,
    climate: &ClimateTable,
    prior: &PriorConfig,
    theta: &[SpeciesParams<R>],
    latent: &LatentState,
) -> Result<LogPosteriorTerms> {
    let (n, m) = (counts.n_sites(), counts.n_species());
    if theta.len() != m || climate.n_sites() != n || climate.dim() != R::DIM {
        return Err(Error::InvalidParameter("parameter shapes do not match the data".into()));
    }
    let mut t = LogPosteriorTerms::default();
    for i in 0..n {
        t.likelihood += zim_log_pmf(counts.row(i), latent.z_row(i), latent.lambda_row(i))?;
        let x = site_point(climate, latent, i);
        for (k, params) in theta.iter().enumerate().take(m) {
            let j = latent.idx(i, k);
            t.zero_inflation += bernoulli_log_mass(latent.z[j], latent.pi[j]);
            t.lambda_prior += lambda_log_prior(latent.lambda[j], params.xi(x), prior.psi);
        }
    }
    for p in theta {
        t.atom_prior += urn_log_prior(p, prior);
        t.shared_prior += R::shared_log_prior(&p.shared, prior);
    }
    if let Some(h) = &latent.heldout {
        t.x_prior = prior.x_prior.log_density(&h.x);
    }
    Ok(t)
}
