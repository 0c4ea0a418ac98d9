use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Normal-inverse-gamma base measure for 1-D atoms `(beta, gamma)`:
/// `gamma ~ IG(a, b)` and `beta | gamma ~ N(mu_beta, gamma^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniBase {
    pub mu_beta: f64,
    pub a: f64,
    pub b: f64,
}

/// Base measure for 2-D atoms: `beta | Sigma ~ N2(mu_beta, Sigma)`, with
/// `sigma_ii ~ IG(a[i], b[i])` and `rho ~ U(-1, 1)` on the shared covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct BiBase {
    pub mu_beta: [f64; 2],
    pub a: [f64; 2],
    pub b: [f64; 2],
}

/// Gaussian prior on a held-out climate point.
#[derive(Debug, Clone, PartialEq)]
pub enum XPrior {
    Uni { mean: f64, var: f64 },
    Bi { mean: [f64; 2], var: [f64; 2], cov: f64 },
}

impl XPrior {
    pub fn dim(&self) -> usize {
        match self {
            XPrior::Uni { .. } => 1,
            XPrior::Bi { .. } => 2,
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            XPrior::Uni { mean, .. } => vec![*mean],
            XPrior::Bi { mean, .. } => mean.to_vec(),
        }
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            XPrior::Uni { mean, var } => {
                let z = x[0] - mean;
                -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * z * z / var
            }
            XPrior::Bi { mean, var, cov } => {
                let det = var[0] * var[1] - cov * cov;
                let d0 = x[0] - mean[0];
                let d1 = x[1] - mean[1];
                let q = (var[1] * d0 * d0 - 2.0 * cov * d0 * d1 + var[0] * d1 * d1) / det;
                -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * q
            }
        }
    }

    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> Vec<f64> {
        match self {
            XPrior::Uni { mean, var } => {
                let e: f64 = StandardNormal.sample(rng);
                vec![mean + var.sqrt() * e]
            }
            XPrior::Bi { mean, var, cov } => {
                let e0: f64 = StandardNormal.sample(rng);
                let e1: f64 = StandardNormal.sample(rng);
                let l00 = var[0].sqrt();
                let l10 = cov / l00;
                let l11 = (var[1] - l10 * l10).sqrt();
                vec![mean[0] + l00 * e0, mean[1] + l10 * e0 + l11 * e1]
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            XPrior::Uni { mean, var } => {
                if !mean.is_finite() || !(*var > 0.0) {
                    return Err(Error::InvalidParameter("x prior needs finite mean and variance > 0".into()));
                }
            }
            XPrior::Bi { mean, var, cov } => {
                if mean.iter().any(|m| !m.is_finite()) || var.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::InvalidParameter("x prior needs finite means and variances > 0".into()));
                }
                if var[0] * var[1] - cov * cov <= 0.0 {
                    return Err(Error::InvalidParameter("x prior covariance is not positive definite".into()));
                }
            }
        }
        Ok(())
    }
}

/// Hyperparameters of the hierarchical model.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    /// Dirichlet-process concentration.
    pub alpha: f64,
    /// Gamma scale of the Poisson intensities.
    pub psi: f64,
    pub g0_uni: UniBase,
    pub g0_bi: BiBase,
    pub x_prior: XPrior,
    /// Atom budget `M_k`, shared by all species.
    pub atoms: usize,
}

impl PriorConfig {
    /// Values used for the 1-D chironomid-style analysis.
    pub fn chironomid() -> Self {
        Self {
            alpha: 10.0,
            psi: 1.0,
            g0_uni: UniBase { mu_beta: 11.19, a: 11.0, b: 30.0 },
            g0_bi: BiBase::default_standardized(),
            x_prior: XPrior::Uni { mean: 11.19, var: 10.0 },
            atoms: 10,
        }
    }

    /// Values used for the bivariate pollen-style analysis on standardized climate.
    pub fn pollen() -> Self {
        Self {
            alpha: 1.0,
            psi: 1.0,
            g0_uni: UniBase { mu_beta: 0.0, a: 11.0, b: 30.0 },
            g0_bi: BiBase::default_standardized(),
            x_prior: XPrior::Bi { mean: [0.0, 0.0], var: [10.0, 10.0], cov: 0.8 },
            atoms: 10,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.psi > 0.0) {
            return Err(Error::InvalidParameter("alpha and psi must be > 0".into()));
        }
        if self.atoms == 0 {
            return Err(Error::InvalidParameter("atom budget must be at least 1".into()));
        }
        if self.x_prior.dim() != dim {
            return Err(Error::InvalidParameter(format!(
                "x prior has dimension {}, model has {dim}",
                self.x_prior.dim()
            )));
        }
        match dim {
            1 => {
                let g = &self.g0_uni;
                if !(g.a > 0.0) || !(g.b > 0.0) || !g.mu_beta.is_finite() {
                    return Err(Error::InvalidParameter("1-D base measure needs a, b > 0".into()));
                }
            }
            2 => {
                let g = &self.g0_bi;
                if g.a.iter().chain(&g.b).any(|v| !(*v > 0.0)) {
                    return Err(Error::InvalidParameter("2-D base measure needs a0i, b0i > 0".into()));
                }
            }
            _ => return Err(Error::InvalidParameter(format!("unsupported dimension {dim}"))),
        }
        self.x_prior.validate()
    }
}

impl BiBase {
    pub fn default_standardized() -> Self {
        Self { mu_beta: [0.0, 0.0], a: [4.1, 4.1], b: [5.1, 5.1] }
    }
}
