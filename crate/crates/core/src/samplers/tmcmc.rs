//! Additive transformation-based MCMC.
//!
//! One scalar innovation `eta > 0` moves every coordinate of a block by
//! `+a_j eta` or `-a_j eta`. The move is its own inverse with unit Jacobian, so
//! the acceptance ratio is the posterior ratio alone.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const OPTIMAL_ACCEPTANCE: f64 = 0.439;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Innovation {
    /// `|N(0, sd^2)|`.
    TruncatedNormal { sd: f64 },
}

impl Default for Innovation {
    fn default() -> Self {
        Innovation::TruncatedNormal { sd: 1.0 }
    }
}

impl Innovation {
    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> f64 {
        match *self {
            Innovation::TruncatedNormal { sd } => {
                let e: f64 = StandardNormal.sample(rng);
                sd * e.abs()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmcmcConfig {
    pub scales: Vec<f64>,
    pub innovation: Innovation,
    pub target_acceptance: f64,
}

impl TmcmcConfig {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        let cfg = Self { scales, innovation: Innovation::default(), target_acceptance: OPTIMAL_ACCEPTANCE };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn uniform(dim: usize, scale: f64) -> Result<Self> {
        Self::new(vec![scale; dim])
    }

    pub fn with_target(mut self, target: f64) -> Result<Self> {
        self.target_acceptance = target;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter("TMCMC scales must be finite and > 0".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::InvalidParameter("target acceptance must lie in (0, 1)".into()));
        }
        let Innovation::TruncatedNormal { sd } = self.innovation;
        if !(sd > 0.0) {
            return Err(Error::InvalidParameter("innovation sd must be > 0".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.scales.len()
    }
}

/// One realized additive move: the innovation and a sign per coordinate
/// (`true` is `+`).
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveMove {
    pub eta: f64,
    pub signs: Vec<bool>,
}

impl AdditiveMove {
    /// Independent equiprobable signs.
    pub fn draw<G: Rng + ?Sized>(dim: usize, innovation: &Innovation, rng: &mut G) -> Self {
        let eta = innovation.sample(rng);
        let signs = (0..dim).map(|_| rng.random::<bool>()).collect();
        Self { eta, signs }
    }

    /// One sign shared by every coordinate.
    pub fn draw_common<G: Rng + ?Sized>(dim: usize, innovation: &Innovation, rng: &mut G) -> Self {
        let eta = innovation.sample(rng);
        let up = rng.random::<bool>();
        Self { eta, signs: vec![up; dim] }
    }

    pub fn apply(&self, current: &[f64], scales: &[f64]) -> Vec<f64> {
        current
            .iter()
            .zip(scales)
            .zip(&self.signs)
            .map(|((c, a), &up)| if up { c + a * self.eta } else { c - a * self.eta })
            .collect()
    }
}

/// Metropolis decision from the log posterior difference only.
#[inline]
pub fn accept(log_u: f64, log_ratio: f64) -> bool {
    log_u < log_ratio
}

/// Applies `mv` and accepts by the target ratio. `current_lp` must be
/// `log_target(current)`; both are updated on acceptance.
pub fn tmcmc_step_with<F>(
    current: &mut Vec<f64>,
    current_lp: &mut f64,
    scales: &[f64],
    mv: &AdditiveMove,
    log_u: f64,
    mut log_target: F,
) -> bool
where
    F: FnMut(&[f64]) -> f64,
{
    let proposal = mv.apply(current, scales);
    let lp = log_target(&proposal);
    if accept(log_u, lp - *current_lp) {
        *current = proposal;
        *current_lp = lp;
        true
    } else {
        false
    }
}

/// Draws `eta`, the signs and the uniform in that order, then calls
/// [`tmcmc_step_with`].
pub fn tmcmc_step<F, G>(
    current: &mut Vec<f64>,
    current_lp: &mut f64,
    config: &TmcmcConfig,
    log_target: F,
    rng: &mut G,
) -> bool
where
    F: FnMut(&[f64]) -> f64,
    G: Rng + ?Sized,
{
    let mv = AdditiveMove::draw(config.dim(), &config.innovation, rng);
    let log_u = rng.random::<f64>().ln();
    tmcmc_step_with(current, current_lp, &config.scales, &mv, log_u, log_target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_invalid_config() {
        assert!(TmcmcConfig::new(vec![1.0, 0.0]).is_err());
        assert!(TmcmcConfig::uniform(2, 1.0).unwrap().with_target(1.0).is_err());
    }

    #[test]
    fn improving_move_is_always_accepted() {
        let mv = AdditiveMove { eta: 0.5, signs: vec![true] };
        let mut x = vec![-1.0];
        let mut lp = -0.5;
        let target = |v: &[f64]| -0.5 * v[0] * v[0];
        assert!(tmcmc_step_with(&mut x, &mut lp, &[1.0], &mv, -1e-300, target));
        assert_eq!(x, vec![-0.5]);
    }

    #[test]
    fn zero_support_proposal_is_rejected() {
        let mv = AdditiveMove { eta: 2.0, signs: vec![false] };
        let mut x = vec![1.0];
        let mut lp = 0.0;
        let target = |v: &[f64]| if v[0] > 0.0 { 0.0 } else { f64::NEG_INFINITY };
        assert!(!tmcmc_step_with(&mut x, &mut lp, &[1.0], &mv, f64::NEG_INFINITY, target));
        assert_eq!(x, vec![1.0]);
    }

    #[test]
    fn samples_standard_normal() {
        let cfg = TmcmcConfig::uniform(1, 2.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let target = |v: &[f64]| -0.5 * v[0] * v[0];
        let mut x = vec![0.0];
        let mut lp = 0.0;
        let (mut s, mut s2) = (0.0, 0.0);
        let n = 200_000;
        for _ in 0..n {
            tmcmc_step(&mut x, &mut lp, &cfg, target, &mut rng);
            s += x[0];
            s2 += x[0] * x[0];
        }
        let mean = s / n as f64;
        assert!(mean.abs() < 0.03, "{mean}");
        assert!((s2 / n as f64 - 1.0).abs() < 0.05);
    }
}
