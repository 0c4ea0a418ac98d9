//! Pilot-run scale adaptation. Scales are frozen once tuning returns.

use log::warn;
use statrs::distribution::{ContinuousCDF, Normal};

use super::tmcmc::TmcmcConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotOptions {
    pub max_rounds: usize,
    /// Half-width of the accepted band around the target rate.
    pub band: f64,
}

impl Default for PilotOptions {
    fn default() -> Self {
        Self { max_rounds: 20, band: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub config: TmcmcConfig,
    pub acceptance: f64,
    pub rounds: usize,
    pub converged: bool,
}

/// Multiplicative scale correction from a measured acceptance rate.
///
/// For a Gaussian-like target the acceptance of an additive move behaves as
/// `2 Phi(-c a)`, so matching `Phi^-1(rate / 2)` gives the rescaling.
pub fn rescale_factor(acceptance: f64, target: f64) -> f64 {
    let std = Normal::standard();
    let acc = acceptance.clamp(1e-4, 1.0 - 1e-4);
    (std.inverse_cdf(target / 2.0) / std.inverse_cdf(acc / 2.0)).clamp(0.2, 5.0)
}

/// Repeats pilot runs, rescaling every coordinate by a common factor, until
/// the measured acceptance lies within `band` of the target. Returns the best
/// configuration seen, with a warning if the band was never reached.
pub fn pilot_tune<F>(mut run_pilot: F, config: &TmcmcConfig, options: PilotOptions) -> TuneOutcome
where
    F: FnMut(&TmcmcConfig) -> f64,
{
    let target = config.target_acceptance;
    let mut current = config.clone();
    let mut best: Option<(f64, TmcmcConfig, f64)> = None;
    for round in 1..=options.max_rounds.max(1) {
        let acc = run_pilot(&current);
        let gap = (acc - target).abs();
        if gap <= options.band {
            return TuneOutcome { config: current, acceptance: acc, rounds: round, converged: true };
        }
        if best.as_ref().is_none_or(|(g, _, _)| gap < *g) {
            best = Some((gap, current.clone(), acc));
        }
        let f = rescale_factor(acc, target);
        current.scales.iter_mut().for_each(|a| *a *= f);
    }
    let (_, config, acceptance) = best.expect("at least one pilot round");
    warn!(
        "pilot tuning did not reach {target:.3} +/- {:.3} in {} rounds; best acceptance {acceptance:.3}",
        options.band, options.max_rounds
    );
    TuneOutcome { config, acceptance, rounds: options.max_rounds, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_direction() {
        assert!(rescale_factor(0.9, 0.439) > 1.0);
        assert!(rescale_factor(0.05, 0.439) < 1.0);
        assert!((rescale_factor(0.439, 0.439) - 1.0).abs() < 1e-12);
        assert_eq!(rescale_factor(0.0, 0.439), 0.2);
    }

    #[test]
    fn in_band_start_is_returned_unchanged() {
        let cfg = TmcmcConfig::uniform(3, 1.7).unwrap();
        let out = pilot_tune(|_| 0.45, &cfg, PilotOptions::default());
        assert!(out.converged);
        assert_eq!(out.rounds, 1);
        assert_eq!(out.config, cfg);
    }

    #[test]
    fn unreachable_band_keeps_best() {
        let cfg = TmcmcConfig::uniform(1, 1.0).unwrap();
        let mut calls = 0;
        let out = pilot_tune(
            |c| {
                calls += 1;
                if c.scales[0] == 1.0 {
                    0.3
                } else {
                    0.95
                }
            },
            &cfg,
            PilotOptions { max_rounds: 4, band: 0.05 },
        );
        assert!(!out.converged);
        assert_eq!(calls, 4);
        assert_eq!(out.config.scales, vec![1.0]);
    }
}
