//! Discrepancy measures and the inverse-reference-distribution test.
//!
//! Every measure is a sum of per-site terms comparing a climate value with
//! that site's cross-validation posterior. The observed statistic uses the
//! recorded climates; reference draw `t` substitutes draw `t` of every
//! site's posterior.

use std::fmt;
use std::str::FromStr;

use super::hpd::{hpd_line_pushing, HpdRegion};
use super::kde::Density;
use crate::crossval::CvPosterior;
use crate::error::{Error, Result};

pub const DEFAULT_LOG_FLOOR: f64 = -700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Center {
    Mode,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    /// Standardized distance to the posterior centre.
    T1(Center),
    /// Summed log cross-validation density.
    T2,
    D1,
    D1Star,
    D2,
    D3,
}

impl Measure {
    pub const ALL: [Measure; 7] = [
        Measure::T1(Center::Mode),
        Measure::T1(Center::Median),
        Measure::T2,
        Measure::D1,
        Measure::D1Star,
        Measure::D2,
        Measure::D3,
    ];

    /// Centre used by the log-density variants.
    pub fn center(&self) -> Center {
        match self {
            Measure::T1(c) => *c,
            Measure::D1 | Measure::D1Star => Center::Median,
            Measure::D2 | Measure::D3 | Measure::T2 => Center::Mode,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::T1(Center::Mode) => "t1",
            Measure::T1(Center::Median) => "t1-median",
            Measure::T2 => "t2",
            Measure::D1 => "d1",
            Measure::D1Star => "d1star",
            Measure::D2 => "d2",
            Measure::D3 => "d3",
        })
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL.into_iter().find(|m| m.to_string() == s.to_ascii_lowercase()).ok_or_else(|| {
            Error::Config(format!("unknown measure '{s}' (expected t1, t1-median, t2, d1, d1star, d2, d3)"))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityOptions {
    /// Grid nodes per coordinate of the log-density estimates.
    pub points: usize,
    pub log_floor: f64,
}

impl DensityOptions {
    pub fn for_dim(dim: usize) -> Self {
        Self { points: if dim == 1 { 512 } else { 128 }, log_floor: DEFAULT_LOG_FLOOR }
    }
}

enum Spread {
    Sd(f64),
    /// Inverse covariance `[a, b, c]` of `[[a, b], [b, c]]`.
    InvCov([f64; 3]),
}

struct Site {
    mode: Vec<f64>,
    median: Vec<f64>,
    spread: Spread,
    density: Density,
    /// `g(centre)` and the draw variance of `g` for both centres.
    g_mode: f64,
    g_median: f64,
    g_var: f64,
}

/// Per-site quantities shared by every measure.
pub struct Prepared {
    dim: usize,
    draws: usize,
    floor: f64,
    sites: Vec<Site>,
}

impl Prepared {
    pub fn new(cv: &[CvPosterior], opts: DensityOptions) -> Result<Self> {
        let Some(first) = cv.first() else {
            return Err(Error::InvalidParameter("no cross-validation posteriors".into()));
        };
        let (dim, draws) = (first.dim, first.len());
        let mut sites = Vec::with_capacity(cv.len());
        for p in cv {
            if p.dim != dim || p.len() != draws {
                return Err(Error::InvalidParameter(format!(
                    "site {}: posterior has {} draws of dimension {}, expected {draws} of {dim}",
                    p.site,
                    p.len(),
                    p.dim
                )));
            }
            let spread = spread_of(p)?;
            let density =
                Density::fit(&p.samples, dim, opts.points).map_err(|_| Error::ZeroVariance { site: p.site })?;
            let mut s = Site {
                mode: p.summary.mode.clone(),
                median: p.summary.median.clone(),
                spread,
                density,
                g_mode: 0.0,
                g_median: 0.0,
                g_var: 0.0,
            };
            let g = |x: &[f64]| floored_log(s.density.density(x), opts.log_floor).0;
            s.g_mode = g(&s.mode);
            s.g_median = g(&s.median);
            let vals: Vec<f64> = (0..draws).map(|t| g(p.draw(t))).collect();
            let mean = vals.iter().sum::<f64>() / draws as f64;
            s.g_var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
            if !(s.g_var > 0.0) {
                return Err(Error::ZeroVariance { site: p.site });
            }
            sites.push(s);
        }
        Ok(Self { dim, draws, floor: opts.log_floor, sites })
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_draws(&self) -> usize {
        self.draws
    }

    /// Statistic at the climates `x` (site-major, `dim` per site) and the
    /// number of floored log-densities.
    pub fn statistic(&self, measure: Measure, x: &[f64]) -> (f64, usize) {
        let mut total = 0.0;
        let mut floored = 0;
        for (i, s) in self.sites.iter().enumerate() {
            let (v, f) = self.term(measure, s, &x[i * self.dim..(i + 1) * self.dim]);
            total += v;
            floored += usize::from(f);
        }
        (total, floored)
    }

    /// Reference statistic for draw index `t`.
    pub fn reference(&self, measure: Measure, cv: &[CvPosterior], t: usize) -> (f64, usize) {
        let x: Vec<f64> = cv.iter().flat_map(|p| p.draw(t).iter().copied()).collect();
        self.statistic(measure, &x)
    }

    fn term(&self, measure: Measure, s: &Site, x: &[f64]) -> (f64, bool) {
        match measure {
            Measure::T1(c) => {
                let centre = if c == Center::Mode { &s.mode } else { &s.median };
                let v = match s.spread {
                    Spread::Sd(sd) => (x[0] - centre[0]).abs() / sd,
                    Spread::InvCov([a, b, c]) => {
                        let (d0, d1) = (x[0] - centre[0], x[1] - centre[1]);
                        a * d0 * d0 + 2.0 * b * d0 * d1 + c * d1 * d1
                    }
                };
                (v, false)
            }
            Measure::T2 => floored_log(s.density.density(x), self.floor),
            _ => {
                let (g, f) = floored_log(s.density.density(x), self.floor);
                let gc = if measure.center() == Center::Median { s.g_median } else { s.g_mode };
                let diff = (g - gc).abs();
                let v = match measure {
                    Measure::D1 => diff,
                    Measure::D1Star => diff / s.g_var.sqrt(),
                    Measure::D2 => diff.sqrt() / s.g_var.sqrt(),
                    _ => diff / s.g_var,
                };
                (v, f)
            }
        }
    }
}

fn floored_log(density: f64, floor: f64) -> (f64, bool) {
    let l = density.ln();
    if l >= floor {
        (l, false)
    } else {
        (floor, true)
    }
}

fn spread_of(p: &CvPosterior) -> Result<Spread> {
    let n = p.len() as f64;
    if p.dim == 1 {
        let sd = p.summary.variance[0].sqrt();
        return if sd > 0.0 { Ok(Spread::Sd(sd)) } else { Err(Error::ZeroVariance { site: p.site }) };
    }
    let m: Vec<f64> = (0..2).map(|d| p.coordinate(d).iter().sum::<f64>() / n).collect();
    let (mut s00, mut s01, mut s11) = (0.0, 0.0, 0.0);
    for t in 0..p.len() {
        let x = p.draw(t);
        let (d0, d1) = (x[0] - m[0], x[1] - m[1]);
        s00 += d0 * d0;
        s01 += d0 * d1;
        s11 += d1 * d1;
    }
    let (s00, s01, s11) = (s00 / (n - 1.0), s01 / (n - 1.0), s11 / (n - 1.0));
    let det = s00 * s11 - s01 * s01;
    if !(det > 1e-300 * s00.max(s11).powi(2)) || !(det > 0.0) {
        return Err(Error::ZeroVariance { site: p.site });
    }
    Ok(Spread::InvCov([s11 / det, -s01 / det, s00 / det]))
}

/// Observed `T1` at climates `x`.
pub fn t1_statistic(x: &[f64], cv: &[CvPosterior], center: Center) -> Result<f64> {
    let opts = DensityOptions::for_dim(cv.first().map_or(1, |p| p.dim));
    Ok(Prepared::new(cv, opts)?.statistic(Measure::T1(center), x).0)
}

/// Observed `T2` at climates `x` and the number of floored terms.
pub fn t2_statistic(x: &[f64], cv: &[CvPosterior], opts: DensityOptions) -> Result<(f64, usize)> {
    Ok(Prepared::new(cv, opts)?.statistic(Measure::T2, x))
}

/// Observed log-density discrepancy `variant` at climates `x`.
pub fn d_variant(x: &[f64], cv: &[CvPosterior], variant: Measure, opts: DensityOptions) -> Result<(f64, usize)> {
    if matches!(variant, Measure::T1(_) | Measure::T2) {
        return Err(Error::InvalidParameter(format!("{variant} is not a log-density variant")));
    }
    Ok(Prepared::new(cv, opts)?.statistic(variant, x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyReport {
    pub measure: Measure,
    pub observed: f64,
    /// One value per draw index.
    pub reference: Vec<f64>,
    pub hpd: HpdRegion,
    pub accepted: bool,
    pub floored_observed: usize,
    pub floored_reference: usize,
}

impl DiscrepancyReport {
    /// Fraction of reference values at or below the observed statistic.
    pub fn reference_cdf(&self) -> f64 {
        self.reference.iter().filter(|&&r| r <= self.observed).count() as f64 / self.reference.len() as f64
    }
}

/// Builds the reference sample of `measure` and accepts the model iff the
/// observed statistic lies inside its `level` HPD region.
pub fn adequacy_test(
    prepared: &Prepared,
    measure: Measure,
    cv: &[CvPosterior],
    x: &[f64],
    level: f64,
    bins: Option<usize>,
) -> Result<DiscrepancyReport> {
    if cv.len() != prepared.n_sites() || x.len() != prepared.n_sites() * prepared.dim {
        return Err(Error::InvalidParameter("climates and posteriors disagree on the number of sites".into()));
    }
    let (observed, floored_observed) = prepared.statistic(measure, x);
    let mut floored_reference = 0;
    let reference: Vec<f64> = (0..prepared.n_draws())
        .map(|t| {
            let (v, f) = prepared.reference(measure, cv, t);
            floored_reference += f;
            v
        })
        .collect();
    let hpd = hpd_line_pushing(&reference, level, bins)?;
    let accepted = hpd.contains(observed);
    Ok(DiscrepancyReport { measure, observed, reference, hpd, accepted, floored_observed, floored_reference })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_names_round_trip() {
        for m in Measure::ALL {
            assert_eq!(m.to_string().parse::<Measure>().unwrap(), m);
        }
        assert!("t9".parse::<Measure>().is_err());
    }
}
