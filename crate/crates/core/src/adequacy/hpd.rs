//! Highest-posterior-density regions by line pushing, and point summaries.

use super::kde::{mean_sd, Kde1};
use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 100;

/// Grid nodes used when none are requested: `ceil(sqrt(N))`, at least 64.
pub fn default_bins(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HpdRegion {
    /// Sorted, disjoint closed intervals.
    pub segments: Vec<(f64, f64)>,
    /// Estimated probability of the region.
    pub mass: f64,
    pub level: f64,
    /// Grid spacing of the density estimate (0 for a point region).
    pub resolution: f64,
}

impl HpdRegion {
    pub fn point(c: f64, level: f64) -> Self {
        Self { segments: vec![(c, c)], mass: 1.0, level, resolution: 0.0 }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.segments.iter().any(|&(a, b)| a <= x && x <= b)
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(|(a, b)| b - a).sum()
    }
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!("{} samples given, at least {MIN_SAMPLES} needed", samples.len())));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite sample".into()));
    }
    Ok(())
}

fn is_constant(samples: &[f64]) -> bool {
    samples.iter().all(|&v| v == samples[0])
}

/// Lowers a horizontal line through the estimated density until the region
/// above it holds `level` of the mass. The density is piecewise linear
/// between grid nodes, so the line can stop between node values.
pub fn hpd_line_pushing(samples: &[f64], level: f64, bins: Option<usize>) -> Result<HpdRegion> {
    check_samples(samples)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("HPD level {level} outside (0, 1)")));
    }
    if is_constant(samples) {
        return Ok(HpdRegion::point(samples[0], level));
    }
    let kde = Kde1::fit(samples, bins.unwrap_or_else(|| default_bins(samples.len())))?;
    Ok(hpd_from_grid(&kde, level))
}

/// Area above `t` of the linear piece between densities `a` and `b` over one
/// grid step, and the sub-interval (as step fractions) where it lies.
fn piece_above(a: f64, b: f64, t: f64) -> Option<(f64, f64, f64)> {
    match (a >= t, b >= t) {
        (true, true) => Some((0.5 * (a + b), 0.0, 1.0)),
        (false, false) => None,
        (true, false) => {
            let f = (a - t) / (a - b);
            Some((f * 0.5 * (a + t), 0.0, f))
        }
        (false, true) => {
            let f = (b - t) / (b - a);
            Some((f * 0.5 * (b + t), 1.0 - f, 1.0))
        }
    }
}

fn mass_above(d: &[f64], t: f64) -> f64 {
    d.windows(2).filter_map(|w| piece_above(w[0], w[1], t)).map(|(m, _, _)| m).sum()
}

fn hpd_from_grid(kde: &Kde1, level: f64) -> HpdRegion {
    let d = kde.values();
    let total = mass_above(d, 0.0);
    let (mut lo, mut hi) = (0.0, d.iter().cloned().fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass_above(d, mid) >= level * total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let threshold = lo;
    let mut segments: Vec<(f64, f64)> = Vec::new();
    for (g, w) in d.windows(2).enumerate() {
        if let Some((_, f0, f1)) = piece_above(w[0], w[1], threshold) {
            let (a, b) = (kde.node(g) + f0 * kde.step(), kde.node(g) + f1 * kde.step());
            match segments.last_mut() {
                Some(last) if f0 == 0.0 && (last.1 - a).abs() <= 1e-9 * kde.step() => last.1 = b,
                _ => segments.push((a, b)),
            }
        }
    }
    HpdRegion { segments, mass: mass_above(d, threshold) / total, level, resolution: kde.step() }
}

/// Sample median (mean of the two middle order statistics for even N).
pub fn median(samples: &[f64]) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Location of the highest node of the density estimate, refined by a
/// parabola through its neighbours. Ties go to the node nearest the median.
pub fn posterior_mode(samples: &[f64], bins: Option<usize>) -> Result<f64> {
    check_samples(samples)?;
    if is_constant(samples) {
        return Ok(samples[0]);
    }
    let kde = Kde1::fit(samples, bins.unwrap_or_else(|| default_bins(samples.len())))?;
    let d = kde.values();
    let med = median(samples);
    let top = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let g = (0..d.len())
        .filter(|&g| d[g] == top)
        .min_by(|&a, &b| (kde.node(a) - med).abs().total_cmp(&(kde.node(b) - med).abs()))
        .expect("non-empty grid");
    if g == 0 || g + 1 == d.len() {
        return Ok(kde.node(g));
    }
    let (l, c, r) = (d[g - 1], d[g], d[g + 1]);
    let denom = l - 2.0 * c + r;
    let shift = if denom < 0.0 { (0.5 * (l - r) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    Ok(kde.node(g) + shift * kde.step())
}

/// Unbiased sample variance.
pub fn variance(samples: &[f64]) -> f64 {
    let (_, sd) = mean_sd(samples);
    sd * sd
}

/// Point and interval summaries of a (possibly 2-D, interleaved) sample set,
/// one entry per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSummary {
    pub mode: Vec<f64>,
    pub median: Vec<f64>,
    pub variance: Vec<f64>,
    pub hpd: Vec<HpdRegion>,
}

pub fn summarize(samples: &[f64], dim: usize, level: f64, bins: Option<usize>) -> Result<CvSummary> {
    let mut s = CvSummary { mode: vec![], median: vec![], variance: vec![], hpd: vec![] };
    for d in 0..dim {
        let col: Vec<f64> = samples.iter().skip(d).step_by(dim).copied().collect();
        s.mode.push(posterior_mode(&col, bins)?);
        s.median.push(median(&col));
        s.variance.push(variance(&col));
        s.hpd.push(hpd_line_pushing(&col, level, bins)?);
    }
    Ok(s)
}
