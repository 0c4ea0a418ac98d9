//! Coverage of observed climates and predictive abundance bands.

use rand::Rng;

use super::hpd::hpd_line_pushing;
use crate::crossval::CvPosterior;
use crate::error::{Error, Result};
use crate::model::{predictive_abundance_draw, CountMatrix, LatentState};

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSummary {
    pub level: f64,
    /// Covered fraction per climate coordinate.
    pub fraction: Vec<f64>,
    /// `covered[i][d]`: observed coordinate `d` of site `i` lies in its marginal HPD region.
    pub covered: Vec<Vec<bool>>,
}

/// Per-coordinate marginal HPD coverage of the observed climates `x`
/// (site-major, `dim` per site).
pub fn coverage_summary(cv: &[CvPosterior], x: &[f64], level: f64, bins: Option<usize>) -> Result<CoverageSummary> {
    let dim = cv.first().map_or(1, |p| p.dim);
    if x.len() != cv.len() * dim {
        return Err(Error::InvalidParameter("climates and posteriors disagree on the number of sites".into()));
    }
    let mut covered = Vec::with_capacity(cv.len());
    for (i, p) in cv.iter().enumerate() {
        let mut row = Vec::with_capacity(dim);
        for d in 0..dim {
            let region = if (p.summary.hpd[d].level - level).abs() < 1e-15 && bins.is_none() {
                p.summary.hpd[d].clone()
            } else {
                hpd_line_pushing(&p.coordinate(d), level, bins)?
            };
            row.push(region.contains(x[i * dim + d]));
        }
        covered.push(row);
    }
    let fraction = (0..dim).map(|d| covered.iter().filter(|r| r[d]).count() as f64 / cv.len().max(1) as f64).collect();
    Ok(CoverageSummary { level, fraction, covered })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveBand {
    pub site: usize,
    pub observed: u32,
    pub lower: u32,
    pub median: u32,
    pub upper: u32,
}

fn quantile(sorted: &[u32], p: f64) -> u32 {
    let n = sorted.len();
    let j = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[j]
}

/// Equal-tail `level` intervals of predicted counts of species `k`, one
/// predictive draw per posterior state.
pub fn predictive_band<'a, G, I>(
    states: I,
    counts: &CountMatrix,
    k: usize,
    level: f64,
    rng: &mut G,
) -> Result<Vec<PredictiveBand>>
where
    G: Rng + ?Sized,
    I: IntoIterator<Item = &'a LatentState>,
{
    if k >= counts.n_species() || !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter("species index or level out of range".into()));
    }
    let n = counts.n_sites();
    let mut draws: Vec<Vec<u32>> = vec![Vec::new(); n];
    for lat in states {
        for (i, d) in draws.iter_mut().enumerate() {
            let y = predictive_abundance_draw(counts.row_total(i), lat.z_row(i), lat.lambda_row(i), rng);
            d.push(y[k]);
        }
    }
    if draws[0].is_empty() {
        return Err(Error::InvalidParameter("no posterior states".into()));
    }
    let tail = 0.5 * (1.0 - level);
    Ok(draws
        .into_iter()
        .enumerate()
        .map(|(i, mut d)| {
            d.sort_unstable();
            PredictiveBand {
                site: i,
                observed: counts.get(i, k),
                lower: quantile(&d, tail),
                median: quantile(&d, 0.5),
                upper: quantile(&d, 1.0 - tail),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeCell {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub sites: usize,
    /// Mean of the values of the sites in the cell.
    pub mean: Option<f64>,
}

/// Averages per-site values (e.g. posterior predictive medians) over a
/// `cells.0 x cells.1` lattice covering the 2-D climate points.
pub fn lattice_median_surface(points: &[f64], values: &[f64], cells: (usize, usize)) -> Result<Vec<LatticeCell>> {
    if points.len() != 2 * values.len() || cells.0 == 0 || cells.1 == 0 || values.is_empty() {
        return Err(Error::InvalidParameter("lattice needs 2-D points, one value each, and >= 1 cell".into()));
    }
    let range = |d: usize| {
        points.iter().skip(d).step_by(2).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
    };
    let (rx, ry) = (range(0), range(1));
    let wx = ((rx.1 - rx.0) / cells.0 as f64).max(f64::MIN_POSITIVE);
    let wy = ((ry.1 - ry.0) / cells.1 as f64).max(f64::MIN_POSITIVE);
    let mut sum = vec![0.0; cells.0 * cells.1];
    let mut cnt = vec![0usize; cells.0 * cells.1];
    for (p, v) in points.chunks_exact(2).zip(values) {
        let a = (((p[0] - rx.0) / wx) as usize).min(cells.0 - 1);
        let b = (((p[1] - ry.0) / wy) as usize).min(cells.1 - 1);
        sum[a * cells.1 + b] += v;
        cnt[a * cells.1 + b] += 1;
    }
    let mut out = Vec::with_capacity(sum.len());
    for a in 0..cells.0 {
        for b in 0..cells.1 {
            let j = a * cells.1 + b;
            out.push(LatticeCell {
                x_range: (rx.0 + a as f64 * wx, rx.0 + (a + 1) as f64 * wx),
                y_range: (ry.0 + b as f64 * wy, ry.0 + (b + 1) as f64 * wy),
                sites: cnt[j],
                mean: (cnt[j] > 0).then(|| sum[j] / cnt[j] as f64),
            });
        }
    }
    Ok(out)
}
