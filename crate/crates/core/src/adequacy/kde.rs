//! Gaussian kernel density estimates evaluated on regular grids.
//!
//! Samples are linearly binned onto the grid and convolved with a truncated
//! Gaussian kernel; off-grid values are interpolated. Cost is linear in the
//! sample count, so thousands of evaluations per site stay cheap.

use crate::error::{Error, Result};

/// Silverman's rule `1.06 sd N^(-1/5)`.
pub fn silverman_bandwidth(sd: f64, n: usize) -> f64 {
    1.06 * sd * (n as f64).powf(-0.2)
}

/// Kernel reach in bandwidths on each side of a sample.
const REACH: f64 = 4.0;

pub(crate) fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn gaussian_weights(bandwidth: f64, step: f64) -> Vec<f64> {
    let half = (REACH * bandwidth / step).ceil() as usize;
    (0..=half)
        .map(|d| {
            let u = d as f64 * step / bandwidth;
            (-0.5 * u * u).exp()
        })
        .collect()
}

fn convolve(w: &[f64], kernel: &[f64]) -> Vec<f64> {
    let g = w.len();
    let half = kernel.len() - 1;
    let mut out = vec![0.0; g];
    for (j, &wj) in w.iter().enumerate() {
        if wj == 0.0 {
            continue;
        }
        let lo = j.saturating_sub(half);
        let hi = (j + half).min(g - 1);
        for (o, slot) in out[lo..=hi].iter_mut().enumerate() {
            *slot += wj * kernel[(lo + o).abs_diff(j)];
        }
    }
    out
}

fn bin_linear(v: f64, lo: f64, step: f64, g: usize) -> (usize, f64) {
    let p = ((v - lo) / step).clamp(0.0, (g - 1) as f64);
    let j = (p.floor() as usize).min(g - 2);
    (j, p - j as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kde1 {
    lo: f64,
    step: f64,
    density: Vec<f64>,
    bandwidth: f64,
}

impl Kde1 {
    /// Fits on `points` grid nodes spanning the samples plus the kernel reach.
    pub fn fit(samples: &[f64], points: usize) -> Result<Self> {
        if samples.len() < 2 || points < 3 || samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "density estimate needs >= 2 finite samples and >= 3 grid points".into(),
            ));
        }
        let (_, sd) = mean_sd(samples);
        if !(sd > 0.0) {
            return Err(Error::InvalidParameter("density estimate of constant samples".into()));
        }
        let h = silverman_bandwidth(sd, samples.len());
        let (min, max) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let lo = min - REACH * h;
        let step = (max + REACH * h - lo) / (points - 1) as f64;
        let mut w = vec![0.0; points];
        for &v in samples {
            let (j, f) = bin_linear(v, lo, step, points);
            w[j] += 1.0 - f;
            w[j + 1] += f;
        }
        let mut density = convolve(&w, &gaussian_weights(h, step));
        let mass: f64 = density.iter().sum::<f64>() * step;
        density.iter_mut().for_each(|d| *d /= mass);
        Ok(Self { lo, step, density, bandwidth: h })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn node(&self, g: usize) -> f64 {
        self.lo + g as f64 * self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.density
    }

    /// Interpolated density; zero outside the grid.
    pub fn density(&self, x: f64) -> f64 {
        let g = self.density.len();
        let p = (x - self.lo) / self.step;
        if !(p >= 0.0 && p <= (g - 1) as f64) {
            return 0.0;
        }
        let j = (p.floor() as usize).min(g - 2);
        let f = p - j as f64;
        self.density[j] * (1.0 - f) + self.density[j + 1] * f
    }
}

/// Product-kernel estimate on a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde2 {
    lo: [f64; 2],
    step: [f64; 2],
    g: usize,
    /// Row-major over (first coordinate, second coordinate).
    density: Vec<f64>,
}

impl Kde2 {
    /// `samples` are interleaved pairs.
    pub fn fit(samples: &[f64], points: usize) -> Result<Self> {
        let n = samples.len() / 2;
        if n < 2 || !samples.len().is_multiple_of(2) || points < 3 || samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("2-D density estimate needs >= 2 finite points".into()));
        }
        let mut lo = [0.0; 2];
        let mut step = [0.0; 2];
        let mut kernels = Vec::with_capacity(2);
        for d in 0..2 {
            let col: Vec<f64> = samples.iter().skip(d).step_by(2).copied().collect();
            let (_, sd) = mean_sd(&col);
            if !(sd > 0.0) {
                return Err(Error::InvalidParameter("2-D density estimate of a constant coordinate".into()));
            }
            let h = silverman_bandwidth(sd, n);
            let (min, max) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            lo[d] = min - REACH * h;
            step[d] = (max + REACH * h - lo[d]) / (points - 1) as f64;
            kernels.push(gaussian_weights(h, step[d]));
        }
        let g = points;
        let mut w = vec![0.0; g * g];
        for p in samples.chunks_exact(2) {
            let (a, fa) = bin_linear(p[0], lo[0], step[0], g);
            let (b, fb) = bin_linear(p[1], lo[1], step[1], g);
            w[a * g + b] += (1.0 - fa) * (1.0 - fb);
            w[a * g + b + 1] += (1.0 - fa) * fb;
            w[(a + 1) * g + b] += fa * (1.0 - fb);
            w[(a + 1) * g + b + 1] += fa * fb;
        }
        for a in 0..g {
            let row = convolve(&w[a * g..(a + 1) * g], &kernels[1]);
            w[a * g..(a + 1) * g].copy_from_slice(&row);
        }
        for b in 0..g {
            let col: Vec<f64> = (0..g).map(|a| w[a * g + b]).collect();
            for (a, v) in convolve(&col, &kernels[0]).into_iter().enumerate() {
                w[a * g + b] = v;
            }
        }
        let mass: f64 = w.iter().sum::<f64>() * step[0] * step[1];
        w.iter_mut().for_each(|d| *d /= mass);
        Ok(Self { lo, step, g, density: w })
    }

    /// Bilinear interpolation; zero outside the grid.
    pub fn density(&self, x: &[f64]) -> f64 {
        let g = self.g;
        let mut idx = [0usize; 2];
        let mut frac = [0.0; 2];
        for d in 0..2 {
            let p = (x[d] - self.lo[d]) / self.step[d];
            if !(p >= 0.0 && p <= (g - 1) as f64) {
                return 0.0;
            }
            idx[d] = (p.floor() as usize).min(g - 2);
            frac[d] = p - idx[d] as f64;
        }
        let at = |a: usize, b: usize| self.density[a * g + b];
        let (a, b) = (idx[0], idx[1]);
        let (fa, fb) = (frac[0], frac[1]);
        at(a, b) * (1.0 - fa) * (1.0 - fb)
            + at(a, b + 1) * (1.0 - fa) * fb
            + at(a + 1, b) * fa * (1.0 - fb)
            + at(a + 1, b + 1) * fa * fb
    }
}

/// Either estimator, by dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Uni(Kde1),
    Bi(Kde2),
}

impl Density {
    pub fn fit(samples: &[f64], dim: usize, points: usize) -> Result<Self> {
        match dim {
            1 => Kde1::fit(samples, points).map(Density::Uni),
            2 => Kde2::fit(samples, points).map(Density::Bi),
            _ => Err(Error::InvalidParameter(format!("unsupported dimension {dim}"))),
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        match self {
            Density::Uni(k) => k.density(x[0]),
            Density::Bi(k) => k.density(x),
        }
    }
}
