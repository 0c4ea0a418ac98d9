use super::data::CountMatrix;
use crate::error::{Error, Result};

/// The held-out site of a cross-validation run and its climate parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldOut {
    pub site: usize,
    pub x: Vec<f64>,
}

/// Site-by-species latent variables, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    n: usize,
    m: usize,
    /// Structural-zero flags.
    pub z: Vec<bool>,
    pub pi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub heldout: Option<HeldOut>,
}

impl LatentState {
    pub fn new(
        n: usize,
        m: usize,
        z: Vec<bool>,
        pi: Vec<f64>,
        lambda: Vec<f64>,
        heldout: Option<HeldOut>,
    ) -> Result<Self> {
        if z.len() != n * m || pi.len() != n * m || lambda.len() != n * m {
            return Err(Error::InvalidParameter(format!("latent arrays must have {n}x{m} entries")));
        }
        Ok(Self { n, m, z, pi, lambda, heldout })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn n_species(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn idx(&self, i: usize, k: usize) -> usize {
        i * self.m + k
    }

    pub fn z_row(&self, i: usize) -> &[bool] {
        &self.z[i * self.m..(i + 1) * self.m]
    }

    pub fn pi_row(&self, i: usize) -> &[f64] {
        &self.pi[i * self.m..(i + 1) * self.m]
    }

    pub fn lambda_row(&self, i: usize) -> &[f64] {
        &self.lambda[i * self.m..(i + 1) * self.m]
    }

    pub fn heldout_site(&self) -> Option<usize> {
        self.heldout.as_ref().map(|h| h.site)
    }

    /// Checks the support constraints against the observed counts.
    pub fn check(&self, counts: &CountMatrix) -> Result<()> {
        self.check_sites(counts, 0..self.n)
    }

    /// As [`check`](Self::check), for the rows in `sites` and the held-out climate.
    pub fn check_sites(&self, counts: &CountMatrix, sites: std::ops::Range<usize>) -> Result<()> {
        if counts.n_sites() != self.n || counts.n_species() != self.m {
            return Err(Error::State("latent state does not match count matrix shape".into()));
        }
        for i in sites {
            let y = counts.row(i);
            let z = self.z_row(i);
            if let Some(k) = (0..self.m).find(|&k| z[k] && y[k] > 0) {
                return Err(Error::State(format!("site {i}, species {k}: flagged zero has a positive count")));
            }
            if z.iter().all(|&f| f) {
                return Err(Error::State(format!("site {i}: empty active set")));
            }
            for (k, (&l, &p)) in self.lambda_row(i).iter().zip(self.pi_row(i)).enumerate() {
                if !(l > 0.0) || !l.is_finite() {
                    return Err(Error::State(format!("site {i}, species {k}: lambda = {l}")));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::State(format!("site {i}, species {k}: pi = {p}")));
                }
            }
        }
        if let Some(h) = &self.heldout {
            if h.site >= self.n || h.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::State(format!("invalid held-out site {h:?}")));
            }
        }
        Ok(())
    }
}
