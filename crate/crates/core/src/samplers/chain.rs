//! The Markov chain over `(Theta, Z, Pi, Lambda[, x])` and its sweep schedule.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::gibbs::{draw_pi, z_one_probability};
use super::tmcmc::{accept, tmcmc_step_with, AdditiveMove, Innovation, OPTIMAL_ACCEPTANCE};
use super::tuning::rescale_factor;
use crate::error::{Error, Result};
use crate::model::density::{lambda_log_prior, LAMBDA_FLOOR};
use crate::model::{
    draw_species, polya_urn_draw, site_point, urn_log_prior, ClimateTable, CountMatrix, HeldOut, LatentState,
    PriorConfig, Response, SpeciesParams,
};

/// Target acceptance of the componentwise random walk on held-out climate.
pub const RW_ACCEPTANCE: f64 = 0.44;

/// Data and hyperparameters a chain targets.
#[derive(Debug, Clone, Copy)]
pub struct Model<'a> {
    pub counts: &'a CountMatrix,
    pub climate: &'a ClimateTable,
    pub prior: &'a PriorConfig,
    /// When false, `pi` and `z` are pinned at 0 and the likelihood is a plain multinomial.
    pub zero_inflation: bool,
}

impl<'a> Model<'a> {
    pub fn new(counts: &'a CountMatrix, climate: &'a ClimateTable, prior: &'a PriorConfig) -> Self {
        Self { counts, climate, prior, zero_inflation: true }
    }

    pub fn without_zero_inflation(mut self) -> Self {
        self.zero_inflation = false;
        self
    }

    pub fn validate<R: Response>(&self) -> Result<()> {
        self.prior.validate(R::DIM)?;
        if self.climate.dim() != R::DIM {
            return Err(Error::InvalidParameter(format!(
                "climate has {} columns, model expects {}",
                self.climate.dim(),
                R::DIM
            )));
        }
        if self.climate.n_sites() != self.counts.n_sites() {
            return Err(Error::InvalidParameter("climate and counts disagree on the number of sites".into()));
        }
        Ok(())
    }
}

/// ChaCha8 generator for stream `stream` of master seed `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState<R: Response> {
    pub theta: Vec<SpeciesParams<R>>,
    pub latent: LatentState,
    pub iteration: u64,
    pub rng: ChaCha8Rng,
}

impl<R: Response> ChainState<R> {
    /// Prior draw of `Theta`, all flags off, intensities matched to observed
    /// proportions. A held-out site starts at the prior mean of `x`.
    pub fn initial(model: &Model<'_>, heldout: Option<usize>, mut rng: ChaCha8Rng) -> Result<Self> {
        model.validate::<R>()?;
        let (n, m) = (model.counts.n_sites(), model.counts.n_species());
        if let Some(h) = heldout {
            if h >= n {
                return Err(Error::InvalidParameter(format!("held-out site {h} out of range")));
            }
        }
        let theta: Vec<SpeciesParams<R>> = (0..m).map(|_| draw_species::<R, _>(model.prior, &mut rng)).collect();
        let heldout = heldout.map(|site| HeldOut { site, x: model.prior.x_prior.mean() });
        let mut lambda = vec![0.0; n * m];
        for i in 0..n {
            let x = match &heldout {
                Some(h) if h.site == i => h.x.as_slice(),
                _ => model.climate.point(i),
            };
            let mass: f64 = theta.iter().map(|p| p.xi(x) * model.prior.psi).sum::<f64>().max(1.0);
            let y = model.counts.row(i);
            let denom = f64::from(model.counts.row_total(i)) + 0.5 * m as f64;
            for k in 0..m {
                lambda[i * m + k] = (f64::from(y[k]) + 0.5) / denom * mass;
            }
        }
        let pi0 = if model.zero_inflation { 0.5 } else { 0.0 };
        let latent = LatentState::new(n, m, vec![false; n * m], vec![pi0; n * m], lambda, heldout)?;
        Ok(Self { theta, latent, iteration: 0, rng })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Rate {
    pub accepted: u64,
    pub proposed: u64,
}

impl Rate {
    #[inline]
    pub fn record(&mut self, ok: bool) {
        self.proposed += 1;
        self.accepted += u64::from(ok);
    }

    pub fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }

    pub fn merge(&mut self, other: &Rate) {
        self.accepted += other.accepted;
        self.proposed += other.proposed;
    }
}

/// Acceptance counters per tuned block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AcceptanceStats {
    /// Per site (a single entry in full-block mode).
    pub lambda: Vec<Rate>,
    pub atom_mh: Vec<Rate>,
    pub atom_block: Vec<Rate>,
    pub sigma: Vec<Rate>,
    pub x: Vec<Rate>,
}

impl AcceptanceStats {
    fn new(n: usize, m: usize, d: usize) -> Self {
        Self {
            lambda: vec![Rate::default(); n],
            atom_mh: vec![Rate::default(); m],
            atom_block: vec![Rate::default(); m],
            sigma: vec![Rate::default(); m],
            x: vec![Rate::default(); d],
        }
    }

    fn total(v: &[Rate]) -> Rate {
        let mut out = Rate::default();
        v.iter().for_each(|r| out.merge(r));
        out
    }

    /// `(block name, pooled rate)` for every block that made proposals.
    pub fn summary(&self) -> Vec<(&'static str, Rate)> {
        [
            ("lambda", Self::total(&self.lambda)),
            ("atom-mh", Self::total(&self.atom_mh)),
            ("atom-block", Self::total(&self.atom_block)),
            ("sigma", Self::total(&self.sigma)),
            ("x", Self::total(&self.x)),
        ]
        .into_iter()
        .filter(|(_, r)| r.proposed > 0)
        .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaBlocks {
    /// One TMCMC block per site.
    #[default]
    PerSite,
    /// A single block over every active intensity; uses `lambda_site[0]`.
    Full,
}

/// Proposal scales. The scale of `lambda_ik` is `lambda_site[i] * lambda_sd[i*m + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTuning {
    pub blocks: LambdaBlocks,
    pub lambda_site: Vec<f64>,
    pub lambda_sd: Vec<f64>,
    pub atom_block: Vec<f64>,
    /// `m * R::SHARED_LEN` scales of the free shared coordinates.
    pub sigma: Vec<f64>,
    pub x: Vec<f64>,
}

impl ChainTuning {
    pub fn initial<R: Response>(model: &Model<'_>, state: &ChainState<R>) -> Self {
        let (n, m) = (model.counts.n_sites(), model.counts.n_species());
        let x = match &model.prior.x_prior {
            crate::model::XPrior::Uni { var, .. } => vec![0.5 * var.sqrt()],
            crate::model::XPrior::Bi { var, .. } => vec![0.5 * var[0].sqrt(), 0.5 * var[1].sqrt()],
        };
        Self {
            blocks: LambdaBlocks::PerSite,
            lambda_site: vec![1.0; n],
            lambda_sd: state.latent.lambda.iter().map(|l| 0.5 * l.max(1e-6)).collect(),
            atom_block: vec![1.0; m],
            sigma: vec![0.1; m * R::SHARED_LEN],
            x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneSchedule {
    pub rounds: usize,
    pub sweeps_per_round: usize,
    pub band: f64,
}

impl Default for TuneSchedule {
    fn default() -> Self {
        Self { rounds: 12, sweeps_per_round: 250, band: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSpec {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Draw<R: Response> {
    pub iteration: u64,
    pub theta: Vec<SpeciesParams<R>>,
    pub latent: LatentState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleStore<R: Response> {
    pub draws: Vec<Draw<R>>,
    pub acceptance: AcceptanceStats,
}

pub struct Sampler<'a, R: Response> {
    model: Model<'a>,
    state: ChainState<R>,
    pub tuning: ChainTuning,
    pub stats: AcceptanceStats,
    xi: Vec<f64>,
}

#[derive(Default, Clone, Copy)]
struct Welford {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
    }

    fn sd(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            (self.m2 / (self.n - 1.0)).sqrt()
        }
    }
}

impl<'a, R: Response> Sampler<'a, R> {
    pub fn new(model: Model<'a>, state: ChainState<R>, tuning: ChainTuning) -> Result<Self> {
        model.validate::<R>()?;
        let (n, m) = (model.counts.n_sites(), model.counts.n_species());
        if state.theta.len() != m || tuning.lambda_site.len() != n || tuning.lambda_sd.len() != n * m {
            return Err(Error::InvalidParameter("chain state or tuning does not match the data".into()));
        }
        if !model.zero_inflation && (state.latent.z.iter().any(|&z| z) || state.latent.pi.iter().any(|&p| p != 0.0)) {
            return Err(Error::State("zero inflation disabled but flags or probabilities are non-zero".into()));
        }
        let mut s = Self { model, state, tuning, stats: AcceptanceStats::new(n, m, R::DIM), xi: vec![0.0; n * m] };
        for i in 0..n {
            s.refresh_xi_row(i);
        }
        s.check("initialization")?;
        Ok(s)
    }

    /// Fresh chain from [`ChainState::initial`] with default tuning.
    pub fn from_prior(model: Model<'a>, heldout: Option<usize>, rng: ChaCha8Rng) -> Result<Self> {
        let state = ChainState::initial(&model, heldout, rng)?;
        let tuning = ChainTuning::initial(&model, &state);
        Self::new(model, state, tuning)
    }

    pub fn state(&self) -> &ChainState<R> {
        &self.state
    }

    pub fn into_state(self) -> ChainState<R> {
        self.state
    }

    pub fn model(&self) -> &Model<'a> {
        &self.model
    }

    pub fn xi(&self, i: usize, k: usize) -> f64 {
        self.xi[i * self.m() + k]
    }

    fn n(&self) -> usize {
        self.model.counts.n_sites()
    }

    fn m(&self) -> usize {
        self.model.counts.n_species()
    }

    fn refresh_xi_row(&mut self, i: usize) {
        let m = self.m();
        let x = site_point(self.model.climate, &self.state.latent, i);
        for k in 0..m {
            self.xi[i * m + k] = self.state.theta[k].xi(x);
        }
    }

    fn species_xi(&self, params: &SpeciesParams<R>) -> Vec<f64> {
        (0..self.n()).map(|i| params.xi(site_point(self.model.climate, &self.state.latent, i))).collect()
    }

    /// `sum_i` of the intensity log prior of column `k` for a column of shapes.
    fn species_lambda_lp(&self, k: usize, xi: &[f64]) -> f64 {
        let (m, psi) = (self.m(), self.model.prior.psi);
        xi.iter().enumerate().map(|(i, &s)| lambda_log_prior(self.state.latent.lambda[i * m + k], s, psi)).sum()
    }

    fn set_species(&mut self, k: usize, params: SpeciesParams<R>, xi: Vec<f64>) {
        let m = self.m();
        for (i, v) in xi.into_iter().enumerate() {
            self.xi[i * m + k] = v;
        }
        self.state.theta[k] = params;
    }

    fn check(&self, step: &'static str) -> Result<()> {
        self.check_sites(step, 0..self.n())
    }

    fn check_sites(&self, step: &'static str, sites: std::ops::Range<usize>) -> Result<()> {
        let wrap = |e: Error| Error::Invariant { step, detail: e.to_string() };
        let m = self.m();
        self.state.latent.check_sites(self.model.counts, sites.clone()).map_err(wrap)?;
        for p in &self.state.theta {
            R::check_params(&p.atoms, &p.shared).map_err(wrap)?;
        }
        if let Some(h) = &self.state.latent.heldout {
            if h.x.len() != R::DIM {
                return Err(Error::Invariant { step, detail: "held-out climate has the wrong dimension".into() });
            }
        }
        let held = self.state.latent.heldout_site().map(|h| h * m..(h + 1) * m).unwrap_or(0..0);
        let rows = sites.start * m..sites.end * m;
        if let Some(j) = rows.chain(held).find(|&j| !(self.xi[j].is_finite() && self.xi[j] > 0.0)) {
            return Err(Error::Invariant { step, detail: format!("xi[{j}] = {}", self.xi[j]) });
        }
        Ok(())
    }

    pub fn gibbs_update_z(&mut self, i: usize, k: usize) {
        let m = self.m();
        let lat = &self.state.latent;
        let p = z_one_probability(self.model.counts.row(i), lat.z_row(i), lat.lambda_row(i), lat.pi[i * m + k], k);
        let u: f64 = self.state.rng.random();
        self.state.latent.z[i * m + k] = u < p;
    }

    pub fn gibbs_update_pi(&mut self, i: usize, k: usize) {
        let j = i * self.m() + k;
        self.state.latent.pi[j] = draw_pi(self.state.latent.z[j], &mut self.state.rng);
    }

    fn refresh_inactive_lambda(&mut self, i: usize) {
        let (m, psi) = (self.m(), self.model.prior.psi);
        for k in 0..m {
            let j = i * m + k;
            if self.state.latent.z[j] {
                let g = Gamma::new(self.xi[j], psi).expect("positive shape and scale");
                self.state.latent.lambda[j] = g.sample(&mut self.state.rng).max(LAMBDA_FLOOR);
            }
        }
    }

    /// Log target of site `i`'s intensities (up to a constant) when the
    /// active coordinates `coords` (ascending) take `values` and every other
    /// active coordinate keeps its current value.
    fn lambda_site_lp(&self, i: usize, coords: &[usize], values: &[f64]) -> f64 {
        let m = self.m();
        let psi = self.model.prior.psi;
        let y = self.model.counts.row(i);
        let row = self.state.latent.lambda_row(i);
        let flags = self.state.latent.z_row(i);
        let mut next = coords.iter().zip(values).peekable();
        let (mut total, mut prior, mut weighted) = (0.0, 0.0, 0.0);
        for k in (0..m).filter(|&k| !flags[k]) {
            let v = match next.peek() {
                Some((&c, &v)) if c == k => {
                    next.next();
                    let lp = lambda_log_prior(v, self.xi[i * m + k], psi);
                    if lp == f64::NEG_INFINITY {
                        return lp;
                    }
                    prior += lp;
                    v
                }
                _ => row[k],
            };
            total += v;
            if y[k] > 0 {
                weighted += f64::from(y[k]) * v.ln();
            }
        }
        let y_total = f64::from(self.model.counts.row_total(i));
        weighted - y_total * total.ln() + prior
    }

    /// Refreshes flagged intensities from their prior, moves the active ones
    /// by one additive TMCMC step per block and one prior-proposal step per
    /// coordinate, then redraws each site's total.
    pub fn tmcmc_update_lambda(&mut self) {
        let n = self.n();
        for i in 0..n {
            self.refresh_inactive_lambda(i);
        }
        match self.tuning.blocks {
            LambdaBlocks::PerSite => {
                for i in 0..n {
                    self.lambda_site_step(i);
                }
            }
            LambdaBlocks::Full => self.lambda_full_step(),
        }
        for i in 0..n {
            self.independence_update_lambda(i);
            self.gibbs_rescale_lambda(i);
        }
    }

    /// Independence Metropolis-Hastings on each active intensity of site `i`,
    /// proposing from its `Gamma(xi, psi)` prior so only the count likelihood
    /// enters the ratio. Additive moves cannot leave values many orders of
    /// magnitude below their neighbours; this kernel can.
    pub fn independence_update_lambda(&mut self, i: usize) {
        let (m, psi) = (self.m(), self.model.prior.psi);
        let active = self.active(i);
        let mut values: Vec<f64> = active.iter().map(|&k| self.state.latent.lambda[i * m + k]).collect();
        let mut lp = self.lambda_site_lp(i, &active, &values);
        for (slot, &k) in active.iter().enumerate() {
            let xi = self.xi[i * m + k];
            let g = Gamma::new(xi, psi).expect("positive shape and scale");
            let cand = g.sample(&mut self.state.rng).max(LAMBDA_FLOOR);
            let log_u = self.state.rng.random::<f64>().ln();
            let old = values[slot];
            values[slot] = cand;
            let lp_new = self.lambda_site_lp(i, &active, &values);
            let ratio = lp_new - lp - lambda_log_prior(cand, xi, psi) + lambda_log_prior(old, xi, psi);
            if accept(log_u, ratio) {
                lp = lp_new;
                self.state.latent.lambda[i * m + k] = cand;
            } else {
                values[slot] = old;
            }
        }
    }

    /// Redraws the total of site `i`'s movable intensities from
    /// `Gamma(sum of their xi, psi)` given their proportions. The counts only
    /// see proportions, so without floored intensities this is an exact Gibbs
    /// draw; otherwise it is an independence proposal corrected by the count
    /// likelihood. A draw that would push a value onto the floor is rejected.
    pub fn gibbs_rescale_lambda(&mut self, i: usize) {
        let m = self.m();
        let coords = self.movable(i);
        if coords.is_empty() {
            return;
        }
        let shape: f64 = coords.iter().map(|&k| self.xi[i * m + k]).sum();
        let current: Vec<f64> = coords.iter().map(|&k| self.state.latent.lambda[i * m + k]).collect();
        let total: f64 = current.iter().sum();
        let g = Gamma::new(shape, self.model.prior.psi).expect("positive shape and scale");
        let factor = g.sample(&mut self.state.rng) / total;
        if !(factor.is_finite() && factor > 0.0) {
            return;
        }
        let scaled: Vec<f64> = current.iter().map(|v| v * factor).collect();
        if scaled.iter().any(|&v| !(v > LAMBDA_FLOOR)) {
            return;
        }
        if coords.len() < self.active(i).len() {
            let log_u = self.state.rng.random::<f64>().ln();
            let prior_change: f64 = coords
                .iter()
                .zip(current.iter().zip(&scaled))
                .map(|(&k, (&a, &b))| {
                    let xi = self.xi[i * m + k];
                    lambda_log_prior(b, xi, self.model.prior.psi) - lambda_log_prior(a, xi, self.model.prior.psi)
                })
                .sum();
            let ratio =
                self.lambda_site_lp(i, &coords, &scaled) - self.lambda_site_lp(i, &coords, &current) - prior_change;
            if !accept(log_u, ratio) {
                return;
            }
        }
        for (&k, v) in coords.iter().zip(scaled) {
            self.state.latent.lambda[i * m + k] = v;
        }
    }

    fn active(&self, i: usize) -> Vec<usize> {
        (0..self.m()).filter(|&k| !self.state.latent.z[i * self.m() + k]).collect()
    }

    /// Active coordinates above the floor; the additive and rescaling moves
    /// act on these only.
    fn movable(&self, i: usize) -> Vec<usize> {
        let m = self.m();
        (0..m)
            .filter(|&k| !self.state.latent.z[i * m + k] && self.state.latent.lambda[i * m + k] > LAMBDA_FLOOR)
            .collect()
    }

    /// Target of an additive move on `coords`: values must stay strictly
    /// above the floor, which is reachable only by prior-proposal moves.
    fn lambda_move_lp(&self, i: usize, coords: &[usize], values: &[f64]) -> f64 {
        if values.iter().any(|&v| !(v > LAMBDA_FLOOR)) {
            return f64::NEG_INFINITY;
        }
        self.lambda_site_lp(i, coords, values)
    }

    fn lambda_site_step(&mut self, i: usize) {
        let m = self.m();
        let coords = self.movable(i);
        if coords.is_empty() {
            return;
        }
        let scales: Vec<f64> =
            coords.iter().map(|&k| self.tuning.lambda_site[i] * self.tuning.lambda_sd[i * m + k]).collect();
        let mut values: Vec<f64> = coords.iter().map(|&k| self.state.latent.lambda[i * m + k]).collect();
        let mut lp = self.lambda_move_lp(i, &coords, &values);
        let mv = AdditiveMove::draw(coords.len(), &Innovation::default(), &mut self.state.rng);
        let log_u = self.state.rng.random::<f64>().ln();
        let ok = tmcmc_step_with(&mut values, &mut lp, &scales, &mv, log_u, |v| self.lambda_move_lp(i, &coords, v));
        if ok {
            for (&k, v) in coords.iter().zip(values) {
                self.state.latent.lambda[i * m + k] = v;
            }
        }
        self.stats.lambda[i].record(ok);
    }

    fn lambda_full_step(&mut self) {
        let (n, m) = (self.n(), self.m());
        let coords: Vec<Vec<usize>> = (0..n).map(|i| self.movable(i)).collect();
        let mut scales = Vec::new();
        let mut values = Vec::new();
        for (i, c) in coords.iter().enumerate() {
            for &k in c {
                scales.push(self.tuning.lambda_site[0] * self.tuning.lambda_sd[i * m + k]);
                values.push(self.state.latent.lambda[i * m + k]);
            }
        }
        if values.is_empty() {
            return;
        }
        let lp_of = |s: &Self, v: &[f64]| {
            let mut off = 0;
            let mut out = 0.0;
            for (i, c) in coords.iter().enumerate() {
                out += s.lambda_move_lp(i, c, &v[off..off + c.len()]);
                off += c.len();
            }
            out
        };
        let mut lp = lp_of(self, &values);
        let mv = AdditiveMove::draw(values.len(), &Innovation::default(), &mut self.state.rng);
        let log_u = self.state.rng.random::<f64>().ln();
        let ok = tmcmc_step_with(&mut values, &mut lp, &scales, &mv, log_u, |v| lp_of(self, v));
        if ok {
            let mut it = values.into_iter();
            for (i, c) in coords.iter().enumerate() {
                for &k in c {
                    self.state.latent.lambda[i * m + k] = it.next().expect("one value per movable slot");
                }
            }
        }
        self.stats.lambda[0].record(ok);
    }

    /// Metropolis-Hastings for atom `j` of species `k` with the urn
    /// conditional as proposal; only the intensity terms enter the ratio.
    pub fn mh_update_atom(&mut self, k: usize, j: usize) {
        let params = &self.state.theta[k];
        let others: Vec<R::Atom> = params.atoms.iter().enumerate().filter(|(l, _)| *l != j).map(|(_, a)| *a).collect();
        let cand = polya_urn_draw::<R, _>(&others, &params.shared, self.model.prior, &mut self.state.rng);
        let log_u = self.state.rng.random::<f64>().ln();
        if cand == params.atoms[j] {
            self.stats.atom_mh[k].record(true);
            return;
        }
        let (ratio, proposal, new_xi) = self.atom_proposal(k, j, cand);
        let ok = accept(log_u, ratio);
        if ok {
            self.set_species(k, proposal, new_xi);
        }
        self.stats.atom_mh[k].record(ok);
    }

    fn atom_proposal(&self, k: usize, j: usize, cand: R::Atom) -> (f64, SpeciesParams<R>, Vec<f64>) {
        let mut proposal = self.state.theta[k].clone();
        proposal.atoms[j] = cand;
        let new_xi = self.species_xi(&proposal);
        let old_xi: Vec<f64> = (0..self.n()).map(|i| self.xi(i, k)).collect();
        let ratio = self.species_lambda_lp(k, &new_xi) - self.species_lambda_lp(k, &old_xi);
        (ratio, proposal, new_xi)
    }

    /// Log acceptance ratio of replacing atom `j` of species `k` by `cand`
    /// under the urn proposal.
    pub fn atom_log_ratio(&self, k: usize, j: usize, cand: R::Atom) -> f64 {
        self.atom_proposal(k, j, cand).0
    }

    /// Log target ratio of moving site `i`'s active intensities (in species
    /// order) to `values`.
    pub fn lambda_log_ratio(&self, i: usize, values: &[f64]) -> f64 {
        let active = self.active(i);
        let current: Vec<f64> = active.iter().map(|&k| self.state.latent.lambda[i * self.m() + k]).collect();
        self.lambda_site_lp(i, &active, values) - self.lambda_site_lp(i, &active, &current)
    }

    /// Log target ratio of moving the held-out climate to `x`.
    pub fn x_log_ratio(&self, x: &[f64]) -> Result<f64> {
        let Some(h) = &self.state.latent.heldout else {
            return Err(Error::State("climate update requires a held-out site".into()));
        };
        Ok(self.x_log_target(h.site, x) - self.x_log_target(h.site, &h.x))
    }

    /// Shifts every atom location of species `k` by a common `+eps` or `-eps`.
    pub fn tmcmc_update_atoms_block(&mut self, k: usize) {
        let inn = Innovation::TruncatedNormal { sd: 0.5f64.sqrt() };
        let eps = self.tuning.atom_block[k] * inn.sample(&mut self.state.rng);
        let up = self.state.rng.random::<bool>();
        let log_u = self.state.rng.random::<f64>().ln();
        let params = &self.state.theta[k];
        let delta = if up { eps } else { -eps };
        let mut proposal = params.clone();
        proposal.atoms.iter_mut().for_each(|a| *a = R::shift_atom(a, delta));
        let old_xi: Vec<f64> = (0..self.n()).map(|i| self.xi(i, k)).collect();
        let new_xi = self.species_xi(&proposal);
        let prior = self.model.prior;
        let lp_old = self.species_lambda_lp(k, &old_xi) + urn_log_prior(params, prior);
        let lp_new = self.species_lambda_lp(k, &new_xi) + urn_log_prior(&proposal, prior);
        let ok = accept(log_u, lp_new - lp_old);
        if ok {
            self.set_species(k, proposal, new_xi);
        }
        self.stats.atom_block[k].record(ok);
    }

    /// Additive TMCMC on the free coordinates of the shared parameters, with
    /// the change-of-variables Jacobian in the target.
    pub fn tmcmc_update_sigma(&mut self, k: usize) {
        let len = R::SHARED_LEN;
        if len == 0 {
            return;
        }
        let prior = self.model.prior;
        let free = R::shared_to_free(&self.state.theta[k].shared);
        let scales = self.tuning.sigma[k * len..(k + 1) * len].to_vec();
        let mv = AdditiveMove::draw(len, &Innovation::default(), &mut self.state.rng);
        let log_u = self.state.rng.random::<f64>().ln();
        let prop_free = mv.apply(&free, &scales);
        let mut proposal = self.state.theta[k].clone();
        proposal.shared = R::shared_from_free(&prop_free);
        if R::check_params(&proposal.atoms, &proposal.shared).is_err() {
            self.stats.sigma[k].record(false);
            return;
        }
        let old_xi: Vec<f64> = (0..self.n()).map(|i| self.xi(i, k)).collect();
        let new_xi = self.species_xi(&proposal);
        let target = |s: &Self, p: &SpeciesParams<R>, xi: &[f64], f: &[f64]| {
            s.species_lambda_lp(k, xi)
                + urn_log_prior(p, prior)
                + R::shared_log_prior(&p.shared, prior)
                + R::shared_log_jacobian(f)
        };
        let lp_old = target(self, &self.state.theta[k], &old_xi, &free);
        let lp_new = target(self, &proposal, &new_xi, &prop_free);
        let ok = accept(log_u, lp_new - lp_old);
        if ok {
            self.set_species(k, proposal, new_xi);
        }
        self.stats.sigma[k].record(ok);
    }

    fn x_log_target(&self, site: usize, x: &[f64]) -> f64 {
        let (m, psi) = (self.m(), self.model.prior.psi);
        let lam = self.state.latent.lambda_row(site);
        let lik: f64 = (0..m).map(|k| lambda_log_prior(lam[k], self.state.theta[k].xi(x), psi)).sum();
        lik + self.model.prior.x_prior.log_density(x)
    }

    /// Componentwise Gaussian random-walk Metropolis on the held-out climate.
    pub fn rw_update_x(&mut self) -> Result<()> {
        let Some(h) = self.state.latent.heldout.clone() else {
            return Err(Error::State("climate update requires a held-out site".into()));
        };
        let mut x = h.x;
        let mut lp = self.x_log_target(h.site, &x);
        for d in 0..R::DIM {
            let e: f64 = StandardNormal.sample(&mut self.state.rng);
            let log_u = self.state.rng.random::<f64>().ln();
            let mut prop = x.clone();
            prop[d] += self.tuning.x[d] * e;
            let lp_new = self.x_log_target(h.site, &prop);
            let ok = accept(log_u, lp_new - lp);
            if ok {
                x = prop;
                lp = lp_new;
            }
            self.stats.x[d].record(ok);
        }
        self.state.latent.heldout = Some(HeldOut { site: h.site, x });
        self.refresh_xi_row(h.site);
        Ok(())
    }

    fn update_flags_and_probabilities(&mut self, sites: std::ops::Range<usize>) -> Result<()> {
        if !self.model.zero_inflation {
            return Ok(());
        }
        let m = self.m();
        for i in sites.clone() {
            for k in 0..m {
                self.gibbs_update_z(i, k);
            }
        }
        self.check_sites("z", sites.clone())?;
        for i in sites.clone() {
            for k in 0..m {
                self.gibbs_update_pi(i, k);
            }
        }
        self.check_sites("pi", sites)
    }

    /// One full sweep in the order Z, Pi, Lambda, atoms (MH), atom blocks,
    /// shared covariances, held-out climate.
    pub fn sweep(&mut self) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        self.update_flags_and_probabilities(0..n)?;
        self.tmcmc_update_lambda();
        self.check("lambda")?;
        for k in 0..m {
            for j in 0..self.state.theta[k].atoms.len() {
                self.mh_update_atom(k, j);
            }
        }
        self.check("atoms")?;
        for k in 0..m {
            self.tmcmc_update_atoms_block(k);
        }
        self.check("atom-block")?;
        if R::SHARED_LEN > 0 {
            for k in 0..m {
                self.tmcmc_update_sigma(k);
            }
            self.check("sigma")?;
        }
        if self.state.latent.heldout.is_some() {
            self.rw_update_x()?;
            self.check("x")?;
        }
        self.state.iteration += 1;
        Ok(())
    }

    /// Sweep restricted to site `i`'s latents and the held-out climate, with
    /// `Theta` and every other site frozen.
    pub fn sweep_site(&mut self, i: usize) -> Result<()> {
        self.update_flags_and_probabilities(i..i + 1)?;
        self.refresh_inactive_lambda(i);
        self.lambda_site_step(i);
        self.independence_update_lambda(i);
        self.gibbs_rescale_lambda(i);
        self.check_sites("lambda", i..i + 1)?;
        if self.state.latent.heldout.is_some() {
            self.rw_update_x()?;
            self.check_sites("x", i..i + 1)?;
        }
        self.state.iteration += 1;
        Ok(())
    }

    /// Pilot phase: rescales every block towards its target acceptance and
    /// re-estimates per-coordinate intensity spreads from active draws.
    /// Returns whether every block type ended inside the band (pooled over
    /// its blocks).
    pub fn tune(&mut self, schedule: TuneSchedule) -> Result<bool> {
        let (n, m) = (self.n(), self.m());
        let mut converged = false;
        for round in 0..schedule.rounds {
            self.stats = AcceptanceStats::new(n, m, R::DIM);
            let mut spread = vec![Welford::default(); n * m];
            for _ in 0..schedule.sweeps_per_round {
                self.sweep()?;
                let lat = &self.state.latent;
                for ((w, &l), &z) in spread.iter_mut().zip(&lat.lambda).zip(&lat.z) {
                    if !z {
                        w.push(l);
                    }
                }
            }
            // The rescale factor is damped by how far the rate is from the
            // target relative to its sampling noise, so short noisy rounds
            // barely move a scale while systematic offsets are still removed.
            let adapt = |scale: &mut f64, rate: &Rate, target: f64| {
                if let Some(r) = rate.rate() {
                    let noise = 2.0 * (target * (1.0 - target) / rate.proposed as f64).sqrt();
                    let weight = ((r - target) / noise).powi(2).min(1.0);
                    *scale *= rescale_factor(r, target).powf(weight);
                }
            };
            let lambda_blocks = match self.tuning.blocks {
                LambdaBlocks::PerSite => n,
                LambdaBlocks::Full => 1,
            };
            for i in 0..lambda_blocks {
                adapt(&mut self.tuning.lambda_site[i], &self.stats.lambda[i], OPTIMAL_ACCEPTANCE);
            }
            for k in 0..m {
                adapt(&mut self.tuning.atom_block[k], &self.stats.atom_block[k], OPTIMAL_ACCEPTANCE);
                for c in 0..R::SHARED_LEN {
                    adapt(&mut self.tuning.sigma[k * R::SHARED_LEN + c], &self.stats.sigma[k], OPTIMAL_ACCEPTANCE);
                }
            }
            for d in 0..R::DIM {
                adapt(&mut self.tuning.x[d], &self.stats.x[d], RW_ACCEPTANCE);
            }
            let mut refreshed = false;
            if round < schedule.rounds / 2 {
                for (sd, w) in self.tuning.lambda_sd.iter_mut().zip(&spread) {
                    if w.n < 10.0 {
                        continue;
                    }
                    // A coordinate that never moved gets a step relative to its size.
                    let s = w.sd();
                    let s = if s > 0.0 && s.is_finite() { s } else { 0.1 * w.mean.abs() };
                    if s > 0.0 && s.is_finite() {
                        *sd = s;
                        refreshed = true;
                    }
                }
            }
            let pooled_in = |rates: &[Rate], target: f64| {
                let t = AcceptanceStats::total(rates);
                t.rate().is_none_or(|r| {
                    let noise = 2.0 * (target * (1.0 - target) / t.proposed as f64).sqrt();
                    (r - target).abs() <= schedule.band.max(noise)
                })
            };
            let all_in = pooled_in(&self.stats.lambda, OPTIMAL_ACCEPTANCE)
                && pooled_in(&self.stats.atom_block, OPTIMAL_ACCEPTANCE)
                && pooled_in(&self.stats.sigma, OPTIMAL_ACCEPTANCE)
                && pooled_in(&self.stats.x, RW_ACCEPTANCE);
            if all_in && !refreshed && round > 0 {
                converged = true;
                break;
            }
        }
        if !converged {
            // Sites whose active set holds several zero-count species have
            // near-zero intensities that additive moves often push below zero,
            // which caps their acceptance below the target; only large misses
            // are worth a warning.
            let targets = [
                ("lambda", OPTIMAL_ACCEPTANCE),
                ("atom-block", OPTIMAL_ACCEPTANCE),
                ("sigma", OPTIMAL_ACCEPTANCE),
                ("x", RW_ACCEPTANCE),
            ];
            let mut far = false;
            let rates: Vec<String> = self
                .stats
                .summary()
                .into_iter()
                .filter_map(|(k, r)| {
                    let t = targets.iter().find(|(name, _)| *name == k)?.1;
                    let r = r.rate()?;
                    far |= (r - t).abs() > 0.2;
                    Some(format!("{k} {r:.3}"))
                })
                .collect();
            if far {
                warn!("chain tuning ended far from the target acceptance ({})", rates.join(", "));
            } else {
                debug!("chain tuning ended outside the acceptance band ({})", rates.join(", "));
            }
        }
        self.stats = AcceptanceStats::new(n, m, R::DIM);
        Ok(converged)
    }

    /// Runs `iterations` sweeps and stores every `thin`-th state after `burn_in`.
    pub fn run(&mut self, spec: RunSpec) -> Result<SampleStore<R>> {
        if spec.iterations < spec.burn_in || spec.thin == 0 {
            return Err(Error::InvalidParameter("need iterations >= burn_in and thin >= 1".into()));
        }
        let (n, m) = (self.n(), self.m());
        for _ in 0..spec.burn_in {
            self.sweep()?;
        }
        self.stats = AcceptanceStats::new(n, m, R::DIM);
        let mut draws = Vec::with_capacity((spec.iterations - spec.burn_in) / spec.thin);
        for t in 1..=spec.iterations - spec.burn_in {
            self.sweep()?;
            if t % spec.thin == 0 {
                draws.push(Draw {
                    iteration: self.state.iteration,
                    theta: self.state.theta.clone(),
                    latent: self.state.latent.clone(),
                });
            }
        }
        Ok(SampleStore { draws, acceptance: self.stats.clone() })
    }
}

/// Runs a chain from `state` with fixed `tuning` and returns the stored draws
/// together with the final state.
pub fn run_chain<R: Response>(
    model: Model<'_>,
    state: ChainState<R>,
    tuning: ChainTuning,
    spec: RunSpec,
) -> Result<(SampleStore<R>, ChainState<R>)> {
    let mut s = Sampler::new(model, state, tuning)?;
    let store = s.run(spec)?;
    Ok((store, s.into_state()))
}
