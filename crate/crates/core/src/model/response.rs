//! Gaussian-bump response functions and the base measures of their atoms.
//!
//! The expected abundance of species `k` at climate `x` is proportional to
//! `xi_k(x) = sum_j N(x; beta_kj, spread)`. In one dimension every atom
//! carries its own tolerance `gamma_kj`; in two dimensions all atoms of a
//! species share one covariance matrix.

use std::f64::consts::PI;
use std::fmt::Debug;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal, Uniform};

use super::density::log_inv_gamma;
use super::prior::PriorConfig;
use crate::error::{Error, Result};

/// Smallest intensity shape used anywhere; keeps `ln Gamma(xi)` finite when
/// every bump underflows far from the optima.
pub const XI_FLOOR: f64 = f64::MIN_POSITIVE;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub trait Response: Clone + Debug + Send + Sync + 'static {
    const DIM: usize;
    /// Number of f64 slots an atom occupies in flat encodings.
    const ATOM_LEN: usize;
    /// Number of f64 slots of the species-level shared parameters.
    const SHARED_LEN: usize;

    type Atom: Copy + PartialEq + Debug + Send + Sync;
    type Shared: Clone + PartialEq + Debug + Send + Sync;

    /// Gaussian density at `x` of the bump centred at `atom`.
    fn bump(atom: &Self::Atom, shared: &Self::Shared, x: &[f64]) -> f64;

    fn check_params(atoms: &[Self::Atom], shared: &Self::Shared) -> Result<()>;

    /// Normalized log density of the base measure `G0(atom | shared)`.
    fn g0_log_density(atom: &Self::Atom, shared: &Self::Shared, prior: &PriorConfig) -> f64;

    fn g0_draw<G: Rng + ?Sized>(shared: &Self::Shared, prior: &PriorConfig, rng: &mut G) -> Self::Atom;

    /// Log prior of the shared parameters (0 when there are none).
    fn shared_log_prior(shared: &Self::Shared, prior: &PriorConfig) -> f64;

    fn shared_draw<G: Rng + ?Sized>(prior: &PriorConfig, rng: &mut G) -> Self::Shared;

    /// Translates the atom's location by `eps` in every coordinate.
    fn shift_atom(atom: &Self::Atom, eps: f64) -> Self::Atom;

    /// Shared parameters mapped to the real line, for additive moves.
    fn shared_to_free(shared: &Self::Shared) -> Vec<f64>;
    fn shared_from_free(free: &[f64]) -> Self::Shared;
    /// `ln |d shared / d free|` at `free`.
    fn shared_log_jacobian(free: &[f64]) -> f64;

    fn encode_atom(atom: &Self::Atom, out: &mut Vec<f64>);
    fn decode_atom(slots: &[f64]) -> Self::Atom;
    fn encode_shared(shared: &Self::Shared, out: &mut Vec<f64>);
    fn decode_shared(slots: &[f64]) -> Self::Shared;
}

/// Parameters of one species' response function.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesParams<R: Response> {
    pub atoms: Vec<R::Atom>,
    pub shared: R::Shared,
}

impl<R: Response> SpeciesParams<R> {
    pub fn new(atoms: Vec<R::Atom>, shared: R::Shared) -> Result<Self> {
        R::check_params(&atoms, &shared)?;
        Ok(Self { atoms, shared })
    }

    /// `xi(x)` without validation, floored at [`XI_FLOOR`].
    #[inline]
    pub fn xi(&self, x: &[f64]) -> f64 {
        let s: f64 = self.atoms.iter().map(|a| R::bump(a, &self.shared, x)).sum();
        s.max(XI_FLOOR)
    }

    pub fn distinct_atoms(&self) -> Vec<R::Atom> {
        let mut out: Vec<R::Atom> = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            if !out.contains(a) {
                out.push(*a);
            }
        }
        out
    }

    pub fn n_distinct(&self) -> usize {
        self.distinct_atoms().len()
    }
}

/// Response-function value `xi` at climate point `x`.
pub fn response_xi<R: Response>(x: &[f64], params: &SpeciesParams<R>) -> Result<f64> {
    if x.len() != R::DIM || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("climate point {x:?} is not a finite {}-vector", R::DIM)));
    }
    R::check_params(&params.atoms, &params.shared)?;
    Ok(params.xi(x))
}

/// One climate variable, per-atom tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Univariate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniAtom {
    pub beta: f64,
    pub gamma: f64,
}

impl Response for Univariate {
    const DIM: usize = 1;
    const ATOM_LEN: usize = 2;
    const SHARED_LEN: usize = 0;
    type Atom = UniAtom;
    type Shared = ();

    #[inline]
    fn bump(atom: &UniAtom, _: &(), x: &[f64]) -> f64 {
        let z = (x[0] - atom.beta) / atom.gamma;
        (-0.5 * z * z - LN_SQRT_2PI).exp() / atom.gamma
    }

    fn check_params(atoms: &[UniAtom], _: &()) -> Result<()> {
        for (j, a) in atoms.iter().enumerate() {
            if !a.beta.is_finite() || !(a.gamma > 0.0) || !a.gamma.is_finite() {
                return Err(Error::InvalidParameter(format!("atom {j}: need finite beta and gamma > 0, got {a:?}")));
            }
        }
        Ok(())
    }

    fn g0_log_density(atom: &UniAtom, _: &(), prior: &PriorConfig) -> f64 {
        if !(atom.gamma > 0.0) {
            return f64::NEG_INFINITY;
        }
        let g = &prior.g0_uni;
        let z = (atom.beta - g.mu_beta) / atom.gamma;
        log_inv_gamma(atom.gamma, g.a, g.b) - LN_SQRT_2PI - atom.gamma.ln() - 0.5 * z * z
    }

    fn g0_draw<G: Rng + ?Sized>(_: &(), prior: &PriorConfig, rng: &mut G) -> UniAtom {
        let g = &prior.g0_uni;
        let gamma = g.b / gamma_draw(g.a, rng);
        let e: f64 = StandardNormal.sample(rng);
        UniAtom { beta: g.mu_beta + gamma * e, gamma }
    }

    fn shared_log_prior(_: &(), _: &PriorConfig) -> f64 {
        0.0
    }

    fn shared_draw<G: Rng + ?Sized>(_: &PriorConfig, _: &mut G) {}

    fn shift_atom(atom: &UniAtom, eps: f64) -> UniAtom {
        UniAtom { beta: atom.beta + eps, gamma: atom.gamma }
    }

    fn shared_to_free(_: &()) -> Vec<f64> {
        Vec::new()
    }

    fn shared_from_free(_: &[f64]) {}

    fn shared_log_jacobian(_: &[f64]) -> f64 {
        0.0
    }

    fn encode_atom(atom: &UniAtom, out: &mut Vec<f64>) {
        out.extend([atom.beta, atom.gamma]);
    }

    fn decode_atom(slots: &[f64]) -> UniAtom {
        UniAtom { beta: slots[0], gamma: slots[1] }
    }

    fn encode_shared(_: &(), _: &mut Vec<f64>) {}

    fn decode_shared(_: &[f64]) {}
}

/// Two climate variables, one covariance per species.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bivariate;

/// Covariance `[[s11, rho*sqrt(s11*s22)], [., s22]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cov2 {
    pub s11: f64,
    pub s22: f64,
    pub rho: f64,
}

impl Cov2 {
    pub fn det(&self) -> f64 {
        self.s11 * self.s22 * (1.0 - self.rho * self.rho)
    }

    /// Mahalanobis form `d' Sigma^-1 d`.
    #[inline]
    pub fn quad(&self, d0: f64, d1: f64) -> f64 {
        let u0 = d0 / self.s11.sqrt();
        let u1 = d1 / self.s22.sqrt();
        (u0 * u0 - 2.0 * self.rho * u0 * u1 + u1 * u1) / (1.0 - self.rho * self.rho)
    }

    #[inline]
    pub fn log_norm(&self) -> f64 {
        -(2.0 * PI).ln() - 0.5 * self.det().ln()
    }
}

impl Response for Bivariate {
    const DIM: usize = 2;
    const ATOM_LEN: usize = 2;
    const SHARED_LEN: usize = 3;
    type Atom = [f64; 2];
    type Shared = Cov2;

    #[inline]
    fn bump(atom: &[f64; 2], cov: &Cov2, x: &[f64]) -> f64 {
        (cov.log_norm() - 0.5 * cov.quad(x[0] - atom[0], x[1] - atom[1])).exp()
    }

    fn check_params(atoms: &[[f64; 2]], cov: &Cov2) -> Result<()> {
        if !(cov.s11 > 0.0) || !(cov.s22 > 0.0) || !(cov.rho.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!("invalid covariance {cov:?}")));
        }
        if let Some(j) = atoms.iter().position(|a| a.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidParameter(format!("atom {j} is not finite")));
        }
        Ok(())
    }

    fn g0_log_density(atom: &[f64; 2], cov: &Cov2, prior: &PriorConfig) -> f64 {
        if !(cov.s11 > 0.0) || !(cov.s22 > 0.0) || !(cov.rho.abs() < 1.0) {
            return f64::NEG_INFINITY;
        }
        let mu = prior.g0_bi.mu_beta;
        cov.log_norm() - 0.5 * cov.quad(atom[0] - mu[0], atom[1] - mu[1])
    }

    fn g0_draw<G: Rng + ?Sized>(cov: &Cov2, prior: &PriorConfig, rng: &mut G) -> [f64; 2] {
        let mu = prior.g0_bi.mu_beta;
        let e0: f64 = StandardNormal.sample(rng);
        let e1: f64 = StandardNormal.sample(rng);
        let sd0 = cov.s11.sqrt();
        let sd1 = cov.s22.sqrt();
        let r = cov.rho;
        [mu[0] + sd0 * e0, mu[1] + sd1 * (r * e0 + (1.0 - r * r).sqrt() * e1)]
    }

    fn shared_log_prior(cov: &Cov2, prior: &PriorConfig) -> f64 {
        if !(cov.rho.abs() < 1.0) {
            return f64::NEG_INFINITY;
        }
        let g = &prior.g0_bi;
        log_inv_gamma(cov.s11, g.a[0], g.b[0]) + log_inv_gamma(cov.s22, g.a[1], g.b[1]) - std::f64::consts::LN_2
    }

    fn shared_draw<G: Rng + ?Sized>(prior: &PriorConfig, rng: &mut G) -> Cov2 {
        let g = &prior.g0_bi;
        let s11 = g.b[0] / gamma_draw(g.a[0], rng);
        let s22 = g.b[1] / gamma_draw(g.a[1], rng);
        let rho = loop {
            // open interval
            let r: f64 = Uniform::new(-1.0, 1.0).expect("valid range").sample(rng);
            if r.abs() < 1.0 {
                break r;
            }
        };
        Cov2 { s11, s22, rho }
    }

    fn shift_atom(atom: &[f64; 2], eps: f64) -> [f64; 2] {
        [atom[0] + eps, atom[1] + eps]
    }

    fn shared_to_free(cov: &Cov2) -> Vec<f64> {
        vec![cov.s11.ln(), cov.s22.ln(), (0.5 * PI * cov.rho).tan()]
    }

    fn shared_from_free(free: &[f64]) -> Cov2 {
        Cov2 { s11: free[0].exp(), s22: free[1].exp(), rho: 2.0 / PI * free[2].atan() }
    }

    fn shared_log_jacobian(free: &[f64]) -> f64 {
        free[0] + free[1] + (2.0 / PI).ln() - (1.0 + free[2] * free[2]).ln()
    }

    fn encode_atom(atom: &[f64; 2], out: &mut Vec<f64>) {
        out.extend(atom);
    }

    fn decode_atom(slots: &[f64]) -> [f64; 2] {
        [slots[0], slots[1]]
    }

    fn encode_shared(cov: &Cov2, out: &mut Vec<f64>) {
        out.extend([cov.s11, cov.s22, cov.rho]);
    }

    fn decode_shared(slots: &[f64]) -> Cov2 {
        Cov2 { s11: slots[0], s22: slots[1], rho: slots[2] }
    }
}

fn gamma_draw<G: Rng + ?Sized>(shape: f64, rng: &mut G) -> f64 {
    Gamma::new(shape, 1.0).expect("shape validated by PriorConfig").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn uni(atoms: &[(f64, f64)]) -> SpeciesParams<Univariate> {
        SpeciesParams::new(atoms.iter().map(|&(beta, gamma)| UniAtom { beta, gamma }).collect(), ()).unwrap()
    }

    #[test]
    fn single_atom_peak_is_standard_normal_peak() {
        let p = uni(&[(3.0, 1.0)]);
        assert_abs_diff_eq!(response_xi(&[3.0], &p).unwrap(), 0.398_942_280_401_432_7, epsilon = 1e-15);
    }

    #[test]
    fn tied_atoms_add() {
        let p = uni(&[(3.0, 1.0), (3.0, 1.0)]);
        assert_abs_diff_eq!(response_xi(&[3.0], &p).unwrap(), 2.0 / (2.0 * PI).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn two_atom_value_matches_scalar_evaluation() {
        // 1/(sqrt(2pi)*2) exp(-0.5*(1.19/2)^2) + 1/sqrt(2pi) exp(-0.5*(2.81)^2)
        let expected = 0.174_807_308_160_094_32;
        let p = uni(&[(10.0, 2.0), (14.0, 1.0)]);
        assert_abs_diff_eq!(response_xi(&[11.19], &p).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let p = uni(&[(10.0, 2.0)]);
        assert!(response_xi(&[f64::NAN], &p).is_err());
        let bad = SpeciesParams::<Univariate> { atoms: vec![UniAtom { beta: 0.0, gamma: 0.0 }], shared: () };
        assert!(response_xi(&[0.0], &bad).is_err());
    }

    #[test]
    fn bivariate_bump_independent_case_factorizes() {
        let cov = Cov2 { s11: 2.0, s22: 0.5, rho: 0.0 };
        let v = Bivariate::bump(&[1.0, -1.0], &cov, &[1.5, -0.2]);
        let n1 = (-(0.5f64).powi(2) / (2.0 * 2.0)).exp() / (2.0 * PI * 2.0).sqrt();
        let n2 = (-(0.8f64).powi(2) / (2.0 * 0.5)).exp() / (2.0 * PI * 0.5).sqrt();
        assert_abs_diff_eq!(v, n1 * n2, epsilon = 1e-15);
    }

    #[test]
    fn free_map_round_trips_and_stays_in_range() {
        let cov = Cov2 { s11: 0.7, s22: 3.0, rho: -0.4 };
        let back = Bivariate::shared_from_free(&Bivariate::shared_to_free(&cov));
        assert_abs_diff_eq!(back.s11, cov.s11, epsilon = 1e-14);
        assert_abs_diff_eq!(back.s22, cov.s22, epsilon = 1e-14);
        assert_abs_diff_eq!(back.rho, cov.rho, epsilon = 1e-14);
        assert_eq!(Bivariate::shared_to_free(&Cov2 { s11: 1.0, s22: 1.0, rho: 0.0 })[2], 0.0);
        for t in [-1e6, -3.0, 0.0, 2.5, 1e6] {
            let c = Bivariate::shared_from_free(&[-30.0, 30.0, t]);
            assert!(c.s11 > 0.0 && c.s22 > 0.0 && c.rho.abs() < 1.0);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let free = [0.3, -0.2, 0.9];
        let h = 1e-6;
        let f = |z: f64| 2.0 / PI * z.atan();
        let drho = (f(free[2] + h) - f(free[2] - h)) / (2.0 * h);
        let expected = free[0] + free[1] + drho.ln();
        assert_abs_diff_eq!(Bivariate::shared_log_jacobian(&free), expected, epsilon = 1e-8);
    }
}
