//! Log-space building blocks of the likelihood and priors.

use statrs::function::gamma::ln_gamma as statrs_ln_gamma;

use crate::error::{Error, Result};

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    statrs_ln_gamma(x)
}

/// `ln Gamma(lambda; shape, scale psi)`, i.e. mean `shape * psi`.
#[inline]
pub fn gamma_log_density(lambda: f64, shape: f64, psi: f64) -> f64 {
    if !(lambda > 0.0) {
        return f64::NEG_INFINITY;
    }
    (shape - 1.0) * lambda.ln() - lambda / psi - shape * psi.ln() - ln_gamma(shape)
}

/// Smallest stored intensity. Gamma draws below it are stored as this value
/// and stand for the event `lambda <= LAMBDA_FLOOR`.
pub const LAMBDA_FLOOR: f64 = f64::MIN_POSITIVE;

/// Log prior of a stored intensity under `Gamma(shape, psi)`: the density
/// above the floor, and at the floor the log probability of the censored
/// event, `shape * ln(floor / psi) - ln Gamma(shape + 1)`.
#[inline]
pub fn lambda_log_prior(lambda: f64, shape: f64, psi: f64) -> f64 {
    if lambda == LAMBDA_FLOOR {
        shape * (LAMBDA_FLOOR / psi).ln() - ln_gamma(shape + 1.0)
    } else if lambda > LAMBDA_FLOOR {
        gamma_log_density(lambda, shape, psi)
    } else {
        f64::NEG_INFINITY
    }
}

/// Inverse-gamma log density with shape `a` and scale `b`.
#[inline]
pub fn log_inv_gamma(s: f64, a: f64, b: f64) -> f64 {
    if !(s > 0.0) {
        return f64::NEG_INFINITY;
    }
    a * b.ln() - ln_gamma(a) - (a + 1.0) * s.ln() - b / s
}

#[inline]
pub fn bernoulli_log_mass(z: bool, pi: f64) -> f64 {
    if z {
        pi.ln()
    } else {
        (1.0 - pi).ln()
    }
}

/// Log of the zero-inflated multinomial mass of one site's counts: a
/// multinomial over the categories with `z = false`, with probabilities
/// proportional to their intensities.
pub fn zim_log_pmf(y: &[u32], z: &[bool], lambda: &[f64]) -> Result<f64> {
    if y.len() != z.len() || y.len() != lambda.len() {
        return Err(Error::InvalidParameter("row lengths differ".into()));
    }
    let mut total = 0.0;
    let mut any_active = false;
    for ((&yk, &zk), &lk) in y.iter().zip(z).zip(lambda) {
        if zk {
            if yk > 0 {
                return Ok(f64::NEG_INFINITY);
            }
        } else {
            any_active = true;
            total += lk;
        }
    }
    if !any_active {
        return Err(Error::Structural("no active category in zero-inflated multinomial row".into()));
    }
    Ok(zim_log_pmf_active(y, z, lambda, total))
}

/// Unchecked kernel of [`zim_log_pmf`] given the active intensity total.
pub(crate) fn zim_log_pmf_active(y: &[u32], z: &[bool], lambda: &[f64], active_total: f64) -> f64 {
    let y_total: u32 = y.iter().sum();
    let ln_total = active_total.ln();
    let mut out = ln_gamma(f64::from(y_total) + 1.0);
    for ((&yk, &zk), &lk) in y.iter().zip(z).zip(lambda) {
        if !zk && yk > 0 {
            let yk = f64::from(yk);
            out += yk * (lk.ln() - ln_total) - ln_gamma(yk + 1.0);
        }
    }
    out
}
