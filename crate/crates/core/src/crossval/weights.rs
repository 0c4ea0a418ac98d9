use rand::Rng;

use crate::error::{Error, Result};
use crate::model::density::lambda_log_prior;
use crate::model::{ClimateTable, LatentState, Response, SpeciesParams};

/// Log importance weight moving an anchor-chain draw to the leave-one-out
/// posterior of `site`.
///
/// Under the anchor posterior, site `anchor` sits at the sampled climate `x`
/// and `site` at its observed value; under the target the roles swap. Only
/// the intensity priors of those two sites change, so the counts never enter.
pub fn importance_log_weight<R: Response>(
    theta: &[SpeciesParams<R>],
    latent: &LatentState,
    x: &[f64],
    site: usize,
    anchor: usize,
    climate: &ClimateTable,
    psi: f64,
) -> f64 {
    if site == anchor {
        return 0.0;
    }
    let (x_site, x_anchor) = (climate.point(site), climate.point(anchor));
    let (lam_site, lam_anchor) = (latent.lambda_row(site), latent.lambda_row(anchor));
    let mut out = 0.0;
    for (k, p) in theta.iter().enumerate() {
        let xi_x = p.xi(x);
        out += lambda_log_prior(lam_site[k], xi_x, psi) + lambda_log_prior(lam_anchor[k], p.xi(x_anchor), psi)
            - lambda_log_prior(lam_site[k], p.xi(x_site), psi)
            - lambda_log_prior(lam_anchor[k], xi_x, psi);
    }
    if out.is_nan() {
        f64::NEG_INFINITY
    } else {
        out
    }
}

/// Successive weighted sampling without replacement of `k1` indices.
///
/// Implemented as an exponential race: index `j` arrives at time `E_j / w_j`
/// with `E_j ~ Exp(1)`, and the first `k1` arrivals are returned in order.
/// This has the same law as draw, remove, renormalize, repeat.
pub fn resample_without_replacement<G: Rng + ?Sized>(
    log_weights: &[f64],
    k1: usize,
    site: usize,
    rng: &mut G,
) -> Result<Vec<usize>> {
    let mut keys: Vec<(f64, usize)> = log_weights
        .iter()
        .enumerate()
        .map(|(j, &lw)| {
            let e: f64 = -(1.0 - rng.random::<f64>()).ln();
            (e.ln() - lw, j)
        })
        .filter(|(key, _)| !key.is_nan() && *key < f64::INFINITY)
        .collect();
    if keys.len() < k1 {
        return Err(Error::InsufficientWeights { site, finite: keys.len(), needed: k1 });
    }
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(keys.into_iter().take(k1).map(|(_, j)| j).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dominant_weight_drawn_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lw = [f64::NEG_INFINITY, 0.0, f64::INFINITY, 1.0, f64::NEG_INFINITY];
        for _ in 0..100 {
            let got = resample_without_replacement(&lw, 2, 0, &mut rng).unwrap();
            assert_eq!(got[0], 2);
        }
    }

    #[test]
    fn too_few_finite_weights_names_site() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lw = [0.0, f64::NEG_INFINITY, f64::NAN];
        match resample_without_replacement(&lw, 2, 7, &mut rng) {
            Err(Error::InsufficientWeights { site: 7, finite: 1, needed: 2 }) => {}
            other => panic!("{other:?}"),
        }
    }
}
