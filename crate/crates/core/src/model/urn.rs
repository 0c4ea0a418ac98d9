//! Polya urn representation of the Dirichlet-process prior on atoms.

use rand::Rng;

use super::prior::PriorConfig;
use super::response::{Response, SpeciesParams};

/// Draws the next atom given the `j - 1` atoms already in the urn: a fresh
/// base-measure draw with probability `alpha / (alpha + j - 1)`, otherwise a
/// copy of a uniformly chosen existing atom.
pub fn polya_urn_draw<R: Response, G: Rng + ?Sized>(
    existing: &[R::Atom],
    shared: &R::Shared,
    prior: &PriorConfig,
    rng: &mut G,
) -> R::Atom {
    let prev = existing.len() as f64;
    let u: f64 = rng.random::<f64>() * (prior.alpha + prev);
    if u < prior.alpha || existing.is_empty() {
        R::g0_draw(shared, prior, rng)
    } else {
        let pick = ((u - prior.alpha).floor() as usize).min(existing.len() - 1);
        existing[pick]
    }
}

/// Draws a full set of `M` atoms (and the shared parameters) from the prior.
pub fn draw_species<R: Response, G: Rng + ?Sized>(prior: &PriorConfig, rng: &mut G) -> SpeciesParams<R> {
    let shared = R::shared_draw(prior, rng);
    let mut atoms = Vec::with_capacity(prior.atoms);
    for _ in 0..prior.atoms {
        let a = polya_urn_draw::<R, G>(&atoms, &shared, prior, rng);
        atoms.push(a);
    }
    SpeciesParams { atoms, shared }
}

/// Joint log prior of a species' atom sequence, built from the sequential
/// urn conditionals: a fresh atom contributes `ln(alpha/(alpha+j-1)) + ln G0`,
/// a tie with `c` earlier copies contributes `ln(c/(alpha+j-1))`.
pub fn urn_log_prior<R: Response>(params: &SpeciesParams<R>, prior: &PriorConfig) -> f64 {
    let mut out = 0.0;
    for (j, atom) in params.atoms.iter().enumerate() {
        let denom = (prior.alpha + j as f64).ln();
        let copies = params.atoms[..j].iter().filter(|a| *a == atom).count();
        if copies == 0 {
            out += prior.alpha.ln() - denom + R::g0_log_density(atom, &params.shared, prior);
        } else {
            out += (copies as f64).ln() - denom;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::response::{UniAtom, Univariate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_draw_is_always_fresh() {
        let prior = PriorConfig::chironomid();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a = polya_urn_draw::<Univariate, _>(&[], &(), &prior, &mut rng);
            assert!(a.gamma > 0.0);
        }
    }

    #[test]
    fn tiny_alpha_copies_the_first_atom() {
        let mut prior = PriorConfig::chironomid();
        prior.alpha = 1e-12;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let first = UniAtom { beta: 1.5, gamma: 0.7 };
        for _ in 0..1000 {
            assert_eq!(polya_urn_draw::<Univariate, _>(&[first], &(), &prior, &mut rng), first);
        }
    }

    #[test]
    fn fresh_draw_frequency_at_j_10() {
        let prior = PriorConfig::chironomid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let existing: Vec<UniAtom> = (0..9).map(|j| UniAtom { beta: j as f64, gamma: 1.0 }).collect();
        let reps = 100_000;
        let fresh = (0..reps)
            .filter(|_| !existing.contains(&polya_urn_draw::<Univariate, _>(&existing, &(), &prior, &mut rng)))
            .count();
        let p = 10.0 / 19.0;
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((fresh as f64 / reps as f64 - p).abs() < 3.0 * se);
    }

    #[test]
    fn expected_distinct_atoms() {
        let mut prior = PriorConfig::chironomid();
        prior.atoms = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let reps = 20_000;
        let counts: Vec<f64> =
            (0..reps).map(|_| draw_species::<Univariate, _>(&prior, &mut rng).n_distinct() as f64).collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let expected: f64 = (0..10).map(|j| prior.alpha / (prior.alpha + j as f64)).sum();
        assert!((mean - expected).abs() < 3.0 * (var / reps as f64).sqrt());
    }

    #[test]
    fn urn_prior_of_ties() {
        let prior = PriorConfig::chironomid();
        let a = UniAtom { beta: 11.0, gamma: 3.0 };
        let p = SpeciesParams::<Univariate> { atoms: vec![a, a, a], shared: () };
        let g0 = Univariate::g0_log_density(&a, &(), &prior);
        let alpha: f64 = prior.alpha;
        let expected = g0 + (1.0 / (alpha + 1.0)).ln() + (2.0 / (alpha + 2.0)).ln();
        assert!((urn_log_prior(&p, &prior) - expected).abs() < 1e-12);
    }
}
