//! Closed-form full conditionals for the zero-inflation flags and their probabilities.

use rand::Rng;
use rand_distr::{Beta, Distribution};

/// `P(z_ik = 1 | rest)` for species `k` of one site.
///
/// A positive count pins the flag to 0, as does a flag that would leave the
/// site with no active category.
pub fn z_one_probability(y: &[u32], z: &[bool], lambda: &[f64], pi: f64, k: usize) -> f64 {
    if y[k] > 0 || pi <= 0.0 {
        return 0.0;
    }
    let others: f64 = (0..y.len()).filter(|&r| r != k && !z[r]).map(|r| lambda[r]).sum();
    if !(others > 0.0) {
        return 0.0;
    }
    if pi >= 1.0 {
        return 1.0;
    }
    let total: u32 = y.iter().sum();
    let log_odds = pi.ln() - (-pi).ln_1p() + f64::from(total) * (lambda[k] / others).ln_1p();
    1.0 / (1.0 + (-log_odds).exp())
}

/// Draws `pi_ik ~ Beta(z + 1, 2 - z)`.
pub fn draw_pi<G: Rng + ?Sized>(z: bool, rng: &mut G) -> f64 {
    let (a, b) = if z { (2.0, 1.0) } else { (1.0, 2.0) };
    Beta::new(a, b).expect("fixed positive parameters").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn positive_count_pins_flag() {
        assert_eq!(z_one_probability(&[5, 1], &[false, false], &[1.0, 1.0], 0.9, 0), 0.0);
    }

    #[test]
    fn zero_other_counts_give_prior_odds() {
        let p = z_one_probability(&[0, 0], &[false, false], &[2.0, 3.0], 0.3, 0);
        assert!((p - 0.3).abs() < 1e-15);
    }

    #[test]
    fn cannot_empty_the_active_set() {
        assert_eq!(z_one_probability(&[0, 3], &[false, false], &[1.0, 1.0], 0.5, 1), 0.0);
        assert_eq!(z_one_probability(&[0, 3], &[false, true], &[1.0, 1.0], 0.5, 0), 0.0);
    }

    #[test]
    fn pi_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        for (z, mean) in [(true, 2.0 / 3.0), (false, 1.0 / 3.0)] {
            let s: f64 = (0..n).map(|_| draw_pi(z, &mut rng)).sum();
            let se = (1.0 / 18.0 / n as f64).sqrt();
            assert!((s / n as f64 - mean).abs() < 3.0 * se);
        }
    }
}
