use rand::Rng;
use rand_distr::{Binomial, Distribution};

/// Draws a count vector with total `y_total` from the zero-inflated
/// multinomial with flags `z` and intensities `lambda`, by sequential
/// conditional binomials over the active categories.
pub fn predictive_abundance_draw<G: Rng + ?Sized>(y_total: u32, z: &[bool], lambda: &[f64], rng: &mut G) -> Vec<u32> {
    let mut out = vec![0u32; z.len()];
    let mut remaining_mass: f64 = z.iter().zip(lambda).filter(|(f, _)| !**f).map(|(_, l)| l).sum();
    let mut left = u64::from(y_total);
    let last = z.iter().rposition(|f| !f);
    for (k, (&zk, &lk)) in z.iter().zip(lambda).enumerate() {
        if zk || left == 0 {
            continue;
        }
        if Some(k) == last {
            out[k] = left as u32;
            break;
        }
        let p = (lk / remaining_mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, p).map(|b| b.sample(rng)).unwrap_or(0);
        out[k] = draw as u32;
        left -= draw;
        remaining_mass -= lk;
    }
    out
}
