//! Forward simulation of datasets from the model.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::model::{
    draw_species, predictive_abundance_draw, ClimateTable, CountMatrix, PriorConfig, Response, SpeciesParams,
    LAMBDA_FLOOR,
};
use crate::samplers::rng_stream;

/// Zero-inflation probabilities of the generated cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PiProfile {
    /// `pi_ik ~ U(0, 1)`.
    Uniform,
    Fixed(f64),
}

/// Site totals `y_i.`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Totals {
    Fixed(u32),
    /// `shift + Poisson(mean)`.
    ShiftedPoisson {
        shift: u32,
        mean: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub m: usize,
    pub pi: PiProfile,
    pub totals: Totals,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth<R: Response> {
    pub theta: Vec<SpeciesParams<R>>,
    pub pi: Vec<f64>,
    pub z: Vec<bool>,
    pub lambda: Vec<f64>,
    pub climate: ClimateTable,
    pub counts: CountMatrix,
}

pub fn generate_synthetic<R: Response>(cfg: &SynthConfig, prior: &PriorConfig, seed: u64) -> Result<SyntheticTruth<R>> {
    prior.validate(R::DIM)?;
    let (n, m) = (cfg.n, cfg.m);
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter("synthetic data needs n, m >= 1".into()));
    }
    match cfg.pi {
        PiProfile::Fixed(p) if !(0.0..1.0).contains(&p) => {
            return Err(Error::InvalidParameter(format!("zero-inflation probability {p} outside [0, 1)")));
        }
        _ => {}
    }
    let mut rng = rng_stream(seed, 0);
    let climate: Vec<f64> = (0..n).flat_map(|_| prior.x_prior.sample(&mut rng)).collect();
    let climate = ClimateTable::new(n, R::DIM, climate)?;
    let theta: Vec<SpeciesParams<R>> = (0..m).map(|_| draw_species::<R, _>(prior, &mut rng)).collect();
    let mut pi = vec![0.0; n * m];
    let mut z = vec![false; n * m];
    let mut lambda = vec![0.0; n * m];
    let mut counts = vec![0u32; n * m];
    for i in 0..n {
        let row = i * m..(i + 1) * m;
        for p in &mut pi[row.clone()] {
            *p = match cfg.pi {
                PiProfile::Uniform => rng.random(),
                PiProfile::Fixed(p) => p,
            };
        }
        loop {
            for (zk, &pk) in z[row.clone()].iter_mut().zip(&pi[row.clone()]) {
                *zk = rng.random::<f64>() < pk;
            }
            if z[row.clone()].iter().any(|f| !f) {
                break;
            }
        }
        let x = climate.point(i);
        for k in 0..m {
            let g = Gamma::new(theta[k].xi(x), prior.psi).expect("positive shape and scale");
            lambda[i * m + k] = g.sample(&mut rng).max(LAMBDA_FLOOR);
        }
        loop {
            let total = match cfg.totals {
                Totals::Fixed(t) => t,
                Totals::ShiftedPoisson { shift, mean } => {
                    let p = Poisson::new(mean).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    shift + p.sample(&mut rng) as u32
                }
            };
            let y = predictive_abundance_draw(total, &z[row.clone()], &lambda[row.clone()], &mut rng);
            if y.iter().any(|&c| c > 0) {
                counts[row.clone()].copy_from_slice(&y);
                break;
            }
        }
    }
    let counts = CountMatrix::new(n, m, counts)?;
    Ok(SyntheticTruth { theta, pi, z, lambda, climate, counts })
}
