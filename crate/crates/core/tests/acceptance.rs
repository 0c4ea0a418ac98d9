//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the verdicts always reach stdout.
//! Pass criterion numbers as arguments to run a subset:
//! `cargo test -p zimcal --test acceptance -- 3 9`.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;
use zimcal::adequacy::{adequacy_test, coverage_summary, hpd_line_pushing, Center, DensityOptions, Measure, Prepared};
use zimcal::crossval::{importance_log_weight, run_loo, CvPosterior, IrmcmcConfig};
use zimcal::io::{generate_synthetic, pipeline, PiProfile, RunConfig, SynthConfig, Totals};
use zimcal::model::{
    draw_species, predictive_abundance_draw, zim_log_pmf, ClimateTable, CountMatrix, LatentState, PriorConfig,
    SpeciesParams, UniAtom, Univariate,
};
use zimcal::par::{map_indexed, Execution};
use zimcal::samplers::{
    pilot_tune, rng_stream, tmcmc_step, tmcmc_step_with, AdditiveMove, ChainState, ChainTuning, Innovation, Model,
    PilotOptions, RunSpec, Sampler, TmcmcConfig, TuneSchedule,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Batch-means standard error of the mean, 50 batches.
fn batch_se(v: &[f64]) -> f64 {
    let b = v.len() / 50;
    let means: Vec<f64> = v.chunks_exact(b).map(|c| c.iter().sum::<f64>() / b as f64).collect();
    (mean_var(&means).1 / means.len() as f64).sqrt()
}

fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut s = 0;
    while s < idx.len() {
        let mut e = s;
        while e + 1 < idx.len() && v[idx[e + 1]] == v[idx[s]] {
            e += 1;
        }
        let avg = (s + e) as f64 / 2.0 + 1.0;
        idx[s..=e].iter().for_each(|&k| r[k] = avg);
        s = e + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let (ma, va) = mean_var(&ra);
    let (mb, vb) = mean_var(&rb);
    let cov = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (ra.len() as f64 - 1.0);
    cov / (va * vb).sqrt()
}

/// 1. The zero-inflated multinomial sums to one over every outcome.
fn pmf_normalization() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for m in 1..=3usize {
        for total in 1..=5u32 {
            for _ in 0..20 {
                let mut z: Vec<bool> = (0..m).map(|_| rng.random_bool(0.4)).collect();
                let keep = rng.random_range(0..m);
                z[keep] = false;
                let lam: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..5.0)).collect();
                let mut sum = 0.0;
                let mut y = vec![0u32; m];
                loop {
                    if y.iter().sum::<u32>() == total {
                        sum += zim_log_pmf(&y, &z, &lam).expect("non-empty active set").exp();
                    }
                    let mut c = 0;
                    while c < m && y[c] == total {
                        y[c] = 0;
                        c += 1;
                    }
                    if c == m {
                        break;
                    }
                    y[c] += 1;
                }
                worst = worst.max((sum - 1.0).abs());
                cases += 1;
            }
        }
    }
    verdict(worst < 1e-10, format!("{cases} cases, max |sum - 1| = {worst:.1e}"))
}

struct GewekeStats([f64; 10]);

fn geweke_stats(theta: &[SpeciesParams<Univariate>], lat: &LatentState, climate: &ClimateTable) -> GewekeStats {
    let cells = lat.pi.len() as f64;
    let mean = |f: &dyn Fn(usize) -> f64| (0..lat.pi.len()).map(f).sum::<f64>() / cells;
    let m = theta.len();
    let xi = mean(&|j| theta[j % m].xi(climate.point(j / m)));
    let atoms: Vec<&UniAtom> = theta.iter().flat_map(|p| p.atoms.iter()).collect();
    let na = atoms.len() as f64;
    let ties = theta.iter().map(|p| (p.atoms.len() - p.n_distinct()) as f64).sum::<f64>() / na;
    GewekeStats([
        mean(&|j| lat.pi[j]),
        mean(&|j| lat.pi[j] * lat.pi[j]),
        mean(&|j| f64::from(u8::from(lat.z[j]))),
        mean(&|j| if lat.z[j] { lat.pi[j] } else { 0.0 }),
        mean(&|j| lat.lambda[j]),
        mean(&|j| lat.lambda[j] / (1.0 + lat.lambda[j])),
        xi,
        atoms.iter().map(|a| a.beta).sum::<f64>() / na,
        atoms.iter().map(|a| a.gamma).sum::<f64>() / na,
        ties,
    ])
}

const GEWEKE_NAMES: [&str; 10] =
    ["pi", "pi^2", "z-rate", "pi*z", "lambda", "lambda/(1+lambda)", "xi", "beta", "gamma", "tie-rate"];

/// 2. Forward prior draws against the successive-conditional chain.
fn geweke() -> Verdict {
    let (n, m, total) = (4, 3, 5u32);
    let mut prior = PriorConfig::chironomid();
    prior.atoms = 2;
    let climate = ClimateTable::from_column(vec![8.0, 10.5, 12.0, 14.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    let forward = |rng: &mut ChaCha8Rng| {
        let theta: Vec<SpeciesParams<Univariate>> = (0..m).map(|_| draw_species(&prior, rng)).collect();
        let (mut z, mut pi, mut lambda, mut y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for i in 0..n {
            // The active set is never empty, so flags are drawn conditionally on that.
            let (zr, pr) = loop {
                let pr: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
                let zr: Vec<bool> = pr.iter().map(|&p| rng.random::<f64>() < p).collect();
                if zr.iter().any(|&f| !f) {
                    break (zr, pr);
                }
            };
            let lr: Vec<f64> = (0..m)
                .map(|k| {
                    let g = Gamma::new(theta[k].xi(climate.point(i)), prior.psi).unwrap();
                    g.sample(rng).max(f64::MIN_POSITIVE)
                })
                .collect();
            y.push(predictive_abundance_draw(total, &zr, &lr, rng));
            z.extend(zr);
            pi.extend(pr);
            lambda.extend(lr);
        }
        (theta, LatentState::new(n, m, z, pi, lambda, None).unwrap(), y)
    };

    let draws = 400_000;
    let mut fwd: Vec<Vec<f64>> = (0..10).map(|_| Vec::with_capacity(draws)).collect();
    for _ in 0..draws {
        let (theta, lat, _) = forward(&mut rng);
        for (s, v) in fwd.iter_mut().zip(geweke_stats(&theta, &lat, &climate).0) {
            s.push(v);
        }
    }

    let (theta, latent, mut y) = forward(&mut rng);
    let mut state = ChainState { theta, latent, iteration: 0, rng: rng_stream(2, 1) };
    let counts = CountMatrix::from_rows(&y).unwrap();
    let mut tuning = ChainTuning::initial(&Model::new(&counts, &climate, &prior), &state);
    tuning.lambda_sd.iter_mut().for_each(|s| *s = 0.1);
    let iters = 1_000_000;
    let mut chain: Vec<Vec<f64>> = (0..10).map(|_| Vec::with_capacity(iters)).collect();
    for _ in 0..iters {
        let counts = CountMatrix::from_rows(&y).unwrap();
        let model = Model::new(&counts, &climate, &prior);
        let mut s = Sampler::new(model, state, tuning.clone()).unwrap();
        s.sweep().unwrap();
        state = s.into_state();
        for (s, v) in chain.iter_mut().zip(geweke_stats(&state.theta, &state.latent, &climate).0) {
            s.push(v);
        }
        let lat = &state.latent;
        y = (0..n).map(|i| predictive_abundance_draw(total, lat.z_row(i), lat.lambda_row(i), &mut rng)).collect();
    }

    let mut worst = (0.0f64, "");
    for (k, name) in GEWEKE_NAMES.iter().enumerate() {
        let (mf, vf) = mean_var(&fwd[k]);
        let mc = mean_var(&chain[k]).0;
        let se = (vf / draws as f64 + batch_se(&chain[k]).powi(2)).sqrt();
        let z = (mf - mc).abs() / se;
        if z > worst.0 {
            worst = (z, name);
        }
    }
    verdict(worst.0 < 3.0, format!("10 statistics, largest gap {:.2} MCSE ({})", worst.0, worst.1))
}

/// 3. Additive TMCMC in one dimension against a hand-written random walk.
fn lockstep() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let target = |v: &[f64]| -0.5 * v[0] * v[0];
    let a = 2.4;
    let (mut t, mut t_lp) = (vec![0.7], target(&[0.7]));
    let mut r = 0.7f64;
    let mut mismatches = 0;
    let mut accepted = 0;
    let steps = 10_000;
    for _ in 0..steps {
        let mv = AdditiveMove::draw(1, &Innovation::default(), &mut rng);
        let log_u = rng.random::<f64>().ln();
        let ok_t = tmcmc_step_with(&mut t, &mut t_lp, &[a], &mv, log_u, target);
        let step = if mv.signs[0] { mv.eta } else { -mv.eta };
        let prop = r + a * step;
        let ok_r = log_u < -0.5 * prop * prop + 0.5 * r * r;
        if ok_r {
            r = prop;
        }
        mismatches += usize::from(ok_t != ok_r || t[0] != r);
        accepted += usize::from(ok_t);
    }
    verdict(mismatches == 0, format!("{steps} steps, {mismatches} mismatches, {accepted} acceptances"))
}

fn normal_acceptance(cfg: &TmcmcConfig, steps: usize, seed: u64) -> f64 {
    let target = |v: &[f64]| -0.5 * v.iter().map(|x| x * x).sum::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..cfg.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut lp = target(&x);
    (0..steps).filter(|_| tmcmc_step(&mut x, &mut lp, cfg, target, &mut rng)).count() as f64 / steps as f64
}

/// 4. Pilot tuning on a 10-dimensional standard normal.
fn optimal_scaling() -> Verdict {
    let mut detail = Vec::new();
    let mut pass = true;
    for (target, lo, hi) in [(0.439, 0.39, 0.49), (0.234, 0.184, 0.284)] {
        let start = TmcmcConfig::uniform(10, 10.0).unwrap().with_target(target).unwrap();
        let mut round = 0;
        let out = pilot_tune(
            |c| {
                round += 1;
                normal_acceptance(c, 5_000, 40 + round)
            },
            &start,
            PilotOptions::default(),
        );
        let measured = normal_acceptance(&out.config, 50_000, 99);
        pass &= (lo..=hi).contains(&measured);
        detail.push(format!(
            "target {target}: {} rounds, a = {:.3}, measured {measured:.3}",
            out.rounds, out.config.scales[0]
        ));
    }
    verdict(pass, detail.join("; "))
}

/// 5. IRMCMC cross-validation posteriors against direct leave-one-out chains.
fn irmcmc_vs_direct() -> Verdict {
    let seed = 1;
    let mut prior = PriorConfig::chironomid();
    prior.atoms = 3;
    let synth = SynthConfig { n: 10, m: 5, pi: PiProfile::Uniform, totals: Totals::Fixed(100) };
    let truth = generate_synthetic::<Univariate>(&synth, &prior, seed).unwrap();
    let model = Model::new(&truth.counts, &truth.climate, &prior);
    let cfg = IrmcmcConfig { stored: 5_000, burn_in: 5_000, thin: 4, resample: 200, inner: 250, ..Default::default() };
    let loo = run_loo::<Univariate>(model, &cfg, seed, Execution::Parallel).unwrap();
    let direct: Vec<Vec<f64>> = map_indexed(10, Execution::Parallel, |i| {
        let mut s = Sampler::<Univariate>::from_prior(model, Some(i), rng_stream(seed + 100, i as u64)).unwrap();
        s.tune(TuneSchedule::default()).unwrap();
        let store = s.run(RunSpec { iterations: 205_000, burn_in: 5_000, thin: 10 }).unwrap();
        store.draws.iter().map(|d| d.latent.heldout.as_ref().unwrap().x[0]).collect()
    });
    let ks: Vec<f64> = (0..10).map(|i| ks_distance(&loo.posteriors[i].coordinate(0), &direct[i])).collect();
    let good = ks.iter().filter(|&&d| d < 0.1).count();
    let list: Vec<String> = ks.iter().map(|d| format!("{d:.3}")).collect();
    verdict(good >= 9, format!("{good}/10 folds with KS < 0.1 [{}]", list.join(" ")))
}

fn gamma_density(l: f64, shape: f64, psi: f64) -> f64 {
    l.powf(shape - 1.0) * (-l / psi).exp() / (psi.powf(shape) * ln_gamma(shape).exp())
}

/// 6. Importance weights: identity at the anchor and the closed form elsewhere.
fn weight_identities() -> Verdict {
    let atoms = |v: &[(f64, f64)]| {
        SpeciesParams::<Univariate>::new(v.iter().map(|&(beta, gamma)| UniAtom { beta, gamma }).collect(), ()).unwrap()
    };
    let theta = vec![atoms(&[(10.0, 2.0), (14.0, 1.0)]), atoms(&[(12.0, 3.0), (12.0, 3.0)])];
    let climate = ClimateTable::from_column(vec![9.0, 11.5, 13.0]).unwrap();
    let lam = vec![0.3, 0.12, 0.05, 0.4, 0.2, 0.22];
    let latent = LatentState::new(3, 2, vec![false; 6], vec![0.5; 6], lam.clone(), None).unwrap();
    let (site, anchor, psi) = (0, 1, 1.0);
    let mut worst = 0.0f64;
    for x in [8.0, 11.5, 12.7, 16.0] {
        let mut want = 1.0;
        for (k, p) in theta.iter().enumerate() {
            let xi = |v: f64| p.xi(&[v]);
            want *= gamma_density(lam[site * 2 + k], xi(x), psi) * gamma_density(lam[anchor * 2 + k], xi(11.5), psi)
                / (gamma_density(lam[site * 2 + k], xi(9.0), psi) * gamma_density(lam[anchor * 2 + k], xi(x), psi));
        }
        let got = importance_log_weight(&theta, &latent, &[x], site, anchor, &climate, psi).exp();
        worst = worst.max((got / want - 1.0).abs());
    }
    // With x equal to the held-out site's own climate only the anchor row remains.
    let mut anchor_only = 1.0;
    for (k, p) in theta.iter().enumerate() {
        anchor_only *= gamma_density(lam[anchor * 2 + k], p.xi(&[11.5]), psi)
            / gamma_density(lam[anchor * 2 + k], p.xi(&[9.0]), psi);
    }
    let got = importance_log_weight(&theta, &latent, &[9.0], site, anchor, &climate, psi).exp();
    worst = worst.max((got / anchor_only - 1.0).abs());

    let counts = CountMatrix::from_rows(&[vec![3, 1], vec![0, 5], vec![2, 2]]).unwrap();
    let mut prior = PriorConfig::chironomid();
    prior.atoms = 2;
    let model = Model::new(&counts, &climate, &prior);
    let mut s = Sampler::<Univariate>::from_prior(model, Some(anchor), rng_stream(6, 0)).unwrap();
    let store = s.run(RunSpec { iterations: 500, burn_in: 100, thin: 1 }).unwrap();
    let unit = store.draws.iter().all(|d| {
        let x = &d.latent.heldout.as_ref().unwrap().x;
        importance_log_weight(&d.theta, &d.latent, x, anchor, anchor, &climate, psi).exp() == 1.0
    });
    verdict(
        unit && worst < 1e-12,
        format!("anchor weight exactly 1 on {} draws: {unit}; max relative error {worst:.1e}", store.draws.len()),
    )
}

fn desk_config(overrides: &[(&str, &str)]) -> RunConfig {
    let o: Vec<(String, String)> = overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    RunConfig::resolve(Some("desk-chironomid"), None, &o).unwrap()
}

/// 7. Coverage of observed climates by 95% cross-validation HPD regions.
fn calibration() -> Verdict {
    let cfg = desk_config(&[("synth.n", "50"), ("synth.m", "10")]);
    let seed = 7;
    let truth = generate_synthetic::<Univariate>(&cfg.synth, &cfg.prior, seed).unwrap();
    let model = Model::new(&truth.counts, &truth.climate, &cfg.prior);
    let loo = run_loo::<Univariate>(model, &cfg.cv, seed, Execution::Parallel).unwrap();
    let cov = coverage_summary(&loo.posteriors, truth.climate.values(), 0.95, cfg.cv.bins).unwrap();
    let hits = cov.covered.iter().filter(|c| c[0]).count();
    verdict(hits >= 44, format!("{hits}/50 observed climates inside their 95% HPD regions"))
}

struct Replicate {
    t1: bool,
    t2: bool,
    rank_corr: f64,
    zero_fraction: f64,
}

fn replicate(seed: u64, misspecified: bool) -> Replicate {
    let mut cfg = desk_config(&[]);
    if misspecified {
        cfg.synth.pi = PiProfile::Fixed(0.35);
    }
    let truth = generate_synthetic::<Univariate>(&cfg.synth, &cfg.prior, seed).unwrap();
    let mut model = Model::new(&truth.counts, &truth.climate, &cfg.prior);
    if misspecified {
        model = model.without_zero_inflation();
    }
    let loo = run_loo::<Univariate>(model, &cfg.cv, seed, Execution::Parallel).unwrap();
    let cv: &[CvPosterior] = &loo.posteriors;
    let prepared = Prepared::new(cv, DensityOptions::for_dim(1)).unwrap();
    let x = truth.climate.values();
    let test = |m: Measure| adequacy_test(&prepared, m, cv, x, 0.95, cfg.cv.bins).unwrap();
    let t1 = test(Measure::T1(Center::Mode));
    let t2 = test(Measure::T2);
    let rank_corr = if misspecified {
        f64::NAN
    } else {
        spearman(&test(Measure::T1(Center::Median)).reference, &test(Measure::D1Star).reference)
    };
    Replicate { t1: t1.accepted, t2: t2.accepted, rank_corr, zero_fraction: truth.counts.zero_fraction() }
}

/// 8 and 10 share the replicate pipelines.
fn adequacy_replicates() -> (Verdict, Verdict) {
    let good: Vec<Replicate> = (0..20).map(|r| replicate(800 + r, false)).collect();
    let bad: Vec<Replicate> = (0..20).map(|r| replicate(900 + r, true)).collect();
    let accepted = good.iter().filter(|r| r.t1 && r.t2).count();
    let rejected = bad.iter().filter(|r| !(r.t1 && r.t2)).count();
    let count = |v: &[Replicate], f: fn(&Replicate) -> bool| v.iter().filter(|r| f(r)).count();
    let zf = bad.iter().map(|r| r.zero_fraction).sum::<f64>() / bad.len() as f64;
    let c8 = verdict(
        accepted >= 18 && rejected >= 15,
        format!(
            "well-specified accepted {accepted}/20 (T1 {}, T2 {}); zero inflation off on {:.0}%-zero data rejected {rejected}/20 (T1 {}, T2 {})",
            count(&good, |r| r.t1),
            count(&good, |r| r.t2),
            100.0 * zf,
            20 - count(&bad, |r| r.t1),
            20 - count(&bad, |r| r.t2),
        ),
    );
    let mut rho: Vec<f64> = good.iter().map(|r| r.rank_corr).collect();
    rho.sort_by(f64::total_cmp);
    let median = 0.5 * (rho[9] + rho[10]);
    let c10 = verdict(
        median > 0.8,
        format!("Spearman(D1*, T1) over 20 replicates: median {median:.3}, min {:.3}, max {:.3}", rho[0], rho[19]),
    );
    (c8, c10)
}

/// 9. Line-pushing HPD regions.
fn hpd_checks() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let normal: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let r = hpd_line_pushing(&normal, 0.95, None).unwrap();
    let one = r.segments.len() == 1 && (r.segments[0].0 + 1.96).abs() < 0.05 && (r.segments[0].1 - 1.96).abs() < 0.05;
    let mixture: Vec<f64> = (0..100_000)
        .map(|j| {
            let e: f64 = StandardNormal.sample(&mut rng);
            if j % 2 == 0 {
                e - 10.0
            } else {
                e + 10.0
            }
        })
        .collect();
    let b = hpd_line_pushing(&mixture, 0.95, None).unwrap();
    let two = b.segments.len() == 2 && !b.contains(0.0);
    verdict(
        one && two,
        format!(
            "normal: {:?}; mixture: {} segments {:?}",
            r.segments.iter().map(|s| (round3(s.0), round3(s.1))).collect::<Vec<_>>(),
            b.segments.len(),
            b.segments.iter().map(|s| (round3(s.0), round3(s.1))).collect::<Vec<_>>()
        ),
    )
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// 11. Two pipeline runs with the same seed write identical bytes.
fn determinism() -> Verdict {
    let cfg = desk_config(&[("seed", "11")]);
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        pipeline::synth(&cfg, dir.path()).unwrap();
        pipeline::crossval(&cfg, dir.path(), None).unwrap();
        pipeline::adequacy(&cfg, dir.path(), &[], None).unwrap();
        let files = tree_bytes(dir.path());
        (files, dir)
    };
    let (a, _da) = run();
    let (b, _db) = run();
    let same = a == b;
    verdict(same && a.len() >= 20, format!("{} files compared, identical: {same}", a.len()))
}

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let on = |c: usize| wanted.is_empty() || wanted.contains(&c);
    let mut lines: Vec<(usize, &str, Verdict, Duration, Option<Duration>)> = Vec::new();
    let mut timed = |c: usize, name: &'static str, limit: Option<u64>, f: &dyn Fn() -> Verdict| {
        if on(c) {
            let t = Instant::now();
            let v = f();
            let line = (c, name, v, t.elapsed(), limit.map(Duration::from_secs));
            print_line(&line);
            lines.push(line);
        }
    };
    timed(1, "zero-inflated multinomial sums to one", Some(1), &pmf_normalization);
    timed(2, "Geweke joint-distribution test", Some(120), &geweke);
    timed(3, "TMCMC and random-walk lockstep", None, &lockstep);
    timed(4, "pilot tuning reaches optimal acceptance", Some(60), &optimal_scaling);
    timed(5, "IRMCMC against direct leave-one-out chains", Some(900), &irmcmc_vs_direct);
    timed(6, "importance weight identities", None, &weight_identities);
    timed(7, "calibration of 95% regions, n = 50", Some(1800), &calibration);
    timed(9, "HPD line pushing", None, &hpd_checks);
    timed(11, "byte-identical pipeline reruns", None, &determinism);
    if on(8) || on(10) {
        let t = Instant::now();
        let (c8, c10) = adequacy_replicates();
        let el = t.elapsed();
        for line in [(8, "adequacy test calibration", c8, el, None), (10, "D1* and T1 rank agreement", c10, el, None)] {
            if on(line.0) {
                print_line(&line);
                lines.push(line);
            }
        }
    }
    let failed = lines.iter().filter(|l| !passed(l)).count();
    println!("acceptance: {} passed, {failed} failed", lines.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn passed(l: &(usize, &str, Verdict, Duration, Option<Duration>)) -> bool {
    l.2.pass && l.4.is_none_or(|lim| l.3 <= lim)
}

fn print_line(l: &(usize, &str, Verdict, Duration, Option<Duration>)) {
    let limit = l.4.map(|d| format!(" (limit {} s)", d.as_secs())).unwrap_or_default();
    println!(
        "{} [{:>2}] {}: {} [{:.1} s{limit}]",
        if passed(l) { "PASS" } else { "FAIL" },
        l.0,
        l.1,
        l.2.detail,
        l.3.as_secs_f64()
    );
}
