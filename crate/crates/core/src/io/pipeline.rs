//! The five commands of the command-line tool, as library calls writing into
//! an output directory.
//!
//! | command   | reads                          | writes |
//! |-----------|--------------------------------|--------|
//! | synth     | config                         | `counts.csv`, `climate.csv`, `truth_params.csv`, `truth_latent.csv` |
//! | fit       | dataset                        | `chain.bin`, `diagnostics.csv`, `trace.csv` |
//! | crossval  | dataset                        | `cv/site_NNN.csv`, `cv_summary.csv`, `coverage.csv`, `cv_diagnostics.csv` |
//! | adequacy  | dataset, `cv/`                 | `adequacy.csv`, `adequacy_reference.csv` |
//! | predict   | dataset, `chain.bin`           | `predictive.csv` |
//!
//! Every command also writes the resolved configuration to `run.cfg`. The
//! dataset is the one named in the configuration, or the synthetic files in
//! the output directory when none is named. Outputs depend only on the
//! configuration and the seed.

use std::path::{Path, PathBuf};

use crate::adequacy::{adequacy_test, coverage_summary, predictive_band, DensityOptions, Measure, Prepared};
use crate::crossval::{run_loo_sites, CvPosterior};
use crate::error::{Error, Result};
use crate::io::config::RunConfig;
use crate::io::store::{load_chain, peek_dim, save_chain, ChainFile};
use crate::io::synth::generate_synthetic;
use crate::io::tables::{
    climate_names, cv_sample_path, fmt_f64, fmt_segments, load_dataset, read_cv_samples, site_names, species_names,
    summary_rows, write_climate, write_counts, write_cv_samples, write_summary, write_table, Loaded,
};
use crate::model::{joint_log_posterior, Bivariate, Dataset, Response, Univariate};
use crate::par::Execution;
use crate::samplers::{rng_stream, AcceptanceStats, Model, RunSpec, Sampler};

/// File names inside an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
    pub fn counts(&self) -> PathBuf {
        self.file("counts.csv")
    }
    pub fn climate(&self) -> PathBuf {
        self.file("climate.csv")
    }
    pub fn chain(&self) -> PathBuf {
        self.file("chain.bin")
    }
    pub fn cv_samples(&self, site: usize) -> PathBuf {
        cv_sample_path(&self.root, site)
    }
}

fn write_run_cfg(layout: &Layout, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&layout.root)?;
    std::fs::write(layout.file("run.cfg"), cfg.render())?;
    Ok(())
}

fn load(cfg: &RunConfig, layout: &Layout) -> Result<Loaded> {
    let counts = cfg.data.counts.clone().unwrap_or_else(|| layout.counts());
    let climate = cfg.data.climate.clone().unwrap_or_else(|| layout.climate());
    let loaded = load_dataset(&counts, &climate, &cfg.data.load)?;
    if loaded.dataset.dim() != cfg.dim {
        return Err(Error::Config(format!(
            "dataset climate has {} column(s) but the configuration says dim = {}",
            loaded.dataset.dim(),
            cfg.dim
        )));
    }
    Ok(loaded)
}

fn model<'a>(cfg: &'a RunConfig, data: &'a Dataset) -> Model<'a> {
    let m = Model::new(&data.counts, &data.climate, &cfg.prior);
    if cfg.zero_inflation {
        m
    } else {
        m.without_zero_inflation()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthReport {
    pub n_sites: usize,
    pub n_species: usize,
    pub zero_fraction: f64,
}

pub fn synth(cfg: &RunConfig, out: &Path) -> Result<SynthReport> {
    match cfg.dim {
        1 => synth_typed::<Univariate>(cfg, out),
        _ => synth_typed::<Bivariate>(cfg, out),
    }
}

fn synth_typed<R: Response>(cfg: &RunConfig, out: &Path) -> Result<SynthReport> {
    let seed = cfg.require_seed()?;
    let layout = Layout::new(out);
    let truth = generate_synthetic::<R>(&cfg.synth, &cfg.prior, seed)?;
    let (n, m) = (truth.counts.n_sites(), truth.counts.n_species());
    let sites = site_names(n);
    write_run_cfg(&layout, cfg)?;
    write_counts(&layout.counts(), &truth.counts, &sites, &species_names(m))?;
    write_climate(&layout.climate(), &truth.climate, &sites)?;

    let mut header = vec!["species", "atom"];
    header.extend(match R::DIM {
        1 => vec!["beta", "gamma"],
        _ => vec!["beta1", "beta2", "s11", "s22", "rho"],
    });
    let mut rows = Vec::new();
    for (k, p) in truth.theta.iter().enumerate() {
        let mut shared = Vec::new();
        R::encode_shared(&p.shared, &mut shared);
        for (j, a) in p.atoms.iter().enumerate() {
            let mut cells = Vec::new();
            R::encode_atom(a, &mut cells);
            cells.extend(&shared);
            let mut row = vec![k.to_string(), j.to_string()];
            row.extend(cells.into_iter().map(fmt_f64));
            rows.push(row);
        }
    }
    write_table(&layout.file("truth_params.csv"), &header, &rows)?;

    let rows: Vec<Vec<String>> = (0..n * m)
        .map(|j| {
            vec![
                (j / m).to_string(),
                (j % m).to_string(),
                fmt_f64(truth.pi[j]),
                u8::from(truth.z[j]).to_string(),
                fmt_f64(truth.lambda[j]),
            ]
        })
        .collect();
    write_table(&layout.file("truth_latent.csv"), &["site", "species", "pi", "z", "lambda"], &rows)?;
    Ok(SynthReport { n_sites: n, n_species: m, zero_fraction: truth.counts.zero_fraction() })
}

fn acceptance_rows(stats: &AcceptanceStats) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (name, v) in [
        ("lambda", &stats.lambda),
        ("atom-mh", &stats.atom_mh),
        ("atom-block", &stats.atom_block),
        ("sigma", &stats.sigma),
        ("x", &stats.x),
    ] {
        for (i, r) in v.iter().enumerate().filter(|(_, r)| r.proposed > 0) {
            rows.push(vec![
                name.to_string(),
                i.to_string(),
                r.accepted.to_string(),
                r.proposed.to_string(),
                fmt_f64(r.rate().unwrap_or(f64::NAN)),
            ]);
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub draws: usize,
    pub tuned: bool,
    pub acceptance: Vec<(&'static str, f64)>,
}

pub fn fit(cfg: &RunConfig, out: &Path) -> Result<FitReport> {
    match cfg.dim {
        1 => fit_typed::<Univariate>(cfg, out),
        _ => fit_typed::<Bivariate>(cfg, out),
    }
}

fn fit_typed<R: Response>(cfg: &RunConfig, out: &Path) -> Result<FitReport> {
    let seed = cfg.require_seed()?;
    let layout = Layout::new(out);
    let loaded = load(cfg, &layout)?;
    let data = &loaded.dataset;
    let model = model(cfg, data);
    let mut sampler = Sampler::<R>::from_prior(model, None, rng_stream(seed, 0))?;
    let tuned = sampler.tune(cfg.cv.tune)?;
    let store =
        sampler.run(RunSpec { iterations: cfg.fit.iterations, burn_in: cfg.fit.burn_in, thin: cfg.fit.thin })?;
    write_run_cfg(&layout, cfg)?;

    write_table(
        &layout.file("diagnostics.csv"),
        &["block", "index", "accepted", "proposed", "rate"],
        &acceptance_rows(&store.acceptance),
    )?;

    let m = data.n_species();
    let mut header: Vec<String> =
        ["iteration", "log_posterior", "likelihood", "zero_inflation", "lambda_prior", "atom_prior", "shared_prior"]
            .map(String::from)
            .to_vec();
    header.extend((0..m).map(|k| format!("distinct_{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    for d in store.draws.iter().step_by(cfg.fit.trace_thin) {
        let t = joint_log_posterior(&data.counts, &data.climate, &cfg.prior, &d.theta, &d.latent)?;
        let mut row = vec![d.iteration.to_string()];
        row.extend(
            [t.total(), t.likelihood, t.zero_inflation, t.lambda_prior, t.atom_prior, t.shared_prior].map(fmt_f64),
        );
        row.extend(d.theta.iter().map(|p| p.n_distinct().to_string()));
        rows.push(row);
    }
    write_table(&layout.file("trace.csv"), &header, &rows)?;

    let acceptance = store.acceptance.summary().into_iter().filter_map(|(k, r)| Some((k, r.rate()?))).collect();
    let draws = store.draws.len();
    let file = ChainFile {
        n_sites: data.n_sites(),
        n_species: m,
        draws: store.draws,
        acceptance: store.acceptance,
        final_state: Some(sampler.into_state()),
    };
    save_chain(&layout.chain(), &file)?;
    Ok(FitReport { draws, tuned, acceptance })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossvalReport {
    pub anchor: usize,
    pub tuned: bool,
    pub sites: usize,
    /// Coverage fraction per climate coordinate.
    pub coverage: Vec<f64>,
}

/// Runs the cross-validation for every site, or only for `site`.
pub fn crossval(cfg: &RunConfig, out: &Path, site: Option<usize>) -> Result<CrossvalReport> {
    match cfg.dim {
        1 => crossval_typed::<Univariate>(cfg, out, site),
        _ => crossval_typed::<Bivariate>(cfg, out, site),
    }
}

fn crossval_typed<R: Response>(cfg: &RunConfig, out: &Path, site: Option<usize>) -> Result<CrossvalReport> {
    let seed = cfg.require_seed()?;
    let layout = Layout::new(out);
    let loaded = load(cfg, &layout)?;
    let data = &loaded.dataset;
    let sites: Vec<usize> = match site {
        Some(s) => vec![s],
        None => (0..data.n_sites()).collect(),
    };
    let loo = run_loo_sites::<R>(model(cfg, data), &cfg.cv, seed, Execution::from_jobs(cfg.jobs), &sites)?;
    write_run_cfg(&layout, cfg)?;
    for p in &loo.posteriors {
        write_cv_samples(&layout.cv_samples(p.site), p)?;
    }
    write_summary(&layout.file("cv_summary.csv"), &summary_rows(&loo.posteriors, &data.climate))?;

    let observed: Vec<f64> = sites.iter().flat_map(|&i| data.climate.point(i).to_vec()).collect();
    let cov = coverage_summary(&loo.posteriors, &observed, cfg.cv.level, cfg.cv.bins)?;
    let names = climate_names(cfg.dim);
    let rows: Vec<Vec<String>> = cov
        .fraction
        .iter()
        .enumerate()
        .map(|(d, f)| {
            let hit = cov.covered.iter().filter(|c| c[d]).count();
            vec![names[d].clone(), fmt_f64(cov.level), hit.to_string(), sites.len().to_string(), fmt_f64(*f)]
        })
        .collect();
    write_table(&layout.file("coverage.csv"), &["coordinate", "level", "covered", "sites", "fraction"], &rows)?;

    let mut rows = acceptance_rows(&loo.anchor_acceptance);
    rows.iter_mut().for_each(|r| r.insert(0, loo.anchor.to_string()));
    write_table(
        &layout.file("cv_diagnostics.csv"),
        &["anchor", "block", "index", "accepted", "proposed", "rate"],
        &rows,
    )?;
    Ok(CrossvalReport { anchor: loo.anchor, tuned: loo.tuned, sites: sites.len(), coverage: cov.fraction })
}

/// Reads back the cross-validation posteriors of every site.
pub fn load_cv(cfg: &RunConfig, layout: &Layout, n: usize) -> Result<Vec<CvPosterior>> {
    (0..n)
        .map(|i| {
            let path = layout.cv_samples(i);
            if !path.exists() {
                return Err(Error::MissingArtifact(format!(
                    "{} (run `crossval` for every site first)",
                    path.display()
                )));
            }
            let (dim, samples) = read_cv_samples(&path)?;
            if dim != cfg.dim {
                return Err(Error::Data(format!("{}: {dim}-D samples, expected {}-D", path.display(), cfg.dim)));
            }
            CvPosterior::new(i, dim, samples, cfg.cv.level, cfg.cv.bins)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdequacyRow {
    pub measure: Measure,
    pub observed: f64,
    pub accepted: bool,
    pub reference_cdf: f64,
}

/// Adequacy tests for `measures` (all configured measures when empty).
pub fn adequacy(cfg: &RunConfig, out: &Path, measures: &[Measure], level: Option<f64>) -> Result<Vec<AdequacyRow>> {
    let layout = Layout::new(out);
    let loaded = load(cfg, &layout)?;
    let data = &loaded.dataset;
    let cv = load_cv(cfg, &layout, data.n_sites())?;
    let measures = if measures.is_empty() { &cfg.measures[..] } else { measures };
    let level = level.unwrap_or(cfg.adequacy_level);
    let prepared = Prepared::new(&cv, DensityOptions::for_dim(cfg.dim))?;
    let x = data.climate.values();
    write_run_cfg(&layout, cfg)?;

    let mut report = Vec::new();
    let mut rows = Vec::new();
    let mut reference = Vec::new();
    for &m in measures {
        let r = adequacy_test(&prepared, m, &cv, x, level, cfg.cv.bins)?;
        rows.push(vec![
            m.to_string(),
            fmt_f64(r.observed),
            fmt_f64(level),
            fmt_segments(&r.hpd.segments),
            r.accepted.to_string(),
            fmt_f64(r.reference_cdf()),
            r.floored_observed.to_string(),
            r.floored_reference.to_string(),
        ]);
        reference.extend(r.reference.iter().enumerate().map(|(t, v)| vec![m.to_string(), t.to_string(), fmt_f64(*v)]));
        report.push(AdequacyRow {
            measure: m,
            observed: r.observed,
            accepted: r.accepted,
            reference_cdf: r.reference_cdf(),
        });
    }
    write_table(
        &layout.file("adequacy.csv"),
        &["measure", "observed", "level", "hpd", "accepted", "reference_cdf", "floored_observed", "floored_reference"],
        &rows,
    )?;
    write_table(&layout.file("adequacy_reference.csv"), &["measure", "draw", "value"], &reference)?;
    Ok(report)
}

/// Posterior predictive bands for every species at every site (or one site).
pub fn predict(cfg: &RunConfig, out: &Path, site: Option<usize>, level: Option<f64>) -> Result<usize> {
    let layout = Layout::new(out);
    let path = layout.chain();
    if !path.exists() {
        return Err(Error::MissingArtifact(format!("{} (run `fit` first)", path.display())));
    }
    match peek_dim(&path)? {
        1 => predict_typed::<Univariate>(cfg, &layout, site, level),
        2 => predict_typed::<Bivariate>(cfg, &layout, site, level),
        d => Err(Error::Store(format!("unsupported dimension {d}"))),
    }
}

fn predict_typed<R: Response>(
    cfg: &RunConfig,
    layout: &Layout,
    site: Option<usize>,
    level: Option<f64>,
) -> Result<usize> {
    let seed = cfg.require_seed()?;
    let loaded = load(cfg, layout)?;
    let counts = &loaded.dataset.counts;
    let chain = load_chain::<R>(&layout.chain())?;
    if chain.n_sites != counts.n_sites() || chain.n_species != counts.n_species() {
        return Err(Error::Data("chain store and dataset disagree on the number of sites or species".into()));
    }
    if chain.draws.is_empty() {
        return Err(Error::Store("chain store holds no draws".into()));
    }
    if let Some(s) = site.filter(|&s| s >= counts.n_sites()) {
        return Err(Error::InvalidParameter(format!("site {s} out of range")));
    }
    let level = level.unwrap_or(cfg.predict_level);
    let mut rng = rng_stream(seed, u64::MAX);
    let mut rows = Vec::new();
    for k in 0..counts.n_species() {
        let bands = predictive_band(chain.draws.iter().map(|d| &d.latent), counts, k, level, &mut rng)?;
        for b in bands.into_iter().filter(|b| site.is_none_or(|s| s == b.site)) {
            rows.push(vec![
                loaded.species[k].clone(),
                loaded.sites[b.site].clone(),
                b.observed.to_string(),
                b.lower.to_string(),
                b.median.to_string(),
                b.upper.to_string(),
            ]);
        }
    }
    write_run_cfg(layout, cfg)?;
    write_table(&layout.file("predictive.csv"), &["species", "site", "observed", "lower", "median", "upper"], &rows)?;
    Ok(rows.len())
}
