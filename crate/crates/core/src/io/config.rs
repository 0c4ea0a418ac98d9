//! Run configuration: a flat `key = value` file with named presets.
//!
//! Resolution order: built-in defaults, then a preset, then the keys of a
//! config file, then command-line overrides. [`RunConfig::render`] writes every
//! key, so a rendered file reproduces the run on its own.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::adequacy::Measure;
use crate::crossval::IrmcmcConfig;
use crate::error::{Error, Result};
use crate::io::synth::{PiProfile, SynthConfig, Totals};
use crate::io::tables::LoadOptions;
use crate::model::{PriorConfig, XPrior};

pub const PRESETS: [&str; 4] = ["chironomid", "pollen", "desk-chironomid", "synthetic-10"];

/// Length of the full-model chain run by `fit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Every `trace_thin`-th stored draw goes to the trace file.
    pub trace_thin: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataConfig {
    /// Defaults to the synthetic output in the run directory.
    pub counts: Option<PathBuf>,
    pub climate: Option<PathBuf>,
    pub load: LoadOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    /// Master seed; required by every command that draws random numbers.
    pub seed: Option<u64>,
    pub dim: usize,
    pub prior: PriorConfig,
    pub zero_inflation: bool,
    pub synth: SynthConfig,
    pub fit: FitConfig,
    pub cv: IrmcmcConfig,
    pub data: DataConfig,
    pub measures: Vec<Measure>,
    pub adequacy_level: f64,
    pub predict_level: f64,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset("chironomid").expect("built-in preset")
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| cfg_err(format!("{key}: cannot parse '{v}'")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse(key, s.trim())).collect()
}

fn pair(key: &str, v: &str) -> Result<[f64; 2]> {
    let l = parse_list(key, v)?;
    <[f64; 2]>::try_from(l).map_err(|_| cfg_err(format!("{key}: expected two comma-separated values")))
}

fn auto<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v == "auto" {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

fn names(v: &str) -> Option<Vec<String>> {
    (v != "all").then(|| v.split(',').map(|s| s.trim().to_string()).collect())
}

fn fmt_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".into(), ToString::to_string)
}

fn fmt_names(v: &Option<Vec<String>>) -> String {
    v.as_ref().map_or_else(|| "all".into(), |l| l.join(","))
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let mut c = Self {
            preset: Some(name.to_string()),
            seed: None,
            dim: 1,
            prior: PriorConfig::chironomid(),
            zero_inflation: true,
            synth: SynthConfig { n: 62, m: 52, pi: PiProfile::Uniform, totals: Totals::Fixed(100) },
            fit: FitConfig { iterations: 30_000, burn_in: 20_000, thin: 10, trace_thin: 1 },
            cv: IrmcmcConfig::default(),
            data: DataConfig::default(),
            measures: vec![Measure::T1(crate::adequacy::Center::Mode), Measure::T2],
            adequacy_level: 0.95,
            predict_level: 0.95,
            jobs: None,
        };
        match name {
            "chironomid" => {}
            "pollen" => {
                c.dim = 2;
                c.prior = PriorConfig::pollen();
                c.synth = SynthConfig { n: 100, m: 14, pi: PiProfile::Uniform, totals: Totals::Fixed(400) };
                c.cv.stored = 20_000;
                c.cv.burn_in = 10_000;
                c.cv.inner = 100;
                c.data.load.standardize = true;
            }
            "desk-chironomid" => {
                c.prior.atoms = 3;
                c.synth = SynthConfig { n: 20, m: 10, pi: PiProfile::Uniform, totals: Totals::Fixed(100) };
                c.fit = FitConfig { iterations: 6_000, burn_in: 2_000, thin: 4, trace_thin: 1 };
                c.cv.stored = 2_000;
                c.cv.burn_in = 2_000;
                c.cv.thin = 2;
                c.cv.inner = 50;
            }
            "synthetic-10" => {
                c.prior.atoms = 3;
                c.synth = SynthConfig { n: 10, m: 5, pi: PiProfile::Uniform, totals: Totals::Fixed(100) };
                c.fit = FitConfig { iterations: 6_000, burn_in: 2_000, thin: 4, trace_thin: 1 };
                c.cv.stored = 5_000;
                c.cv.burn_in = 5_000;
                c.cv.thin = 4;
                c.cv.inner = 250;
            }
            other => return Err(cfg_err(format!("unknown preset '{other}' (known: {})", PRESETS.join(", ")))),
        }
        Ok(c)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "preset" => *self = Self { seed: self.seed, jobs: self.jobs, ..Self::preset(v)? },
            "seed" => self.seed = if v.is_empty() { None } else { Some(parse(key, v)?) },
            "jobs" => self.jobs = auto(key, v)?,
            "dim" => {
                self.dim = parse(key, v)?;
                if !(1..=2).contains(&self.dim) {
                    return Err(cfg_err("dim must be 1 or 2"));
                }
            }
            "zero_inflation" => self.zero_inflation = parse(key, v)?,
            "prior.alpha" => self.prior.alpha = parse(key, v)?,
            "prior.psi" => self.prior.psi = parse(key, v)?,
            "prior.atoms" => self.prior.atoms = parse(key, v)?,
            "prior.uni.mu_beta" => self.prior.g0_uni.mu_beta = parse(key, v)?,
            "prior.uni.a" => self.prior.g0_uni.a = parse(key, v)?,
            "prior.uni.b" => self.prior.g0_uni.b = parse(key, v)?,
            "prior.bi.mu_beta" => self.prior.g0_bi.mu_beta = pair(key, v)?,
            "prior.bi.a" => self.prior.g0_bi.a = pair(key, v)?,
            "prior.bi.b" => self.prior.g0_bi.b = pair(key, v)?,
            "x_prior.mean" => {
                let l = parse_list(key, v)?;
                self.prior.x_prior = match (l.as_slice(), &self.prior.x_prior) {
                    ([m], XPrior::Uni { var, .. }) => XPrior::Uni { mean: *m, var: *var },
                    ([m], XPrior::Bi { var, .. }) => XPrior::Uni { mean: *m, var: var[0] },
                    ([a, b], XPrior::Bi { var, cov, .. }) => XPrior::Bi { mean: [*a, *b], var: *var, cov: *cov },
                    ([a, b], XPrior::Uni { var, .. }) => XPrior::Bi { mean: [*a, *b], var: [*var, *var], cov: 0.0 },
                    _ => return Err(cfg_err(format!("{key}: expected one or two values"))),
                };
            }
            "x_prior.var" => {
                let l = parse_list(key, v)?;
                match (&mut self.prior.x_prior, l.as_slice()) {
                    (XPrior::Uni { var, .. }, [s]) => *var = *s,
                    (XPrior::Bi { var, .. }, [a, b]) => *var = [*a, *b],
                    _ => return Err(cfg_err(format!("{key}: value count does not match x_prior.mean"))),
                }
            }
            "x_prior.cov" => match &mut self.prior.x_prior {
                XPrior::Bi { cov, .. } => *cov = parse(key, v)?,
                XPrior::Uni { .. } => return Err(cfg_err("x_prior.cov needs a two-value x_prior.mean")),
            },
            "synth.n" => self.synth.n = parse(key, v)?,
            "synth.m" => self.synth.m = parse(key, v)?,
            "synth.pi" => {
                self.synth.pi = if v == "uniform" { PiProfile::Uniform } else { PiProfile::Fixed(parse(key, v)?) }
            }
            "synth.totals" => {
                self.synth.totals = match v.strip_prefix("poisson:") {
                    Some(rest) => {
                        let (s, m) =
                            rest.split_once(':').ok_or_else(|| cfg_err("synth.totals: use poisson:SHIFT:MEAN"))?;
                        Totals::ShiftedPoisson { shift: parse(key, s)?, mean: parse(key, m)? }
                    }
                    None => Totals::Fixed(parse(key, v)?),
                }
            }
            "fit.iterations" => self.fit.iterations = parse(key, v)?,
            "fit.burn_in" => self.fit.burn_in = parse(key, v)?,
            "fit.thin" => self.fit.thin = parse(key, v)?,
            "fit.trace_thin" => self.fit.trace_thin = parse(key, v)?,
            "cv.stored" => self.cv.stored = parse(key, v)?,
            "cv.burn_in" => self.cv.burn_in = parse(key, v)?,
            "cv.thin" => self.cv.thin = parse(key, v)?,
            "cv.k1" => self.cv.resample = parse(key, v)?,
            "cv.k2" => self.cv.inner = parse(key, v)?,
            "cv.anchor" => self.cv.anchor_override = auto(key, v)?,
            "cv.level" => self.cv.level = parse(key, v)?,
            "cv.bins" => self.cv.bins = auto(key, v)?,
            "tune.rounds" => self.cv.tune.rounds = parse(key, v)?,
            "tune.sweeps" => self.cv.tune.sweeps_per_round = parse(key, v)?,
            "tune.band" => self.cv.tune.band = parse(key, v)?,
            "data.counts" => self.data.counts = (v != "auto").then(|| PathBuf::from(v)),
            "data.climate" => self.data.climate = (v != "auto").then(|| PathBuf::from(v)),
            "data.site_column" => self.data.load.site_column = v.to_string(),
            "data.species" => self.data.load.species = names(v),
            "data.climate_columns" => self.data.load.climate = names(v),
            "data.standardize" => self.data.load.standardize = parse(key, v)?,
            "adequacy.measures" => {
                self.measures = v.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?;
            }
            "adequacy.level" => self.adequacy_level = parse(key, v)?,
            "predict.level" => self.predict_level = parse(key, v)?,
            other => return Err(cfg_err(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parses config text on top of `self`. A `preset` line, if any, must come
    /// before the keys it is meant to be overridden by.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| cfg_err(format!("line {}: expected key = value", no + 1)))?;
            self.set(k, v)
                .map_err(|e| cfg_err(format!("line {}: {}", no + 1, e.to_string().trim_start_matches("config: "))))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate(self.dim)?;
        if self.fit.thin == 0 || self.fit.trace_thin == 0 || self.fit.iterations < self.fit.burn_in {
            return Err(cfg_err("fit needs thin, trace_thin >= 1 and iterations >= burn_in"));
        }
        for (name, l) in [("adequacy.level", self.adequacy_level), ("predict.level", self.predict_level)] {
            if !(l > 0.0 && l < 1.0) {
                return Err(cfg_err(format!("{name} must lie in (0, 1)")));
            }
        }
        if self.measures.is_empty() {
            return Err(cfg_err("adequacy.measures is empty"));
        }
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| {
            cfg_err("a seed is required (set `seed = N` or pass --seed); runs are never seeded from the clock")
        })
    }

    /// Every key in canonical order.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("preset", self.preset.clone().unwrap_or_else(|| "chironomid".into()));
        kv("seed", self.seed.map_or_else(String::new, |v| v.to_string()));
        kv("jobs", fmt_opt(&self.jobs));
        kv("dim", self.dim.to_string());
        kv("zero_inflation", self.zero_inflation.to_string());
        let p = &self.prior;
        kv("prior.alpha", p.alpha.to_string());
        kv("prior.psi", p.psi.to_string());
        kv("prior.atoms", p.atoms.to_string());
        kv("prior.uni.mu_beta", p.g0_uni.mu_beta.to_string());
        kv("prior.uni.a", p.g0_uni.a.to_string());
        kv("prior.uni.b", p.g0_uni.b.to_string());
        kv("prior.bi.mu_beta", join(&p.g0_bi.mu_beta));
        kv("prior.bi.a", join(&p.g0_bi.a));
        kv("prior.bi.b", join(&p.g0_bi.b));
        match &p.x_prior {
            XPrior::Uni { mean, var } => {
                kv("x_prior.mean", mean.to_string());
                kv("x_prior.var", var.to_string());
            }
            XPrior::Bi { mean, var, cov } => {
                kv("x_prior.mean", join(mean));
                kv("x_prior.var", join(var));
                kv("x_prior.cov", cov.to_string());
            }
        }
        kv("synth.n", self.synth.n.to_string());
        kv("synth.m", self.synth.m.to_string());
        kv(
            "synth.pi",
            match self.synth.pi {
                PiProfile::Uniform => "uniform".into(),
                PiProfile::Fixed(p) => p.to_string(),
            },
        );
        kv(
            "synth.totals",
            match self.synth.totals {
                Totals::Fixed(t) => t.to_string(),
                Totals::ShiftedPoisson { shift, mean } => format!("poisson:{shift}:{mean}"),
            },
        );
        kv("fit.iterations", self.fit.iterations.to_string());
        kv("fit.burn_in", self.fit.burn_in.to_string());
        kv("fit.thin", self.fit.thin.to_string());
        kv("fit.trace_thin", self.fit.trace_thin.to_string());
        kv("cv.stored", self.cv.stored.to_string());
        kv("cv.burn_in", self.cv.burn_in.to_string());
        kv("cv.thin", self.cv.thin.to_string());
        kv("cv.k1", self.cv.resample.to_string());
        kv("cv.k2", self.cv.inner.to_string());
        kv("cv.anchor", fmt_opt(&self.cv.anchor_override));
        kv("cv.level", self.cv.level.to_string());
        kv("cv.bins", fmt_opt(&self.cv.bins));
        kv("tune.rounds", self.cv.tune.rounds.to_string());
        kv("tune.sweeps", self.cv.tune.sweeps_per_round.to_string());
        kv("tune.band", self.cv.tune.band.to_string());
        let path = |p: &Option<PathBuf>| p.as_ref().map_or_else(|| "auto".into(), |p| p.display().to_string());
        kv("data.counts", path(&self.data.counts));
        kv("data.climate", path(&self.data.climate));
        kv("data.site_column", self.data.load.site_column.clone());
        kv("data.species", fmt_names(&self.data.load.species));
        kv("data.climate_columns", fmt_names(&self.data.load.climate));
        kv("data.standardize", self.data.load.standardize.to_string());
        kv("adequacy.measures", self.measures.iter().map(ToString::to_string).collect::<Vec<_>>().join(","));
        kv("adequacy.level", self.adequacy_level.to_string());
        kv("predict.level", self.predict_level.to_string());
        s
    }

    /// Builds a configuration from an optional preset, config text and
    /// `key=value` overrides, in that order of precedence (last wins).
    pub fn resolve(preset: Option<&str>, text: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let mut c = Self::default();
        if let Some(t) = text {
            c.apply_text(t)?;
        }
        if let Some(p) = preset {
            // The preset flag replaces the file's preset but keeps its other keys.
            let mut base = Self::preset(p)?;
            if let Some(t) = text {
                let kept: String = t
                    .lines()
                    .filter(|l| !l.split('#').next().unwrap_or("").trim_start().starts_with("preset"))
                    .map(|l| format!("{l}\n"))
                    .collect();
                base.apply_text(&kept)?;
            }
            c = base;
        }
        for (k, v) in overrides {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }
}
