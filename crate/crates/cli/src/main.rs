//! `zimcal`: synthetic data, model fitting, cross-validation, adequacy tests
//! and predictive bands from the command line.
//!
//! Runtime failures print one line, `error[<kind>]: <message>`, and exit 1.
//! Usage errors print the usage text and exit 2.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use zimcal::adequacy::Measure;
use zimcal::io::{pipeline, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "zimcal", version, about = "Zero-inflated multinomial calibration with IRMCMC cross-validation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Named preset: chironomid, pollen, desk-chironomid, synthetic-10.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Master seed (required unless the config sets one).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for cross-validation folds.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Log progress to stderr (-vv for more).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a dataset and its generating parameters.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Run the full-data chain and store its draws.
    Fit {
        #[command(flatten)]
        common: Common,
    },
    /// Leave-one-out cross-validation posteriors of every site's climate.
    Crossval {
        #[command(flatten)]
        common: Common,
        /// Only this site (0-based).
        #[arg(long)]
        site: Option<usize>,
    },
    /// Discrepancy-measure adequacy tests on stored cross-validation output.
    Adequacy {
        #[command(flatten)]
        common: Common,
        /// Measures to test (t1, t1-median, t2, d1, d1star, d2, d3); repeatable or comma-separated.
        #[arg(long, value_delimiter = ',')]
        measure: Vec<String>,
        /// HPD level of the reference distribution.
        #[arg(long)]
        level: Option<f64>,
    },
    /// Posterior predictive bands for every species from a stored chain.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        site: Option<usize>,
        #[arg(long)]
        level: Option<f64>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Synth { common }
            | Command::Fit { common }
            | Command::Crossval { common, .. }
            | Command::Adequacy { common, .. }
            | Command::Predict { common, .. } => common,
        }
    }
}

fn resolve(common: &Common) -> zimcal::Result<RunConfig> {
    let text = match &common.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => zimcal::Error::MissingArtifact(p.display().to_string()),
            _ => zimcal::Error::Io(e),
        })?),
        None => None,
    };
    let mut overrides = Vec::new();
    for s in &common.set {
        let (k, v) =
            s.split_once('=').ok_or_else(|| zimcal::Error::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = common.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(j) = common.jobs {
        overrides.push(("jobs".into(), j.to_string()));
    }
    RunConfig::resolve(common.preset.as_deref(), text.as_deref(), &overrides)
}

fn run(cmd: &Command) -> zimcal::Result<()> {
    let common = cmd.common();
    let cfg = resolve(common)?;
    let out: &Path = &common.out_dir;
    match cmd {
        Command::Synth { .. } => {
            let r = pipeline::synth(&cfg, out)?;
            println!(
                "synth: {} sites x {} species, zero fraction {:.3} -> {}",
                r.n_sites,
                r.n_species,
                r.zero_fraction,
                out.display()
            );
        }
        Command::Fit { .. } => {
            let r = pipeline::fit(&cfg, out)?;
            let rates: Vec<String> = r.acceptance.iter().map(|(k, v)| format!("{k} {v:.3}")).collect();
            println!("fit: {} draws stored, acceptance: {} -> {}", r.draws, rates.join(", "), out.display());
            if !r.tuned {
                log::info!("pilot tuning ended outside the target band");
            }
        }
        Command::Crossval { site, .. } => {
            let r = pipeline::crossval(&cfg, out, *site)?;
            let cov: Vec<String> = r.coverage.iter().map(|c| format!("{c:.3}")).collect();
            println!(
                "crossval: {} site(s), anchor {}, coverage at {}: {} -> {}",
                r.sites,
                r.anchor,
                cfg.cv.level,
                cov.join(" / "),
                out.display()
            );
        }
        Command::Adequacy { measure, level, .. } => {
            let measures = measure.iter().map(|m| m.parse()).collect::<zimcal::Result<Vec<Measure>>>()?;
            for r in pipeline::adequacy(&cfg, out, &measures, *level)? {
                println!(
                    "adequacy: {:<9} observed {:>14.6}  reference cdf {:.3}  {}",
                    r.measure.to_string(),
                    r.observed,
                    r.reference_cdf,
                    if r.accepted { "accepted" } else { "rejected" }
                );
            }
        }
        Command::Predict { site, level, .. } => {
            let rows = pipeline::predict(&cfg, out, *site, *level)?;
            println!("predict: {rows} band(s) -> {}", out.join("predictive.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let common = cli.command.common();
    if common.config.is_none() && common.preset.is_none() {
        let e = Cli::command().error(ErrorKind::MissingRequiredArgument, "one of --config or --preset is required");
        let _ = e.print();
        return ExitCode::from(2);
    }
    let level = match common.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            let prefix = format!("{}: ", e.kind().replace('-', " "));
            eprintln!("error[{}]: {}", e.kind(), msg.strip_prefix(&prefix).unwrap_or(&msg));
            ExitCode::from(1)
        }
    }
}
