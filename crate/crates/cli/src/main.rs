//! `lsbec`: spectra, IDS and Bose-gas experiments for 1D Poisson
//! delta-impurity boxes.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration,
//! 3 numerical failure (insufficient spectrum, no convergence, ...),
//! 4 resource cap exceeded.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use config::{Experiment, RunConfig};

/// Errors mapped onto the documented exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Resource(String),
    #[error("{0}")]
    Io(String),
}

impl Failure {
    pub fn config(key: &str, reason: &str) -> Self {
        Failure::Config(format!("invalid config key `{key}`: {reason}"))
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Resource(_) => 4,
        }
    }
}

impl From<lsbec::Error> for Failure {
    fn from(e: lsbec::Error) -> Self {
        use lsbec::Error as E;
        match e {
            E::Parameter { .. } | E::Validation(_) => Failure::Config(e.to_string()),
            E::Resource(_) => Failure::Resource(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "lsbec", version, about = "Bose gas in a 1D box with Poisson delta impurities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lowest levels of one realization.
    Spectrum(Overrides),
    /// Ensemble integrated density of states.
    Ids(Overrides),
    /// Chemical potential and occupations of one realization.
    Thermo(Overrides),
    /// Energy-gap event frequencies.
    Gap(Overrides),
    /// Condensate occupation across sizes.
    Bec(Overrides),
    /// Occupation of excited levels.
    Excited(Overrides),
    /// Convergence of the chemical potential.
    Mu(Overrides),
    /// Lifshitz-tail fit of the ensemble IDS.
    Lifshitz(Overrides),
}

impl Command {
    fn split(self) -> (Experiment, Overrides) {
        match self {
            Command::Spectrum(o) => (Experiment::Spectrum, o),
            Command::Ids(o) => (Experiment::Ids, o),
            Command::Thermo(o) => (Experiment::Thermo, o),
            Command::Gap(o) => (Experiment::Gap, o),
            Command::Bec(o) => (Experiment::Bec, o),
            Command::Excited(o) => (Experiment::Excited, o),
            Command::Mu(o) => (Experiment::Mu, o),
            Command::Lifshitz(o) => (Experiment::Lifshitz, o),
        }
    }
}

/// Flags mirror the config keys and take precedence over the file.
#[derive(Args, Default)]
struct Overrides {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Particle numbers, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<u64>>,
    /// Realizations per size.
    #[arg(short = 'R', long = "realizations")]
    realizations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long = "M")]
    m: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    eta_prime: Option<f64>,
    /// Multiples of E¹, comma separated.
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long)]
    rho_c: Option<f64>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    /// Output directory.
    #[arg(long = "out")]
    output_dir: Option<PathBuf>,
    /// Output formats (csv, json), comma separated.
    #[arg(long, value_delimiter = ',')]
    formats: Option<Vec<String>>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Overrides {
    /// Merged JSON config: file first, then flags, then the subcommand.
    fn merge(&self, experiment: Experiment) -> Result<Value, Failure> {
        let mut obj = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(m)) => m,
                    Ok(_) => return Err(Failure::Config("config must be a JSON object".into())),
                    Err(e) => return Err(Failure::Config(format!("invalid config: {e}"))),
                }
            }
            None => Map::new(),
        };
        let mut set = |key: &str, v: Option<Value>| {
            if let Some(v) = v {
                obj.insert(key.into(), v);
            }
        };
        set("nu", self.nu.map(Value::from));
        set("gamma", self.gamma.map(Value::from));
        set("beta", self.beta.map(Value::from));
        set("rho", self.rho.map(Value::from));
        set("sizes", self.sizes.clone().map(Value::from));
        set("R", self.realizations.map(Value::from));
        set("seed", self.seed.map(Value::from));
        set("eta", self.eta.map(Value::from));
        set("c2", self.c2.map(Value::from));
        set("M", self.m.map(Value::from));
        set("kappa", self.kappa.map(Value::from));
        set("eta_prime", self.eta_prime.map(Value::from));
        set("epsilons", self.epsilons.clone().map(Value::from));
        set("rho_c", self.rho_c.map(Value::from));
        set("length", self.length.map(Value::from));
        set("levels", self.levels.map(Value::from));
        set(
            "output_dir",
            self.output_dir.as_ref().map(|p| Value::from(p.to_string_lossy().into_owned())),
        );
        set("formats", self.formats.clone().map(Value::from));
        set("threads", self.threads.map(Value::from));
        match obj.get("experiment") {
            Some(Value::String(s)) if s != experiment.name() => {
                return Err(Failure::config(
                    "experiment",
                    &format!("file selects `{s}` but the subcommand is `{}`", experiment.name()),
                ));
            }
            _ => {}
        }
        obj.insert("experiment".into(), Value::from(experiment.name()));
        Ok(Value::Object(obj))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, overrides) = cli.command.split();
    let result = overrides.merge(experiment).and_then(|merged| {
        let config: RunConfig = serde_json::from_value(merged.clone())
            .map_err(|e| Failure::Config(format!("invalid config: {e}")))?;
        config.validate()?;
        run::run(&config, &merged)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lsbec: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
