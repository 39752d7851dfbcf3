//! Run configuration: a single JSON document, overridable by flags.

use std::path::PathBuf;

use lsbec::{FitWindow, ModelParameters, TheoremConstants};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Spectrum,
    Ids,
    Thermo,
    Gap,
    Bec,
    Excited,
    Mu,
    Lifshitz,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Spectrum => "spectrum",
            Experiment::Ids => "ids",
            Experiment::Thermo => "thermo",
            Experiment::Gap => "gap",
            Experiment::Bec => "bec",
            Experiment::Excited => "excited",
            Experiment::Mu => "mu",
            Experiment::Lifshitz => "lifshitz",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Linear,
}

/// Energy grid `points` values from `min` to `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
}

fn default_spacing() -> Spacing {
    Spacing::Log
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            min: 0.01,
            max: 10.0,
            points: 100,
            spacing: Spacing::Log,
        }
    }
}

impl GridConfig {
    pub fn energies(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                match self.spacing {
                    Spacing::Log => self.min * (self.max / self.min).powf(t),
                    Spacing::Linear => self.min + (self.max - self.min) * t,
                }
            })
            .collect()
    }

    fn validate(&self, key: &str) -> Result<(), Failure> {
        if !(self.min > 0.0 && self.max > self.min && self.points >= 2) {
            return Err(Failure::config(key, "needs 0 < min < max and at least 2 points"));
        }
        Ok(())
    }
}

/// Limiting IDS used for `ρ_c` and `μ̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceConfig {
    /// Closed form for impenetrable atoms at the configured intensity.
    InfiniteGamma,
    /// Ensemble IDS at the configured γ.
    Ensemble {
        length: f64,
        realizations: usize,
        #[serde(default)]
        grid: Option<GridConfig>,
    },
}

/// Everything a run needs. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub nu: f64,
    pub gamma: f64,
    pub beta: f64,
    pub rho: f64,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<u64>,
    #[serde(rename = "R", default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_c2")]
    pub c2: f64,
    #[serde(rename = "M", default = "default_m")]
    pub m: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_eta_prime")]
    pub eta_prime: f64,
    /// Multiples of each realization's `E¹`.
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    /// Overrides the critical density computed from `reference`.
    #[serde(default)]
    pub rho_c: Option<f64>,
    #[serde(default = "default_reference")]
    pub reference: ReferenceConfig,
    /// Box length for `spectrum`, `ids` and `lifshitz`; otherwise `N/ρ`.
    #[serde(default)]
    pub length: Option<f64>,
    /// Levels written by `spectrum`.
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub fit_window: Option<FitWindow>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Worker threads; `None` uses every logical core.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_sizes() -> Vec<u64> {
    vec![1000]
}
fn default_realizations() -> usize {
    10
}
fn default_eta() -> f64 {
    0.5
}
fn default_c2() -> f64 {
    4.0
}
fn default_m() -> f64 {
    1.0
}
fn default_kappa() -> f64 {
    3.0
}
fn default_eta_prime() -> f64 {
    0.01
}
fn default_epsilons() -> Vec<f64> {
    vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0]
}
fn default_reference() -> ReferenceConfig {
    ReferenceConfig::InfiniteGamma
}
fn default_levels() -> usize {
    100
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("lsbec-out")
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl RunConfig {
    #[cfg(test)]
    pub fn from_json(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::Config(format!("invalid config: {e}")))
    }

    pub fn params(&self) -> ModelParameters {
        ModelParameters {
            intensity: self.nu,
            strength: self.gamma,
            beta: self.beta,
            density: self.rho,
            particles: self.sizes.first().copied().unwrap_or(1),
        }
    }

    pub fn constants(&self) -> TheoremConstants {
        TheoremConstants {
            eta: self.eta,
            c2: self.c2,
            m: self.m,
            kappa: self.kappa,
        }
    }

    /// Box length for single-box experiments.
    pub fn box_length(&self) -> f64 {
        self.length.unwrap_or_else(|| self.params().box_length())
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    /// Checks every numeric constraint, naming the offending key.
    pub fn validate(&self) -> Result<(), Failure> {
        for (key, v) in [("nu", self.nu), ("gamma", self.gamma), ("beta", self.beta), ("rho", self.rho)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Failure::config(key, "must be positive and finite"));
            }
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Failure::config("sizes", "must list positive particle numbers"));
        }
        if self.realizations == 0 {
            return Err(Failure::config("R", "must be at least 1"));
        }
        if !(self.eta > 0.0 && self.eta < 2.0) {
            return Err(Failure::config("eta", "must lie in (0, 2)"));
        }
        if !(self.c2 > 2.0) {
            return Err(Failure::config("c2", "must exceed 2"));
        }
        if !(self.m > 0.0) {
            return Err(Failure::config("M", "must be positive"));
        }
        if !(self.kappa > 2.0) {
            return Err(Failure::config("kappa", "must exceed 2"));
        }
        if !(self.eta_prime > 0.0) {
            return Err(Failure::config("eta_prime", "must be positive"));
        }
        if self.epsilons.is_empty()
            || self.epsilons[0] <= 0.0
            || self.epsilons.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Failure::config("epsilons", "must be positive and increasing"));
        }
        if let Some(r) = self.rho_c {
            if !(r > 0.0) {
                return Err(Failure::config("rho_c", "must be positive"));
            }
        }
        if let ReferenceConfig::Ensemble { length, realizations, grid } = &self.reference {
            if !(*length > 0.0) || *realizations < 2 {
                return Err(Failure::config("reference", "ensemble needs length > 0 and R ≥ 2"));
            }
            if let Some(g) = grid {
                g.validate("reference.grid")?;
            }
        }
        if let Some(l) = self.length {
            if !(l > 0.0) {
                return Err(Failure::config("length", "must be positive"));
            }
        }
        if self.levels == 0 {
            return Err(Failure::config("levels", "must be at least 1"));
        }
        self.grid.validate("grid")?;
        if self.formats.is_empty() {
            return Err(Failure::config("formats", "must name at least one format"));
        }
        if self.threads == Some(0) {
            return Err(Failure::config("threads", "must be at least 1"));
        }
        Ok(())
    }
}
