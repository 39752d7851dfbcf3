//! Ensemble harnesses over growing boxes: energy-gap events, condensate
//! occupation, excited-level occupation, convergence of the chemical
//! potential and the Lifshitz tail.
//!
//! Realization `r` of size cell `s` draws its atoms from stream
//! `(s << 32) | r` of the run seed, so every row is a pure function of
//! `(seed, parameters)` and independent of the thread count. Frequencies are
//! reported as pass/flag rows rather than failures, since the asymptotic
//! thresholds hold only beyond an unknown size.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::ids::{
    critical_density, ensemble_ids_at_length, lifshitz_fit, solve_mu_hat, IdsCurve, IdsReference, LifshitzFit,
};
use crate::numeric::{mean_and_stderr, quantile_sorted};
use crate::sampler::{sample_realization, ImpurityConfiguration, ModelParameters};
use crate::spectrum::{lowest_levels_windowed, SolverOptions, WindowOptions};
use crate::thermo::{bose, ThermoOptions, ThermoSpectrum, ThermoState};

/// Gap and occupation constants. `c1` and `c3` are derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub eta: f64,
    pub c2: f64,
    /// Not constructive; a sensitivity sweep accompanies every gap report.
    pub m: f64,
    pub kappa: f64,
}

impl Default for TheoremConstants {
    fn default() -> Self {
        Self {
            eta: 0.5,
            c2: 4.0,
            m: 1.0,
            kappa: 3.0,
        }
    }
}

impl TheoremConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 2.0) {
            return Err(Error::param("eta", "must lie in (0, 2)"));
        }
        if !(self.c2 > 2.0) {
            return Err(Error::param("c2", "must exceed 2"));
        }
        require_positive("M", self.m)?;
        if !(self.kappa > 2.0) {
            return Err(Error::param("kappa", "must exceed 2"));
        }
        Ok(())
    }

    /// `c1 = -ν / (4 ln(η/2))`.
    pub fn c1(&self, intensity: f64) -> f64 {
        -intensity / (4.0 * (0.5 * self.eta).ln())
    }

    /// `c3 = ⌈4 M c2 / (η c1)⌉ + 1`.
    pub fn c3(&self, intensity: f64) -> usize {
        self.c3_with(self.m, intensity)
    }

    pub fn c3_with(&self, m: f64, intensity: f64) -> usize {
        (4.0 * m * self.c2 / (self.eta * self.c1(intensity))).ceil() as usize + 1
    }

    /// `(πν / ln(c1 L))²`, the scale the ground level falls below.
    pub fn ground_bound(&self, intensity: f64, length: f64) -> Result<f64> {
        let d = (self.c1(intensity) * length).ln();
        if !(d > 0.0) {
            return Err(Error::Domain(format!("ln(c1·L) = {d} is not positive at L = {length}")));
        }
        Ok((PI * intensity / d).powi(2))
    }

    /// `Ẽ = (πν / (ln(c1 L) - ln(c2/2)))²`.
    pub fn e_tilde(&self, intensity: f64, length: f64) -> Result<f64> {
        let d = (self.c1(intensity) * length).ln() - (0.5 * self.c2).ln();
        if !(d > 0.0) {
            return Err(Error::Domain(format!(
                "ln(c1·L) does not exceed ln(c2/2) at L = {length}"
            )));
        }
        Ok((PI * intensity / d).powi(2))
    }

    /// `(πν / (κ ln L))²`, the scale the ground level stays above.
    pub fn kappa_bound(&self, intensity: f64, length: f64) -> f64 {
        (PI * intensity / (self.kappa * length.ln())).powi(2)
    }
}

/// One report line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(rename = "N")]
    pub particles: u64,
    #[serde(rename = "L")]
    pub length: f64,
    pub statistic: String,
    pub value: f64,
    pub stderr: f64,
    #[serde(rename = "R")]
    pub realizations: usize,
}

/// Inputs echoed with every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub experiment: String,
    pub params: ModelParameters,
    pub constants: Option<TheoremConstants>,
    pub seed: u64,
    pub sizes: Vec<u64>,
    pub realizations: usize,
    /// Derived scalars (critical density, μ̂, fit window, ...).
    pub derived: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    fn new(experiment: &str, ens: &Ensemble, constants: Option<TheoremConstants>) -> Self {
        Self {
            metadata: ReportMetadata {
                experiment: experiment.into(),
                params: ens.params,
                constants,
                seed: ens.seed,
                sizes: ens.sizes.clone(),
                realizations: ens.realizations,
                derived: BTreeMap::new(),
            },
            rows: Vec::new(),
        }
    }

    fn push(&mut self, n: u64, length: f64, statistic: impl Into<String>, value: f64, stderr: f64, r: usize) {
        self.rows.push(ReportRow {
            particles: n,
            length,
            statistic: statistic.into(),
            value,
            stderr,
            realizations: r,
        });
    }

    /// First row with this statistic at size `n`.
    pub fn row(&self, n: u64, statistic: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.particles == n && r.statistic == statistic)
    }

    pub fn value(&self, n: u64, statistic: &str) -> Option<f64> {
        self.row(n, statistic).map(|r| r.value)
    }

    /// `N,L,statistic,value,stderr,R` rows, floats at 17 significant digits.
    pub fn csv_body(&self) -> String {
        let mut out = String::from("N,L,statistic,value,stderr,R\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.16e},{},{:.16e},{:.16e},{}\n",
                r.particles, r.length, r.statistic, r.value, r.stderr, r.realizations
            ));
        }
        out
    }

    /// [`Self::csv_body`] under a `#`-prefixed JSON metadata line.
    pub fn to_csv(&self) -> String {
        let meta = serde_json::to_string(&self.metadata).expect("metadata is always serializable");
        format!("# {meta}\n{}", self.csv_body())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }
}

/// Shared run settings: parameters (ρ, β, ...), the particle numbers, the
/// realization count per size and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub params: ModelParameters,
    pub sizes: Vec<u64>,
    pub realizations: usize,
    pub seed: u64,
    pub thermo: ThermoOptions,
}

impl Ensemble {
    pub fn new(params: ModelParameters, sizes: Vec<u64>, realizations: usize, seed: u64) -> Self {
        Self {
            params,
            sizes,
            realizations,
            seed,
            thermo: ThermoOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::param("sizes", "need at least one positive particle number"));
        }
        if self.realizations == 0 {
            return Err(Error::param("realizations", "must be at least 1"));
        }
        Ok(())
    }

    fn length(&self, n: u64) -> f64 {
        n as f64 / self.params.density
    }

    fn configuration(&self, cell: usize, n: u64, r: usize) -> Result<ImpurityConfiguration> {
        sample_realization(self.length(n), self.params.intensity, self.seed, stream(cell, r))
    }
}

fn stream(cell: usize, r: usize) -> u64 {
    ((cell as u64) << 32) | r as u64
}

/// Per-realization outcome of a thermodynamic run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoRecord {
    pub levels: Vec<f64>,
    pub state: ThermoState,
    pub saturation_density: f64,
}

impl ThermoRecord {
    /// `|Σ n_j + tail - N| / N`.
    pub fn sum_rule_residual(&self) -> f64 {
        let n = self.state.particles as f64;
        (self.state.total - n).abs() / n
    }

    /// `n¹/N` recomputed from the stored ground level and μ.
    pub fn ground_fraction_recomputed(&self) -> f64 {
        bose(self.levels[0] - self.state.mu, self.state.beta) / self.state.particles as f64
    }
}

/// Measures and solves every realization of size cell `cell`; `epsilons`
/// are multiples of each realization's own `E¹`.
pub fn thermo_cell(ens: &Ensemble, cell: usize, epsilons: &[f64]) -> Result<Vec<ThermoRecord>> {
    let n = ens.sizes[cell];
    let p = &ens.params;
    (0..ens.realizations)
        .into_par_iter()
        .map(|r| {
            let config = ens.configuration(cell, n, r)?;
            let ts = ThermoSpectrum::measure(&config, p.strength, p.beta, &ens.thermo)?;
            let eps: Vec<f64> = epsilons.iter().map(|e| e * ts.ground()).collect();
            let state = ThermoState::compute(&ts, p.beta, n, Some(&eps))?;
            Ok(ThermoRecord {
                levels: ts.levels().to_vec(),
                saturation_density: ts.saturation_density(p.beta),
                state,
            })
        })
        .collect()
}

fn frequency(hits: usize, total: usize) -> (f64, f64) {
    let p = hits as f64 / total as f64;
    (p, (p * (1.0 - p) / total as f64).sqrt())
}

fn summary(values: &[f64]) -> (f64, f64, f64) {
    let (m, se) = mean_and_stderr(values);
    let n = values.len();
    let sd = if n > 1 { se * (n as f64).sqrt() } else { 0.0 };
    (m, se, sd)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Sum-rule and solver-domain bookkeeping shared by the thermodynamic
/// reports.
fn push_checks(report: &mut ExperimentReport, n: u64, length: f64, records: &[ThermoRecord]) {
    let r = records.len();
    let worst = records.iter().map(ThermoRecord::sum_rule_residual).fold(0.0, f64::max);
    let violations = records.iter().filter(|x| x.sum_rule_residual() > 1e-8).count();
    let above = records.iter().filter(|x| !(x.state.mu < x.levels[0])).count();
    report.push(n, length, "sum_rule_max_relative_residual", worst, 0.0, r);
    report.push(n, length, "sum_rule_violations", violations as f64, 0.0, r);
    report.push(n, length, "mu_not_below_E1", above as f64, 0.0, r);
}

/// Gap-event frequencies: `E¹ ≤ (πν/ln(c1 L))²`, `E^{c3} ≥ Ẽ`, their
/// conjunction, and the lower bound `E¹ ≥ (πν/(κ ln L))²`, with a sweep
/// over `M ∈ {0.5, 1, 2}`.
pub fn run_gap_experiment(ens: &Ensemble, constants: &TheoremConstants) -> Result<ExperimentReport> {
    ens.validate()?;
    constants.validate()?;
    let nu = ens.params.intensity;
    let sweep = [0.5, 1.0, 2.0];
    let c3 = constants.c3(nu);
    let c3_sweep: Vec<usize> = sweep.iter().map(|&m| constants.c3_with(m, nu)).collect();
    let needed = c3_sweep.iter().copied().chain([c3]).max().expect("non-empty");
    let mut report = ExperimentReport::new("gap", ens, Some(*constants));
    report.metadata.derived.insert("c1".into(), constants.c1(nu));
    report.metadata.derived.insert("c3".into(), c3 as f64);
    for (&m, &c) in sweep.iter().zip(&c3_sweep) {
        report.metadata.derived.insert(format!("c3|M={m}"), c as f64);
    }
    // fail early on sizes where Ẽ is undefined
    for &n in &ens.sizes {
        constants.e_tilde(nu, ens.length(n))?;
    }
    for (cell, &n) in ens.sizes.iter().enumerate() {
        let length = ens.length(n);
        let ground_bound = constants.ground_bound(nu, length)?;
        let e_tilde = constants.e_tilde(nu, length)?;
        let kappa_bound = constants.kappa_bound(nu, length);
        let spectra: Vec<Vec<f64>> = (0..ens.realizations)
            .into_par_iter()
            .map(|r| {
                let config = ens.configuration(cell, n, r)?;
                let s = lowest_levels_windowed(
                    &config,
                    ens.params.strength,
                    needed,
                    &SolverOptions::default(),
                    &WindowOptions::default(),
                )?;
                Ok(s.eigenvalues().to_vec())
            })
            .collect::<Result<_>>()?;
        let r = spectra.len();
        let ground_ok: Vec<bool> = spectra.iter().map(|s| s[0] <= ground_bound).collect();
        let count = |f: &dyn Fn(usize) -> bool| (0..r).filter(|&i| f(i)).count();
        let gap_ok = |c: usize| -> Vec<bool> { spectra.iter().map(|s| s[c - 1] >= e_tilde).collect() };

        report.push(n, length, "ground_bound", ground_bound, 0.0, r);
        report.push(n, length, "E_tilde", e_tilde, 0.0, r);
        let (p, se) = frequency(count(&|i| ground_ok[i]), r);
        report.push(n, length, "P[E1<=ground_bound]", p, se, r);
        report.push(n, length, "target[1-eta/2]", 1.0 - 0.5 * constants.eta, 0.0, r);
        let (p, se) = frequency(count(&|i| spectra[i][0] >= kappa_bound), r);
        report.push(n, length, "P[E1>=kappa_bound]", p, se, r);
        let main = gap_ok(c3);
        let (p, se) = frequency(count(&|i| main[i]), r);
        report.push(n, length, "P[Ec3>=E_tilde]", p, se, r);
        let (p_omega, se) = frequency(count(&|i| main[i] && ground_ok[i]), r);
        let target = 1.0 - 5.0 * constants.eta / 8.0;
        report.push(n, length, "P[Omega2]", p_omega, se, r);
        report.push(n, length, "target[1-5eta/8]", target, 0.0, r);
        report.push(n, length, "flag[P[Omega2]>=target]", (p_omega >= target) as u8 as f64, 0.0, r);
        for (&m, &c) in sweep.iter().zip(&c3_sweep) {
            let ok = gap_ok(c);
            let (p, se) = frequency(count(&|i| ok[i] && ground_ok[i]), r);
            report.push(n, length, format!("P[Omega2|M={m}]"), p, se, r);
        }
        let e1: Vec<f64> = spectra.iter().map(|s| s[0]).collect();
        let (m, se, _) = summary(&e1);
        report.push(n, length, "E1_mean", m, se, r);
    }
    Ok(report)
}

/// `ρ₀` from a condensate profile: the smallest-ε fraction, extrapolated
/// linearly to `ε = 0` through the two smallest ε.
pub fn rho0_estimate(density: f64, epsilons: &[f64], fractions: &[f64]) -> f64 {
    match (epsilons, fractions) {
        ([e1, e2, ..], [f1, f2, ..]) if e2 > e1 => density * (f1 - e1 * (f2 - f1) / (e2 - e1)),
        (_, [f1, ..]) => density * f1,
        _ => f64::NAN,
    }
}

/// Condensate occupation: distribution of `n¹/N`, mean ε-profile, `ρ₀`
/// estimate and the macroscopic-occupation threshold event.
///
/// `epsilons` are multiples of each realization's `E¹`; `rho_c` is the
/// critical density the run is compared against.
pub fn run_bec_experiment(
    ens: &Ensemble,
    constants: &TheoremConstants,
    epsilons: &[f64],
    rho_c: f64,
) -> Result<ExperimentReport> {
    ens.validate()?;
    constants.validate()?;
    if epsilons.is_empty() || epsilons.windows(2).any(|w| w[1] <= w[0]) || epsilons[0] <= 0.0 {
        return Err(Error::param("epsilons", "must be positive and increasing"));
    }
    let rho = ens.params.density;
    let rho0 = rho - rho_c;
    let eta = constants.eta;
    let c3 = constants.c3(ens.params.intensity);
    let mut report = ExperimentReport::new("bec", ens, Some(*constants));
    report.metadata.derived.insert("rho_c".into(), rho_c);
    report.metadata.derived.insert("supercritical".into(), (rho0 > 0.0) as u8 as f64);
    for (cell, &n) in ens.sizes.iter().enumerate() {
        let length = ens.length(n);
        let recs = thermo_cell(ens, cell, epsilons)?;
        let r = recs.len();
        let n1: Vec<f64> = recs.iter().map(|x| x.state.ground_fraction()).collect();
        let (m, se, _) = summary(&n1);
        let s = sorted(&n1);
        report.push(n, length, "n1/N_mean", m, se, r);
        for (q, name) in [(0.1, "q10"), (0.25, "q25"), (0.5, "median"), (0.75, "q75"), (0.9, "q90")] {
            report.push(n, length, format!("n1/N_{name}"), quantile_sorted(&s, q), 0.0, r);
        }
        let n2: Vec<f64> = recs.iter().map(|x| x.state.level_fraction(2).unwrap_or(0.0)).collect();
        let (m, se, _) = summary(&n2);
        report.push(n, length, "n2/N_mean", m, se, r);
        for (i, eps) in epsilons.iter().enumerate() {
            let f: Vec<f64> = recs.iter().map(|x| x.state.condensate_fraction_eps[i].fraction).collect();
            let (m, se, _) = summary(&f);
            report.push(n, length, format!("fraction[eps={eps:e}*E1]_mean"), m, se, r);
        }
        let est: Vec<f64> = recs
            .iter()
            .map(|x| {
                let f: Vec<f64> = x.state.condensate_fraction_eps.iter().map(|p| p.fraction).collect();
                let e: Vec<f64> = x.state.condensate_fraction_eps.iter().map(|p| p.epsilon).collect();
                rho0_estimate(rho, &e, &f)
            })
            .collect();
        let (m, se, _) = summary(&est);
        report.push(n, length, "rho0_estimate", m, se, r);
        report.push(n, length, "rho0_theory", rho0.max(0.0), 0.0, r);
        report.push(n, length, "condensate_fraction_theory", rho0.max(0.0) / rho, 0.0, r);
        if rho0 > 0.0 {
            let threshold = (1.0 - eta.sqrt()) * (1.0 - eta) * rho0 / (c3 as f64 * rho);
            let target = 1.0 - 4.0 * ((rho0 + rho + 1.0) / rho0) * eta.sqrt() - 6.0 * eta / 8.0;
            let (p, se) = frequency(n1.iter().filter(|&&v| v >= threshold).count(), r);
            report.push(n, length, "n1_threshold", threshold, 0.0, r);
            report.push(n, length, "P[n1/N>=threshold]", p, se, r);
            report.push(n, length, "target[occupation]", target, 0.0, r);
            report.push(n, length, "flag[P>=target]", (p >= target) as u8 as f64, 0.0, r);
        }
        let mismatch = recs
            .iter()
            .filter(|x| {
                let a = x.state.ground_fraction();
                (a - x.ground_fraction_recomputed()).abs() > 1e-12 * a.max(1e-300)
            })
            .count();
        report.push(n, length, "n1_recompute_mismatches", mismatch as f64, 0.0, r);
        let mu: Vec<f64> = recs.iter().map(|x| x.state.mu).collect();
        let (m, se, _) = summary(&mu);
        report.push(n, length, "mu_mean", m, se, r);
        push_checks(&mut report, n, length, &recs);
    }
    Ok(report)
}

/// Frequency of `n^{c3}/N < η′` and the mean of `n^j/N` for
/// `j ∈ {2, c3, 2c3}`.
pub fn run_excited_state_check(ens: &Ensemble, constants: &TheoremConstants, eta_prime: f64) -> Result<ExperimentReport> {
    ens.validate()?;
    constants.validate()?;
    require_positive("eta_prime", eta_prime)?;
    let c3 = constants.c3(ens.params.intensity);
    let mut ens = ens.clone();
    ens.thermo.explicit_levels = ens.thermo.explicit_levels.max(2 * c3 + 1);
    let mut report = ExperimentReport::new("excited", &ens, Some(*constants));
    report.metadata.derived.insert("c3".into(), c3 as f64);
    report.metadata.derived.insert("eta_prime".into(), eta_prime);
    for (cell, &n) in ens.sizes.iter().enumerate() {
        let length = ens.length(n);
        let recs = thermo_cell(&ens, cell, &[1.0])?;
        let r = recs.len();
        let frac = |x: &ThermoRecord, j: usize| x.state.level_fraction(j).unwrap_or(0.0);
        let hits = recs.iter().filter(|x| frac(x, c3) < eta_prime).count();
        let (p, se) = frequency(hits, r);
        let target = 1.0 - 5.0 * constants.eta / 8.0;
        report.push(n, length, "P[n_c3/N<eta_prime]", p, se, r);
        report.push(n, length, "target[1-5eta/8]", target, 0.0, r);
        report.push(n, length, "flag[P>=target]", (p >= target) as u8 as f64, 0.0, r);
        for (j, name) in [(2, "2"), (c3, "c3"), (2 * c3, "2c3")] {
            let v: Vec<f64> = recs.iter().map(|x| frac(x, j)).collect();
            let (m, se, _) = summary(&v);
            report.push(n, length, format!("n_j/N_mean|j={name}"), m, se, r);
        }
        let unordered = recs
            .iter()
            .filter(|x| x.state.occupations.windows(2).any(|w| w[1] > w[0]))
            .count();
        report.push(n, length, "occupation_order_violations", unordered as f64, 0.0, r);
        push_checks(&mut report, n, length, &recs);
    }
    Ok(report)
}

/// Mean and spread of `μ_N` across sizes. Below the reference critical
/// density the residual to `μ̂` is reported as well.
pub fn run_mu_convergence(ens: &Ensemble, reference: &IdsReference) -> Result<ExperimentReport> {
    ens.validate()?;
    let p = &ens.params;
    let mut report = ExperimentReport::new("mu", ens, None);
    let rho_c = critical_density(reference, p.beta)?.value;
    report.metadata.derived.insert("rho_c".into(), rho_c);
    let mu_hat = if p.density < rho_c {
        let m = solve_mu_hat(p.density, p.beta, reference)?;
        report.metadata.derived.insert("mu_hat".into(), m);
        Some(m)
    } else {
        None
    };
    for (cell, &n) in ens.sizes.iter().enumerate() {
        let length = ens.length(n);
        let recs = thermo_cell(ens, cell, &[1.0])?;
        let r = recs.len();
        let mu: Vec<f64> = recs.iter().map(|x| x.state.mu).collect();
        let (m, se, sd) = summary(&mu);
        report.push(n, length, "mu_mean", m, se, r);
        report.push(n, length, "mu_sd", sd, 0.0, r);
        report.push(n, length, "abs_mu_mean", m.abs(), se, r);
        let e1: Vec<f64> = recs.iter().map(|x| x.levels[0]).collect();
        let (me, see, _) = summary(&e1);
        report.push(n, length, "E1_mean", me, see, r);
        if let Some(h) = mu_hat {
            report.push(n, length, "mu_hat", h, 0.0, r);
            report.push(n, length, "abs_residual[mu_mean-mu_hat]", (m - h).abs(), se, r);
        }
        push_checks(&mut report, n, length, &recs);
    }
    Ok(report)
}

/// Fit window for the Lifshitz experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWindow {
    /// Energy interval.
    Energy { lo: f64, hi: f64 },
    /// Grid points where the ensemble IDS lies in `[lo, hi]`.
    IdsValues { lo: f64, hi: f64 },
}

/// Output of [`run_lifshitz_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct LifshitzOutcome {
    pub report: ExperimentReport,
    pub curve: IdsCurve,
    pub fit: LifshitzFit,
}

/// Ensemble IDS at box length `length`, the Lifshitz fit and the slope
/// compared with `πν`.
pub fn run_lifshitz_experiment(
    params: &ModelParameters,
    length: f64,
    realizations: usize,
    seed: u64,
    grid: &[f64],
    window: FitWindow,
) -> Result<LifshitzOutcome> {
    params.validate()?;
    require_positive("length", length)?;
    let curve = ensemble_ids_at_length(length, params.intensity, params.strength, grid, realizations, seed)?;
    let (lo, hi) = match window {
        FitWindow::Energy { lo, hi } => (lo, hi),
        FitWindow::IdsValues { lo, hi } => curve
            .value_window(lo, hi)
            .ok_or_else(|| Error::Fit(format!("no grid point with IDS in [{lo}, {hi}]")))?,
    };
    let fit = lifshitz_fit(&curve, (lo, hi))?;
    let n = (length * params.density).round() as u64;
    let ens = Ensemble::new(*params, vec![n], realizations, seed);
    let mut report = ExperimentReport::new("lifshitz", &ens, None);
    report.metadata.derived.insert("window_lo".into(), lo);
    report.metadata.derived.insert("window_hi".into(), hi);
    let pi_nu = PI * params.intensity;
    let (ci_lo, ci_hi) = fit.slope_interval(1.96);
    let r = realizations;
    report.push(n, length, "slope", fit.slope, fit.slope_stderr, r);
    report.push(n, length, "slope/(pi*nu)", fit.slope / pi_nu, fit.slope_stderr / pi_nu, r);
    report.push(n, length, "slope_ci95_lo", ci_lo, 0.0, r);
    report.push(n, length, "slope_ci95_hi", ci_hi, 0.0, r);
    report.push(n, length, "intercept", fit.intercept, 0.0, r);
    report.push(n, length, "r_squared", fit.r_squared, 0.0, r);
    report.push(n, length, "fit_points", fit.points as f64, 0.0, r);
    Ok(LifshitzOutcome { report, curve, fit })
}

/// Critical density seen by a finite box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteVolumeCritical {
    pub value: f64,
    pub stderr: f64,
    /// Box length of the last iteration.
    pub length: f64,
    pub iterations: usize,
}

/// Fixed point `ρ̂ = E[ρ_sat(L)]` with `L = N / (ratio·ρ̂)`, where
/// `ρ_sat(L) = L^{-1} Σ_{j≥2} B(E_j - E¹)` is the density the excited
/// levels can hold. A run at `ρ = ratio·ρ̂` then puts the fraction
/// `1 - 1/ratio` into the ground state on average.
///
/// Uses its own streams (cell indices from `1 << 24`), so it never reuses
/// the configurations of a run with the same seed.
pub fn finite_volume_critical_density(
    params: &ModelParameters,
    particles: u64,
    ratio: f64,
    realizations: usize,
    seed: u64,
    start: f64,
    iterations: usize,
) -> Result<FiniteVolumeCritical> {
    params.validate()?;
    require_positive("ratio", ratio)?;
    require_positive("start", start)?;
    if realizations < 2 {
        return Err(Error::param("realizations", "need at least 2 for a standard error"));
    }
    let opts = ThermoOptions::default();
    let mut est = FiniteVolumeCritical {
        value: start,
        stderr: f64::NAN,
        length: f64::NAN,
        iterations: 0,
    };
    for it in 0..iterations.max(1) {
        let length = particles as f64 / (ratio * est.value);
        let sat: Vec<f64> = (0..realizations)
            .into_par_iter()
            .map(|r| {
                let config = sample_realization(length, params.intensity, seed, stream((1 << 24) + it, r))?;
                let ts = ThermoSpectrum::measure(&config, params.strength, params.beta, &opts)?;
                Ok(ts.saturation_density(params.beta))
            })
            .collect::<Result<_>>()?;
        let (m, se) = mean_and_stderr(&sat);
        est = FiniteVolumeCritical {
            value: m,
            stderr: se,
            length,
            iterations: it + 1,
        };
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_for_the_default_choice() {
        let c = TheoremConstants::default();
        assert!((c.c1(1.0) - 1.0 / (4.0 * 4f64.ln())).abs() < 1e-15);
        assert_eq!(c.c3(1.0), 179);
        assert!(TheoremConstants { eta: 3.0, ..c }.validate().is_err());
        assert!(TheoremConstants { c2: 2.0, ..c }.validate().is_err());
        assert!(c.e_tilde(1.0, 10.0).is_err());
        assert!(c.e_tilde(1.0, 1e4).unwrap() > c.ground_bound(1.0, 1e4).unwrap());
    }

    #[test]
    fn rho0_extrapolates_linearly() {
        let v = rho0_estimate(2.0, &[1.0, 2.0], &[0.5, 0.6]);
        assert!((v - 0.8).abs() < 1e-15);
        assert_eq!(rho0_estimate(2.0, &[1.0], &[0.5]), 1.0);
    }

    #[test]
    fn csv_uses_seventeen_digits() {
        let p = ModelParameters {
            intensity: 1.0,
            strength: 5.0,
            beta: 1.0,
            density: 1.0,
            particles: 10,
        };
        let mut r = ExperimentReport::new("x", &Ensemble::new(p, vec![10], 2, 1), None);
        r.push(10, 10.0, "s", 1.0 / 3.0, 0.0, 2);
        let body = r.csv_body();
        assert!(body.ends_with("10,1.0000000000000000e1,s,3.3333333333333331e-1,0.0000000000000000e0,2\n"));
        assert!(r.to_csv().starts_with("# {"));
    }

    #[test]
    fn small_bec_run_is_consistent() {
        let p = ModelParameters {
            intensity: 1.0,
            strength: 5.0,
            beta: 1.0,
            density: 0.5,
            particles: 50,
        };
        let ens = Ensemble::new(p, vec![50], 4, 3);
        let r = run_bec_experiment(&ens, &TheoremConstants::default(), &[1e-4, 1e-3, 1.0], 0.1).unwrap();
        assert_eq!(r.value(50, "sum_rule_violations"), Some(0.0));
        assert_eq!(r.value(50, "n1_recompute_mismatches"), Some(0.0));
        let again = run_bec_experiment(&ens, &TheoremConstants::default(), &[1e-4, 1e-3, 1.0], 0.1).unwrap();
        assert_eq!(r.csv_body(), again.csv_body());
    }
}
