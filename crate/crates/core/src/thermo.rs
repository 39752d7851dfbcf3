//! Grand-canonical ideal Bose gas on one realization.
//!
//! Occupations are `n_j = B(E_j - μ)` with the Bose function `B`. The
//! explicitly resolved levels are summed directly; everything above them is
//! either bounded with free Dirichlet levels (which lie below the true ones)
//! or, for long boxes, integrated against the Sturm counting function:
//!
//! `Σ_{a ≤ E_j < b} f(E_j) = f(b)N(b) - f(a)N(a) - ∫_a^b N(E) f'(E) dE`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::numeric::{gauss_legendre, integrate};
use crate::sampler::ImpurityConfiguration;
use crate::spectrum::{
    eigenvalues_with_options, lowest_levels_windowed, LevelRequest, Segment, SolverOptions, Spectrum,
    WindowOptions,
};

/// Below this `βE` the series `1/(βE) - 1/2 + βE/12` replaces the exponential.
const SMALL_ARGUMENT: f64 = 1e-8;

/// Bose function `(e^{βE} - 1)^{-1}` for `E > 0`, zero otherwise.
pub fn bose(energy: f64, beta: f64) -> f64 {
    let x = beta * energy;
    if x <= 0.0 {
        0.0
    } else if x < SMALL_ARGUMENT {
        1.0 / x - 0.5 + x / 12.0
    } else {
        1.0 / x.exp_m1()
    }
}

/// `d/dE B(E) = -β B (1 + B)`.
fn bose_derivative(energy: f64, beta: f64) -> f64 {
    let b = bose(energy, beta);
    -beta * b * (1.0 + b)
}

/// Upper bound on `Σ_{j > j0} f(max(e0, (jπ/L)²))` for a decreasing `f`:
/// the true levels above the resolved part lie above both `e0` and the
/// free Dirichlet levels.
fn free_tail(f: &dyn Fn(f64) -> f64, e0: f64, j0: u64, length: f64) -> f64 {
    let j_c = (length * e0.max(0.0).sqrt() / PI).floor() as u64;
    let mut total = 0.0;
    if j_c > j0 {
        total += (j_c - j0) as f64 * f(e0);
    }
    let start = j0.max(j_c) + 1;
    let k0 = start as f64 * PI / length;
    let first = f(k0 * k0);
    if first <= 0.0 {
        return total;
    }
    // Σ_{j ≥ start} h(j) ≤ h(start) + ∫_start^∞ h, h decreasing
    let g = |k: f64| f(k * k);
    let mut span = 1.0 / k0.max(1.0);
    while g(k0 + span) > 1e-18 * first && span < 1e6 {
        span *= 2.0;
    }
    let q = integrate(g, k0, k0 + span, &[], 1e-300, 1e-12, 200);
    total + first + length / PI * q.value
}

/// Counting function of a long box sampled on fixed Gauss–Legendre panels
/// over `[lower, upper]`, for sums of smooth decreasing weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkSpectrum {
    lower: f64,
    lower_count: u64,
    upper: f64,
    upper_count: u64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    counts: Vec<u64>,
}

impl BulkSpectrum {
    /// Panels start at width `first_panel` above `lower`, double, and are
    /// capped at `max_panel`.
    pub(crate) fn measure(
        seg: &Segment<'_>,
        (lower, lower_count): (f64, u64),
        upper: f64,
        first_panel: f64,
        max_panel: f64,
        points: usize,
    ) -> Self {
        let (x, w) = gauss_legendre(points);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut a = lower;
        let mut h = first_panel.min(max_panel);
        while a < upper {
            let b = (a + h).min(upper);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(mid + half * xi);
                weights.push(half * wi);
            }
            a = b;
            h = (2.0 * h).min(max_panel);
        }
        let mut energies = nodes.clone();
        energies.push(upper);
        let mut counts = seg.count_many(&energies);
        let upper_count = counts.pop().expect("upper count present");
        Self {
            lower,
            lower_count,
            upper,
            upper_count,
            nodes,
            weights,
            counts,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Levels strictly below `upper`.
    pub fn upper_count(&self) -> u64 {
        self.upper_count
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// `Σ_{lower ≤ E_j < upper} f(E_j)` by parts; `df` is `f'`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> f64 {
        let boundary = f(self.upper) * self.upper_count as f64 - f(self.lower) * self.lower_count as f64;
        let mut body = 0.0;
        for ((e, w), n) in self.nodes.iter().zip(&self.weights).zip(&self.counts) {
            body += w * *n as f64 * df(*e);
        }
        boundary - body
    }

    /// Sampled counting function `(E, N(E))` at the quadrature nodes.
    pub fn samples(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.nodes.iter().copied().zip(self.counts.iter().copied())
    }
}

/// Everything the grand-canonical solve needs about one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoSpectrum {
    spectrum: Spectrum,
    bulk: Option<BulkSpectrum>,
    box_length: f64,
}

/// How [`ThermoSpectrum::measure`] resolves a realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoOptions {
    /// Levels resolved one by one at the bottom of the spectrum.
    pub explicit_levels: usize,
    /// Spectrum is covered up to `E¹ + span/β`; beyond it the free tail bound.
    pub span: f64,
    /// Resolve every level below `E¹ + span/β` when there are at most this many.
    pub exact_limit: usize,
    /// Gauss–Legendre points per bulk panel.
    pub panel_points: usize,
    /// Widest bulk panel in units of `1/β`.
    pub max_panel: f64,
    pub solver: SolverOptions,
    pub window: WindowOptions,
}

impl Default for ThermoOptions {
    fn default() -> Self {
        Self {
            explicit_levels: 512,
            span: 40.0,
            exact_limit: 1024,
            panel_points: 8,
            max_panel: 8.0,
            solver: SolverOptions::default(),
            window: WindowOptions::default(),
        }
    }
}

impl ThermoSpectrum {
    /// Fully resolved levels with the free tail above the cutoff.
    pub fn exact(spectrum: Spectrum, box_length: f64) -> Result<Self> {
        require_positive("box_length", box_length)?;
        if spectrum.is_empty() {
            return Err(Error::InsufficientSpectrum("no levels".into()));
        }
        Ok(Self {
            spectrum,
            bulk: None,
            box_length,
        })
    }

    /// Resolves a realization for temperature `1/beta`.
    pub fn measure(config: &ImpurityConfiguration, gamma: f64, beta: f64, opts: &ThermoOptions) -> Result<Self> {
        require_positive("gamma", gamma)?;
        require_positive("beta", beta)?;
        let seg = Segment::whole(config, gamma);
        let low = lowest_levels_windowed(config, gamma, opts.explicit_levels, &opts.solver, &opts.window)?;
        if !low.complete_below_cutoff() {
            return Err(Error::InsufficientSpectrum(
                "low-lying levels failed the count certificate".into(),
            ));
        }
        let e1 = low.ground().expect("at least one level");
        let upper = e1 + opts.span / beta;
        if upper <= low.energy_cutoff() {
            return Self::exact(low, config.box_length());
        }
        let c_up = seg.count(upper);
        if c_up as usize <= opts.exact_limit {
            let full = eigenvalues_with_options(config, gamma, LevelRequest::Below(upper), &opts.solver)?;
            return Self::exact(full, config.box_length());
        }
        let lower = (low.energy_cutoff(), low.len() as u64);
        let first = 0.5 * (lower.0 - e1).max(1e-3 * lower.0);
        let bulk = BulkSpectrum::measure(&seg, lower, upper, first, opts.max_panel / beta, opts.panel_points);
        Ok(Self {
            spectrum: low,
            bulk: Some(bulk),
            box_length: config.box_length(),
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn bulk(&self) -> Option<&BulkSpectrum> {
        self.bulk.as_ref()
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn ground(&self) -> f64 {
        self.spectrum.eigenvalues()[0]
    }

    /// Resolved levels.
    pub fn levels(&self) -> &[f64] {
        self.spectrum.eigenvalues()
    }

    /// Energy up to which the counting function is known.
    pub fn coverage(&self) -> f64 {
        self.bulk.as_ref().map_or(self.spectrum.energy_cutoff(), |b| b.upper)
    }

    /// `Σ f(E_j)` over all levels not listed in [`Self::levels`], split into
    /// the counted bulk and the free-level tail bound.
    fn remainder(&self, f: &dyn Fn(f64) -> f64, df: &dyn Fn(f64) -> f64) -> (f64, f64) {
        match &self.bulk {
            None => {
                let tail = free_tail(f, self.spectrum.energy_cutoff(), self.spectrum.len() as u64, self.box_length);
                (0.0, tail)
            }
            Some(b) => {
                let body = b.integrate(f, df);
                let tail = free_tail(f, b.upper, b.upper_count, self.box_length);
                (body, tail)
            }
        }
    }

    /// `(Σ_listed B(E_j - μ), bulk, tail)`.
    pub fn occupation_parts(&self, mu: f64, beta: f64) -> (f64, f64, f64) {
        let listed: f64 = self.levels().iter().map(|&e| bose(e - mu, beta)).sum();
        let f = |e: f64| bose(e - mu, beta);
        let df = |e: f64| bose_derivative(e - mu, beta);
        let (bulk, tail) = self.remainder(&f, &df);
        (listed, bulk, tail)
    }

    /// Particles per length that the excited levels hold as `μ → E¹`:
    /// `L^{-1} Σ_{j ≥ 2} B(E_j - E¹)`. A density above it forces the excess
    /// into the ground state.
    pub fn saturation_density(&self, beta: f64) -> f64 {
        let (a, b, c) = self.occupation_parts(self.ground(), beta);
        (a + b + c) / self.box_length
    }

    /// `L^{-1} Σ e^{-βE_j}` with the tail bound as error.
    pub fn heat_trace(&self, beta: f64) -> HeatTrace {
        let listed: f64 = self.levels().iter().map(|&e| (-beta * e).exp()).sum();
        let f = |e: f64| (-beta * e).exp();
        let df = |e: f64| -beta * (-beta * e).exp();
        let (bulk, tail) = self.remainder(&f, &df);
        HeatTrace {
            value: (listed + bulk) / self.box_length,
            tail_bound: tail / self.box_length,
        }
    }
}

/// `L^{-1} Σ_j e^{-βE_j}` and the bound on the unresolved part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatTrace {
    pub value: f64,
    pub tail_bound: f64,
}

/// Heat trace of a resolved spectrum; the free-level tail must stay below
/// `1e-12` of the value.
pub fn heat_trace(spectrum: &Spectrum, beta: f64, box_length: f64) -> Result<HeatTrace> {
    require_positive("beta", beta)?;
    let h = ThermoSpectrum::exact(spectrum.clone(), box_length)?.heat_trace(beta);
    if h.tail_bound > 1e-12 * h.value {
        return Err(Error::InsufficientSpectrum(format!(
            "heat-trace tail {:.3e} exceeds 1e-12 of {:.3e}; raise the cutoff",
            h.tail_bound, h.value
        )));
    }
    Ok(h)
}

/// Chemical potential of a resolved spectrum (free tail above the cutoff).
pub fn solve_chemical_potential(spectrum: &Spectrum, beta: f64, particles: u64, box_length: f64) -> Result<f64> {
    let ts = ThermoSpectrum::exact(spectrum.clone(), box_length)?;
    Ok(solve_mu(&ts, beta, particles)?.mu)
}

/// Outcome of a chemical-potential solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuSolution {
    pub mu: f64,
    pub listed: f64,
    pub bulk: f64,
    pub tail: f64,
}

impl MuSolution {
    pub fn total(&self) -> f64 {
        self.listed + self.bulk + self.tail
    }
}

/// Unique `μ < E¹` with `Σ_j B(E_j - μ) = N`, bisected in `ln(E¹ - μ)`.
pub fn solve_mu(ts: &ThermoSpectrum, beta: f64, particles: u64) -> Result<MuSolution> {
    require_positive("beta", beta)?;
    if particles == 0 {
        return Err(Error::param("particles", "must be at least 1"));
    }
    let n = particles as f64;
    let e1 = ts.ground();
    let total = |x: f64| {
        let mu = e1 - x.exp();
        let (a, b, c) = ts.occupation_parts(mu, beta);
        a + b + c
    };
    // ground level alone holds N at E¹ - μ = ln(1 + 1/N)/β
    let x_hi = ((1.0 + 1.0 / n).ln() / beta).ln();
    let mut x_lo = x_hi;
    let mut steps = 0;
    while total(x_lo) >= n {
        x_lo += 1.0;
        steps += 1;
        if steps > 200 {
            return Err(Error::Convergence("no lower bracket for the chemical potential".into()));
        }
    }
    let mut x_hi = x_hi;
    if x_lo == x_hi {
        x_hi -= 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (x_lo + x_hi);
        if mid <= x_hi.min(x_lo) || mid >= x_lo.max(x_hi) {
            break;
        }
        let t = total(mid);
        if (t - n).abs() <= 1e-12 * n {
            x_lo = mid;
            x_hi = mid;
            break;
        }
        // total decreases in x
        if t > n {
            x_hi = mid;
        } else {
            x_lo = mid;
        }
        if (x_lo - x_hi).abs() < 1e-15 {
            break;
        }
    }
    let mu = e1 - (0.5 * (x_lo + x_hi)).exp();
    let (listed, bulk, tail) = ts.occupation_parts(mu, beta);
    let sol = MuSolution { mu, listed, bulk, tail };
    if ts.bulk.is_none() && tail > 1e-10 * n {
        return Err(Error::InsufficientSpectrum(format!(
            "tail occupation {tail:.3e} exceeds 1e-10·N; raise the cutoff"
        )));
    }
    if (sol.total() - n).abs() > 1e-8 * n {
        return Err(Error::Convergence(format!(
            "particle sum {} misses N = {n}",
            sol.total()
        )));
    }
    Ok(sol)
}

/// `n_j = B(E_j - μ)` for every listed level.
pub fn occupations(spectrum: &Spectrum, mu: f64, beta: f64) -> Result<Vec<f64>> {
    occupations_of(spectrum.eigenvalues(), mu, beta)
}

fn occupations_of(levels: &[f64], mu: f64, beta: f64) -> Result<Vec<f64>> {
    require_positive("beta", beta)?;
    match levels.first() {
        Some(&e1) if mu >= e1 => Err(Error::Domain(format!("μ = {mu} is not below E¹ = {e1}"))),
        _ => Ok(levels.iter().map(|&e| bose(e - mu, beta)).collect()),
    }
}

/// `ε ↦ N^{-1} Σ_{E_j - E¹ ≤ ε} n_j` over the given levels.
pub fn condensate_profile(levels: &[f64], occupations: &[f64], particles: u64, epsilons: &[f64]) -> Vec<ProfilePoint> {
    let n = particles as f64;
    let e1 = levels.first().copied().unwrap_or(0.0);
    epsilons
        .iter()
        .map(|&eps| {
            let upto = levels.partition_point(|&e| e - e1 <= eps);
            ProfilePoint {
                epsilon: eps,
                fraction: occupations[..upto].iter().sum::<f64>() / n,
                levels: upto,
            }
        })
        .collect()
}

/// Default ε grid `{1e-4, 1e-3, 1e-2, 1e-1, 1}·E¹`.
pub fn default_epsilons(ground: f64) -> Vec<f64> {
    (0..5).map(|i| ground * 10f64.powi(i - 4)).collect()
}

/// One point of the condensate profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub epsilon: f64,
    pub fraction: f64,
    /// Levels inside the window.
    pub levels: usize,
}

/// Grand-canonical state of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoState {
    pub mu: f64,
    pub beta: f64,
    pub particles: u64,
    pub ground: f64,
    /// Occupations of the resolved levels, in level order.
    pub occupations: Vec<f64>,
    /// Particles outside the resolved levels (bulk plus tail).
    pub unresolved: f64,
    pub total: f64,
    pub condensate_fraction_eps: Vec<ProfilePoint>,
    /// Top of the resolved window; profile points reaching past it only
    /// count resolved levels.
    pub resolved_up_to: f64,
}

impl ThermoState {
    /// Solves for μ and collects the occupation diagnostics.
    pub fn compute(ts: &ThermoSpectrum, beta: f64, particles: u64, epsilons: Option<&[f64]>) -> Result<Self> {
        let sol = solve_mu(ts, beta, particles)?;
        let occupations = occupations_of(ts.levels(), sol.mu, beta)?;
        let ground = ts.ground();
        let default;
        let eps = match epsilons {
            Some(e) => e,
            None => {
                default = default_epsilons(ground);
                &default
            }
        };
        let profile = condensate_profile(ts.levels(), &occupations, particles, eps);
        Ok(Self {
            mu: sol.mu,
            beta,
            particles,
            ground,
            occupations,
            unresolved: sol.bulk + sol.tail,
            total: sol.total(),
            condensate_fraction_eps: profile,
            resolved_up_to: ts.spectrum().energy_cutoff(),
        })
    }

    /// `n_j / N` for a 1-based level index, if resolved.
    pub fn level_fraction(&self, j: usize) -> Option<f64> {
        j.checked_sub(1)
            .and_then(|i| self.occupations.get(i))
            .map(|n| n / self.particles as f64)
    }

    pub fn ground_fraction(&self) -> f64 {
        self.occupations[0] / self.particles as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("thermo state is always serializable")
    }

    /// CSV rows `realization_id,j,E_j,n_j` (no header).
    pub fn occupation_csv_rows(&self, realization_id: u64, levels: &[f64]) -> String {
        let mut out = String::new();
        for (j, (e, n)) in levels.iter().zip(&self.occupations).enumerate() {
            out.push_str(&format!("{realization_id},{},{e:.16e},{n:.16e}\n", j + 1));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::configuration_from_points;

    fn spec(levels: &[f64], cutoff: f64) -> Spectrum {
        Spectrum::new(levels.to_vec(), cutoff, true).unwrap()
    }

    #[test]
    fn bose_examples() {
        assert!((bose(2f64.ln(), 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(bose(-5.0, 1.0), 0.0);
        assert!((bose(1.5f64.ln(), 1.0) - 2.0).abs() < 1e-14);
        let x = 1e-12;
        assert!((bose(x, 1.0) / (1.0 / x - 0.5) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn profile_arithmetic() {
        let p = condensate_profile(&[1.0, 2.0], &[3.0, 1.0], 4, &[0.5, 0.0, 5.0]);
        assert_eq!(p[0].fraction, 0.75);
        assert_eq!(p[1].fraction, 0.75);
        assert_eq!(p[2].fraction, 1.0);
    }

    #[test]
    fn occupations_examples() {
        let s = spec(&[1.0, 2.0], 2.5);
        let n = occupations(&s, 0.0, 1.0).unwrap();
        assert!((n[0] - 1.0 / (1f64.exp() - 1.0)).abs() < 1e-15);
        assert!((n[1] - 1.0 / (2f64.exp() - 1.0)).abs() < 1e-15);
        assert!(matches!(occupations(&s, 1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn free_tail_bounds_direct_sum() {
        // free levels of L = 10 above j = 5, decreasing weight e^{-E}
        let f = |e: f64| (-e).exp();
        let direct: f64 = (6..10_000).map(|j| f((j as f64 * PI / 10.0).powi(2))).sum();
        let bound = free_tail(&f, 0.1, 5, 10.0);
        assert!(bound >= direct && bound < direct * 1.5 + 1e-3);
    }

    #[test]
    fn empty_box_heat_trace() {
        let c = configuration_from_points(&[], PI).unwrap();
        let s = crate::spectrum::eigenvalues(&c, 1.0, LevelRequest::Below(60.0)).unwrap();
        let h = heat_trace(&s, 1.0, PI).unwrap();
        let direct: f64 = (1..50).map(|j: i32| (-(j * j) as f64).exp()).sum::<f64>() / PI;
        assert!((h.value - direct).abs() < 1e-12);
        assert!(h.value < (4.0 * PI).powf(-0.5));
    }
}
