//! Integrated density of states, Lifshitz-tail fits, critical density and
//! the subcritical chemical-potential limit.
//!
//! Bose integrals against the limiting IDS are always evaluated by parts,
//! `∫ B(E-μ) dN(E) = ∫ N(E) β e^{β(E-μ)} B(E-μ)² dE`, since only the
//! counting function is ever available.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::numeric::{integrate, mean_and_stderr, Quadrature};
use crate::sampler::{sample_realization, ModelParameters};
use crate::spectrum::{count_eigenvalues_below_many, Spectrum};

/// Ensemble (or single-realization) IDS on an energy grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsCurve {
    pub energies: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub realizations_used: usize,
}

impl IdsCurve {
    /// Checks grid order, monotone values and the free bound `√E/π`.
    pub fn new(energies: Vec<f64>, values: Vec<f64>, stderr: Vec<f64>, realizations_used: usize) -> Result<Self> {
        if energies.len() != values.len() || values.len() != stderr.len() {
            return Err(Error::Validation("curve columns differ in length".into()));
        }
        if energies.windows(2).any(|w| w[1] <= w[0]) || energies.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::Validation("energy grid must be positive and increasing".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0)) || values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Validation("IDS values must be non-negative and non-decreasing".into()));
        }
        if let Some((e, v)) = energies
            .iter()
            .zip(&values)
            .find(|(e, v)| **v > free_ids(**e) * (1.0 + 1e-12))
        {
            return Err(Error::Validation(format!("IDS {v} at E = {e} exceeds the free bound")));
        }
        Ok(Self {
            energies,
            values,
            stderr,
            realizations_used,
        })
    }

    /// CSV with header `E,mean,stderr,n_realizations`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("E,mean,stderr,n_realizations\n");
        for i in 0..self.energies.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{}\n",
                self.energies[i], self.values[i], self.stderr[i], self.realizations_used
            ));
        }
        out
    }

    /// Energies where the curve first reaches `lo` and last stays at or
    /// below `hi`.
    pub fn value_window(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let inside: Vec<f64> = self
            .energies
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| **v >= lo && **v <= hi)
            .map(|(e, _)| *e)
            .collect();
        Some((*inside.first()?, *inside.last()?))
    }
}

/// IDS of the Dirichlet Laplacian on the line, `√E/π`.
pub fn free_ids(energy: f64) -> f64 {
    if energy > 0.0 { energy.sqrt() / PI } else { 0.0 }
}

/// Single realization: `|{j : E_j < E}| / L`.
pub fn finite_ids(spectrum: &Spectrum, box_length: f64, grid: &[f64]) -> Result<IdsCurve> {
    require_positive("box_length", box_length)?;
    if let Some(&top) = grid.last() {
        if top > spectrum.energy_cutoff() || !spectrum.complete_below_cutoff() {
            return Err(Error::InsufficientSpectrum(format!(
                "grid reaches {top}, spectrum is complete only below {}",
                spectrum.energy_cutoff()
            )));
        }
    }
    let values = grid
        .iter()
        .map(|&e| spectrum.count_below(e) as f64 / box_length)
        .collect();
    IdsCurve::new(grid.to_vec(), values, vec![0.0; grid.len()], 1)
}

/// Per-realization IDS values on `grid` for realizations `0..R` of `seed`
/// in boxes of the given length.
pub fn realization_ids(
    length: f64,
    intensity: f64,
    gamma: f64,
    grid: &[f64],
    realizations: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    require_positive("gamma", gamma)?;
    (0..realizations as u64)
        .into_par_iter()
        .map(|r| {
            let config = sample_realization(length, intensity, seed, r)?;
            let counts = count_eigenvalues_below_many(&config, gamma, grid);
            Ok(counts.into_iter().map(|c| c as f64 / length).collect())
        })
        .collect()
}

/// Pointwise ensemble mean and standard error at box length `N/ρ`.
pub fn ensemble_ids(params: &ModelParameters, grid: &[f64], realizations: usize, seed: u64) -> Result<IdsCurve> {
    params.validate()?;
    ensemble_ids_at_length(params.box_length(), params.intensity, params.strength, grid, realizations, seed)
}

/// [`ensemble_ids`] for an explicit box length.
pub fn ensemble_ids_at_length(
    length: f64,
    intensity: f64,
    gamma: f64,
    grid: &[f64],
    realizations: usize,
    seed: u64,
) -> Result<IdsCurve> {
    if realizations < 2 {
        return Err(Error::param("realizations", "need at least 2 for a standard error"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Validation("energy grid must be positive and increasing".into()));
    }
    let rows = realization_ids(length, intensity, gamma, grid, realizations, seed)?;
    let mut values = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    let mut column = vec![0.0; realizations];
    for i in 0..grid.len() {
        for (c, row) in column.iter_mut().zip(&rows) {
            *c = row[i];
        }
        let (m, s) = mean_and_stderr(&column);
        values.push(m);
        stderr.push(s);
    }
    IdsCurve::new(grid.to_vec(), values, stderr, realizations)
}

/// `ν x/(1-x)` with `x = e^{-νπ/√E}`: states per length when every atom is
/// an impenetrable wall and the gaps are independent exponential lengths.
pub fn limiting_ids_infinite_gamma(energy: f64, intensity: f64) -> f64 {
    if energy <= 0.0 {
        return 0.0;
    }
    let a = intensity * PI / energy.sqrt();
    // x/(1-x) = 1/(e^a - 1)
    intensity / a.exp_m1()
}

/// Least-squares line through `(−E^{-1/2}, ln N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifshitzFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    pub points: usize,
}

impl LifshitzFit {
    /// Normal-approximation confidence interval for the slope.
    pub fn slope_interval(&self, z: f64) -> (f64, f64) {
        (self.slope - z * self.slope_stderr, self.slope + z * self.slope_stderr)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("fit is always serializable")
    }
}

/// Fits `ln N(E) ≈ intercept - slope·E^{-1/2}` over grid points in
/// `[lo, hi]` with positive values.
pub fn lifshitz_fit(curve: &IdsCurve, (lo, hi): (f64, f64)) -> Result<LifshitzFit> {
    let pts: Vec<(f64, f64)> = curve
        .energies
        .iter()
        .zip(&curve.values)
        .filter(|(e, v)| **e >= lo && **e <= hi && **v > 0.0)
        .map(|(e, v)| (-1.0 / e.sqrt(), v.ln()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::Fit(format!("{} positive points in window, need 5", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("window holds a single energy".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 0.0 };
    let slope_stderr = if pts.len() > 2 { (ss_res / (n - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    Ok(LifshitzFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
        points: pts.len(),
    })
}

/// Limiting IDS used as input of the Bose integrals.
#[derive(Debug, Clone, PartialEq)]
pub enum IdsReference {
    /// Identically zero.
    Zero,
    /// Free Laplacian `√E/π`; its Bose integral diverges in one dimension.
    Free,
    /// Closed form for impenetrable atoms of intensity ν.
    InfiniteGamma { intensity: f64 },
    /// Tabulated curve, linear between grid points. Below the grid it is
    /// continued with the Lifshitz form through the two lowest positive
    /// points (or zero), above it with `N(E_max)·√(E/E_max)`.
    Curve(IdsCurve),
}

impl IdsReference {
    fn validate(&self) -> Result<()> {
        match self {
            IdsReference::InfiniteGamma { intensity } => require_positive("intensity", *intensity),
            IdsReference::Curve(c) => {
                IdsCurve::new(c.energies.clone(), c.values.clone(), c.stderr.clone(), c.realizations_used)?;
                if c.energies.is_empty() {
                    return Err(Error::Validation("empty IDS curve".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `N(E)` in states per length.
    pub fn value(&self, energy: f64) -> f64 {
        if energy <= 0.0 {
            return 0.0;
        }
        match self {
            IdsReference::Zero => 0.0,
            IdsReference::Free => free_ids(energy),
            IdsReference::InfiniteGamma { intensity } => limiting_ids_infinite_gamma(energy, *intensity),
            IdsReference::Curve(c) => interpolate_curve(c, energy),
        }
    }

    /// Interior kinks worth splitting quadrature at.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            IdsReference::Curve(c) => c.energies.clone(),
            _ => Vec::new(),
        }
    }
}

fn interpolate_curve(c: &IdsCurve, e: f64) -> f64 {
    let (es, vs) = (&c.energies, &c.values);
    let n = es.len();
    if e >= es[n - 1] {
        return vs[n - 1] * (e / es[n - 1]).sqrt();
    }
    if e < es[0] {
        // Lifshitz continuation from the lowest two positive points
        let pos: Vec<usize> = (0..n).filter(|&i| vs[i] > 0.0).take(2).collect();
        if pos.len() < 2 || pos[0] != 0 {
            return 0.0;
        }
        let (e0, e1) = (es[pos[0]], es[pos[1]]);
        let s = (vs[pos[1]] / vs[pos[0]]).ln() / (1.0 / e0.sqrt() - 1.0 / e1.sqrt());
        if !(s > 0.0) {
            return 0.0;
        }
        return vs[0] * (-s * (1.0 / e.sqrt() - 1.0 / e0.sqrt())).exp();
    }
    let i = es.partition_point(|&x| x <= e) - 1;
    let t = (e - es[i]) / (es[i + 1] - es[i]);
    vs[i] + t * (vs[i + 1] - vs[i])
}

/// `∫_0^∞ N(E) β e^{β(E-μ)} B(E-μ)² dE` for `μ ≤ 0`.
fn bose_integral(reference: &IdsReference, beta: f64, mu: f64) -> Result<Quadrature> {
    // β e^{βx} B(x)² = β / (4 sinh²(βx/2))
    let kernel = |e: f64| {
        let x = beta * (e - mu);
        if x <= 0.0 {
            return 0.0;
        }
        let s = (0.5 * x).sinh();
        if s.is_infinite() { 0.0 } else { beta / (4.0 * s * s) }
    };
    let f = |e: f64| reference.value(e) * kernel(e);

    // near the origin: dyadic shells [2^{-k-1}, 2^{-k}]·E_s, Cauchy test
    let split = 1.0 / beta;
    let mut shells = Vec::new();
    let mut small = 0.0;
    let mut err = 0.0;
    let mut top = split;
    for _ in 0..80 {
        let q = integrate(&f, 0.5 * top, top, &[], 1e-300, 1e-13, 200);
        shells.push(q.value);
        small += q.value;
        err += q.error;
        top *= 0.5;
        let k = shells.len();
        if k >= 12 && shells[k - 10..].windows(2).all(|w| w[1] >= w[0] && w[1] > 0.0) {
            return Err(Error::Divergent(
                "Bose integral does not converge at the spectral bottom".into(),
            ));
        }
        if k >= 4 && q.value <= 1e-17 * small.max(f64::MIN_POSITIVE) {
            break;
        }
        if k >= 4 && small == 0.0 && q.value == 0.0 {
            break;
        }
    }
    if shells.len() >= 80 && shells[shells.len() - 1] > 1e-15 * small {
        return Err(Error::Divergent("Bose integral does not converge at the spectral bottom".into()));
    }
    // above: the kernel decays like e^{-β(E-μ)}
    let mut upper = split;
    while f(upper) > 0.0 && beta * (upper - mu) < 745.0 && f(upper) * upper > 1e-18 * (small + 1e-300) {
        upper *= 2.0;
    }
    let bp: Vec<f64> = reference
        .breakpoints()
        .into_iter()
        .filter(|&e| e > split && e < upper)
        .collect();
    let q = integrate(&f, split, upper.max(2.0 * split), &bp, 1e-300, 1e-13, 4000);
    Ok(Quadrature {
        value: small + q.value,
        error: err + q.error,
    })
}

/// `ρ_c(β) = ∫ N(E) β e^{βE} B(E)² dE` with a quadrature error estimate.
pub fn critical_density(reference: &IdsReference, beta: f64) -> Result<Quadrature> {
    require_positive("beta", beta)?;
    reference.validate()?;
    bose_integral(reference, beta, 0.0)
}

/// Same integral by the trapezoidal rule on a fixed logarithmic grid of
/// `points` energies over `[1e-6, 200]/β`; an independent check of
/// [`critical_density`].
pub fn critical_density_log_grid(reference: &IdsReference, beta: f64, points: usize) -> Result<f64> {
    require_positive("beta", beta)?;
    reference.validate()?;
    let (a, b) = ((1e-6 / beta).ln(), (200.0 / beta).ln());
    let h = (b - a) / (points - 1) as f64;
    let g = |u: f64| {
        let e = u.exp();
        let x = beta * e;
        let s = (0.5 * x).sinh();
        reference.value(e) * beta / (4.0 * s * s) * e
    };
    let mut sum = 0.5 * (g(a) + g(b));
    for i in 1..points - 1 {
        sum += g(a + i as f64 * h);
    }
    Ok(sum * h)
}

/// `ρ(μ) = ∫ B(E-μ) dN(E)` for `μ < 0`.
pub fn subcritical_density(reference: &IdsReference, beta: f64, mu: f64) -> Result<f64> {
    require_positive("beta", beta)?;
    if mu >= 0.0 {
        return Err(Error::Domain(format!("μ = {mu} must be negative")));
    }
    Ok(bose_integral(reference, beta, mu)?.value)
}

/// The unique `μ̂ < 0` with `∫ B(E-μ̂) dN(E) = ρ`, for `ρ < ρ_c`.
pub fn solve_mu_hat(rho: f64, beta: f64, reference: &IdsReference) -> Result<f64> {
    require_positive("rho", rho)?;
    let rho_c = critical_density(reference, beta)?.value;
    if rho >= rho_c {
        return Err(Error::Domain(format!("ρ = {rho} is not below ρ_c = {rho_c}")));
    }
    let density = |mu: f64| bose_integral(reference, beta, mu).map(|q| q.value);
    // bracket in t = ln(-μ); density decreases in t
    let mut t_lo = (1e-12 / beta).ln();
    while density(-t_lo.exp())? < rho {
        t_lo -= 2.0;
        if t_lo < -60.0 {
            return Err(Error::Convergence("μ̂ bracket reached −0".into()));
        }
    }
    let mut t_hi = (1.0 / beta).ln();
    while density(-t_hi.exp())? > rho {
        t_hi += 1.0;
        if t_hi > 60.0 {
            return Err(Error::Convergence("μ̂ bracket diverged".into()));
        }
    }
    for _ in 0..200 {
        let t = 0.5 * (t_lo + t_hi);
        let d = density(-t.exp())?;
        if (d - rho).abs() <= 1e-12 * rho || t_hi - t_lo < 1e-15 {
            return Ok(-t.exp());
        }
        if d > rho {
            t_lo = t;
        } else {
            t_hi = t;
        }
    }
    Ok(-(0.5 * (t_lo + t_hi)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::configuration_from_points;
    use crate::spectrum::{eigenvalues, LevelRequest};

    #[test]
    fn finite_ids_examples() {
        let c = configuration_from_points(&[], PI).unwrap();
        let s = eigenvalues(&c, 1.0, LevelRequest::Below(20.0)).unwrap();
        let curve = finite_ids(&s, PI, &[1.0, 4.5, 10.0]).unwrap();
        assert_eq!(curve.values[0], 0.0);
        assert!((curve.values[1] - 2.0 / PI).abs() < 1e-15);
        assert!(finite_ids(&s, PI, &[30.0]).is_err());
    }

    #[test]
    fn infinite_gamma_closed_form() {
        let e = PI * PI;
        let x = (-1f64).exp();
        assert!((limiting_ids_infinite_gamma(e, 1.0) - x / (1.0 - x)).abs() < 1e-15);
        assert!((limiting_ids_infinite_gamma(e, 1.0) - 0.5820).abs() < 1e-4);
        assert!((limiting_ids_infinite_gamma(4.0 * e, 1.0) - 1.5415).abs() < 1e-4);
        assert_eq!(limiting_ids_infinite_gamma(0.0, 1.0), 0.0);
    }

    #[test]
    fn curve_rejects_free_bound_violation() {
        assert!(IdsCurve::new(vec![1.0], vec![0.5], vec![0.0], 1).is_err());
        assert!(IdsCurve::new(vec![1.0, 2.0], vec![0.2, 0.1], vec![0.0; 2], 1).is_err());
    }

    #[test]
    fn zero_reference_has_zero_density() {
        assert_eq!(critical_density(&IdsReference::Zero, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn free_reference_diverges() {
        assert!(matches!(
            critical_density(&IdsReference::Free, 1.0),
            Err(Error::Divergent(_))
        ));
    }
}
