//! Dirichlet spectrum of `-d²/dx² + γ Σ δ(x - x_j)` on the box.
//!
//! Eigenvalues are isolated by bisection on the Sturm count and then refined
//! with Brent's method on the lifted Prüfer phase inside the certified
//! bracket, so no level can be skipped or duplicated.

mod oracles;
mod prufer;
mod window;

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::numeric::brent;
use crate::sampler::ImpurityConfiguration;

pub use oracles::{dirichlet_union_count, dirichlet_union_oracle, free_spectrum_oracle, single_delta_oracle};
pub use prufer::{apply_delta_kick, propagate_phase_interval, PhaseState};
pub use window::{lowest_levels_windowed, WindowOptions};

/// Default cap on the number of levels extracted from one realization.
pub const DEFAULT_LEVEL_CAP: usize = 10_000_000;

/// Sorted positive eigenvalues of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    energy_cutoff: f64,
    complete_below_cutoff: bool,
}

impl Spectrum {
    /// Checks positivity and ordering. Levels closer than the root tolerance
    /// may coincide, so only non-decreasing order is enforced.
    pub fn new(eigenvalues: Vec<f64>, energy_cutoff: f64, complete_below_cutoff: bool) -> Result<Self> {
        require_positive("energy_cutoff", energy_cutoff)?;
        if let Some(e) = eigenvalues.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::Validation(format!("eigenvalue {e} is not positive")));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Validation("eigenvalues not sorted".into()));
        }
        if eigenvalues.last().is_some_and(|&e| e >= energy_cutoff) {
            return Err(Error::Validation("eigenvalue at or above the cutoff".into()));
        }
        Ok(Self {
            eigenvalues,
            energy_cutoff,
            complete_below_cutoff,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn energy_cutoff(&self) -> f64 {
        self.energy_cutoff
    }

    pub fn complete_below_cutoff(&self) -> bool {
        self.complete_below_cutoff
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Ground-state energy `E¹`.
    pub fn ground(&self) -> Option<f64> {
        self.eigenvalues.first().copied()
    }

    /// Number of stored levels strictly below `energy`.
    pub fn count_below(&self, energy: f64) -> usize {
        self.eigenvalues.partition_point(|&e| e < energy)
    }

    /// CSV rows `realization_id,j,E_j` (no header), 17 significant digits.
    pub fn to_csv_rows(&self, realization_id: u64) -> String {
        let mut out = String::new();
        for (j, e) in self.eigenvalues.iter().enumerate() {
            out.push_str(&format!("{realization_id},{},{e:.16e}\n", j + 1));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spectrum is always serializable")
    }
}

/// Which part of the spectrum to compute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelRequest {
    /// The lowest `J` levels.
    Lowest(usize),
    /// Every level strictly below the energy.
    Below(f64),
}

/// Solver tolerances and safety limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub level_cap: usize,
    /// Absolute bracket width in energy.
    pub abs_tol: f64,
    /// Relative bracket width in energy.
    pub rel_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            level_cap: DEFAULT_LEVEL_CAP,
            abs_tol: 1e-12,
            rel_tol: 1e-10,
        }
    }
}

impl SolverOptions {
    fn energy_tol(&self, e: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * e)
    }
}

/// A Dirichlet interval `[left, right]` with the atoms strictly inside.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment<'a> {
    pub atoms: &'a [f64],
    pub left: f64,
    pub right: f64,
    pub gamma: f64,
}

impl<'a> Segment<'a> {
    pub fn whole(config: &'a ImpurityConfiguration, gamma: f64) -> Self {
        Self {
            atoms: config.atoms(),
            left: config.left_wall(),
            right: config.right_wall(),
            gamma,
        }
    }

    pub fn length(&self) -> f64 {
        self.right - self.left
    }

    /// `|{j : E_j < k²}|`.
    #[inline]
    pub fn count_k(&self, k: f64) -> u64 {
        if k <= 0.0 {
            return 0;
        }
        prufer::count_below_k(self.atoms, self.left, self.right, k, self.gamma)
    }

    #[inline]
    pub fn count(&self, energy: f64) -> u64 {
        if energy <= 0.0 { 0 } else { self.count_k(energy.sqrt()) }
    }

    /// Counts at many energies, four per sweep over the atoms.
    pub fn count_many(&self, energies: &[f64]) -> Vec<u64> {
        const LANES: usize = 8;
        let mut out = Vec::with_capacity(energies.len());
        for chunk in energies.chunks(LANES) {
            let mut ks = [1.0; LANES];
            for (k, e) in ks.iter_mut().zip(chunk) {
                *k = e.max(0.0).sqrt();
            }
            let positive = ks.iter().all(|&k| k > 0.0);
            if positive {
                let c = prufer::count_below_lanes(self.atoms, self.left, self.right, ks, self.gamma);
                out.extend_from_slice(&c[..chunk.len()]);
            } else {
                out.extend(chunk.iter().map(|&e| self.count(e)));
            }
        }
        out
    }

    #[inline]
    pub fn phase(&self, k: f64) -> PhaseState {
        prufer::shoot(self.atoms, self.left, self.right, k, self.gamma)
    }

    /// Index of the free interval (counted from the left) where the shots
    /// from both walls combine to the largest amplitude; either shot's
    /// instability is masked by the other.
    pub fn peak_interval(&self, k: f64) -> usize {
        let forward = prufer::log_amplitudes(self.atoms, self.left, k, self.gamma);
        let backward = prufer::log_amplitudes_back(self.atoms, self.right, k, self.gamma);
        let m = self.atoms.len();
        let mut best = (f64::NEG_INFINITY, 0usize);
        for i in 0..=m {
            let v = forward[i] + backward[m - i];
            if v > best.0 {
                best = (v, i);
            }
        }
        best.1
    }

    /// `θ_L(x) + θ_R(x) - jπ` at the midpoint `x` of free interval `i`,
    /// with both phases shot inwards from the walls. Zero exactly at the
    /// `j`-th level and smooth in `k` when `x` sits where that state lives.
    fn matched_offset(&self, k: f64, i: usize, j: u64) -> f64 {
        let m = self.atoms.len();
        let a = if i == 0 { self.left } else { self.atoms[i - 1] };
        let b = if i == m { self.right } else { self.atoms[i] };
        let x = 0.5 * (a + b);
        let fwd = prufer::shoot(&self.atoms[..i], self.left, x, k, self.gamma);
        let back = prufer::shoot_back(&self.atoms[i..], self.right, x, k, self.gamma);
        (fwd.branch() as i128 + back.branch() as i128 - j as i128) as f64 * std::f64::consts::PI
            + fwd.residual()
            + back.residual()
    }

    /// Energy above the `j`-th level: the `j`-th infinite-strength level
    /// bounds it from above, so a count there is at least `j`.
    pub fn upper_bracket(&self, j: u64) -> (f64, u64) {
        let mut gaps = Vec::with_capacity(self.atoms.len() + 1);
        let mut prev = self.left;
        for &a in self.atoms.iter().chain(std::iter::once(&self.right)) {
            gaps.push(a - prev);
            prev = a;
        }
        // smallest k with at least j union levels at or below k²
        let k_union = {
            let count_le = |k: f64| -> u64 {
                gaps.iter().map(|g| (g * k / std::f64::consts::PI).floor() as u64).sum()
            };
            let mut hi = j as f64 * std::f64::consts::PI / self.length();
            while count_le(hi) < j {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if count_le(mid) >= j { hi = mid } else { lo = mid }
            }
            hi
        };
        let mut e = (k_union * (1.0 + 1e-9)).powi(2) + 1e-300;
        loop {
            let c = self.count(e);
            if c >= j {
                return (e, c);
            }
            e *= 1.5;
        }
    }

    /// Levels with index in `first..=last` (1-based) inside `[e_lo, e_hi]`
    /// where the counts at the ends are `c_lo`, `c_hi`. Appends sorted
    /// levels to `out` and returns the energy above the last level whose
    /// count equals `last.min(c_hi)`.
    pub fn extract(
        &self,
        (e_lo, c_lo): (f64, u64),
        (e_hi, c_hi): (f64, u64),
        last: u64,
        opts: &SolverOptions,
        out: &mut Vec<f64>,
    ) -> f64 {
        let mut cutoff = e_hi;
        self.isolate(e_lo.max(0.0).sqrt(), c_lo, e_hi.sqrt(), c_hi, last, opts, out, &mut cutoff);
        cutoff
    }

    #[allow(clippy::too_many_arguments)]
    fn isolate(
        &self,
        k_lo: f64,
        c_lo: u64,
        k_hi: f64,
        c_hi: u64,
        last: u64,
        opts: &SolverOptions,
        out: &mut Vec<f64>,
        cutoff: &mut f64,
    ) {
        if c_hi <= c_lo || c_lo >= last {
            return;
        }
        if c_hi == c_lo + 1 {
            out.push(self.refine(k_lo, k_hi, c_hi, opts));
            if c_hi == last {
                *cutoff = k_hi * k_hi;
            }
            return;
        }
        let k_mid = 0.5 * (k_lo + k_hi);
        let width_e = (k_hi + k_lo) * (k_hi - k_lo);
        if width_e <= opts.energy_tol(k_mid * k_mid) || k_mid <= k_lo || k_mid >= k_hi {
            // cluster narrower than the tolerance: report with multiplicity
            let e = k_mid * k_mid;
            for j in c_lo + 1..=c_hi.min(last) {
                out.push(e);
                if j == last {
                    *cutoff = k_hi * k_hi;
                }
            }
            return;
        }
        let c_mid = self.count_k(k_mid);
        self.isolate(k_lo, c_lo, k_mid, c_mid, last, opts, out, cutoff);
        self.isolate(k_mid, c_mid, k_hi, c_hi, last, opts, out, cutoff);
    }

    /// Level `j` inside `(k_lo, k_hi)` where the count steps from `j-1` to `j`.
    fn refine(&self, mut k_lo: f64, mut k_hi: f64, j: u64, opts: &SolverOptions) -> f64 {
        // the phase is singular at k = 0; move the lower end off it by counting
        while k_lo <= 0.0 {
            let k = 0.5 * k_hi;
            if k <= f64::MIN_POSITIVE {
                return f64::MIN_POSITIVE;
            }
            if self.count_k(k) >= j {
                k_hi = k;
            } else {
                k_lo = k;
            }
        }
        let xtol = |k: f64| opts.energy_tol(k * k) / (2.0 * k.max(f64::MIN_POSITIVE));
        if self.atoms.len() > 1 {
            let i = self.peak_interval(0.5 * (k_lo + k_hi));
            let f = |k: f64| self.matched_offset(k, i, j);
            let (f_lo, f_hi) = (f(k_lo), f(k_hi));
            if f_lo < 0.0 && f_hi > 0.0 {
                let k = brent(f, k_lo, k_hi, f_lo, f_hi, xtol).clamp(k_lo, k_hi);
                return (k * k).max(f64::MIN_POSITIVE);
            }
        }
        let f = |k: f64| self.phase(k).offset_from_branch(j);
        let (f_lo, f_hi) = (f(k_lo), f(k_hi));
        let k = if f_lo < 0.0 && f_hi > 0.0 {
            brent(f, k_lo, k_hi, f_lo, f_hi, xtol)
        } else {
            // phase lands exactly on a node at an end point; fall back to counting
            let (lo, hi) = crate::numeric::bisect_predicate(
                |k| self.count_k(k) >= j,
                k_lo,
                k_hi,
                xtol(k_hi),
                400,
            );
            0.5 * (lo + hi)
        };
        let k = k.clamp(k_lo, k_hi);
        (k * k).max(f64::MIN_POSITIVE)
    }
}

/// `|{j : E_j < energy}|` by Sturm oscillation; `0` for `energy ≤ 0`.
pub fn count_eigenvalues_below(config: &ImpurityConfiguration, gamma: f64, energy: f64) -> u64 {
    debug_assert!(gamma > 0.0);
    Segment::whole(config, gamma).count(energy)
}

/// [`count_eigenvalues_below`] at several energies, sharing sweeps.
pub fn count_eigenvalues_below_many(config: &ImpurityConfiguration, gamma: f64, energies: &[f64]) -> Vec<u64> {
    debug_assert!(gamma > 0.0);
    Segment::whole(config, gamma).count_many(energies)
}

/// Eigenvalues with the default tolerances and level cap.
pub fn eigenvalues(config: &ImpurityConfiguration, gamma: f64, request: LevelRequest) -> Result<Spectrum> {
    eigenvalues_with_options(config, gamma, request, &SolverOptions::default())
}

pub fn eigenvalues_with_options(
    config: &ImpurityConfiguration,
    gamma: f64,
    request: LevelRequest,
    opts: &SolverOptions,
) -> Result<Spectrum> {
    require_positive("gamma", gamma)?;
    let seg = Segment::whole(config, gamma);
    match request {
        LevelRequest::Lowest(j) => {
            if j == 0 {
                return Err(Error::param("levels", "must request at least one level"));
            }
            if j > opts.level_cap {
                return Err(Error::Resource(format!(
                    "{j} levels requested, cap is {}",
                    opts.level_cap
                )));
            }
            let hi = seg.upper_bracket(j as u64);
            let mut out = Vec::with_capacity(j);
            let cutoff = seg.extract((0.0, 0), hi, j as u64, opts, &mut out);
            let complete = out.len() == j && seg.count(cutoff) == j as u64;
            Spectrum::new(out, cutoff, complete)
        }
        LevelRequest::Below(e_cut) => {
            require_positive("energy_cutoff", e_cut)?;
            let c = seg.count(e_cut);
            if c as usize > opts.level_cap {
                return Err(Error::Resource(format!(
                    "{c} levels below {e_cut}, cap is {}",
                    opts.level_cap
                )));
            }
            let mut out = Vec::with_capacity(c as usize);
            seg.extract((0.0, 0), (e_cut, c), c, opts, &mut out);
            let complete = out.len() as u64 == c;
            Spectrum::new(out, e_cut, complete)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{configuration_from_points, sample_realization};
    use std::f64::consts::PI;

    #[test]
    fn counting_examples() {
        let empty = configuration_from_points(&[], PI).unwrap();
        assert_eq!(count_eigenvalues_below(&empty, 3.0, 4.5), 2);
        assert_eq!(count_eigenvalues_below(&empty, 3.0, 0.0), 0);
        assert_eq!(count_eigenvalues_below(&empty, 3.0, -1.0), 0);
        // the first odd level is exactly 4π² ≈ 39.4784
        let one = configuration_from_points(&[0.0], 1.0).unwrap();
        let odd = 4.0 * PI * PI;
        assert_eq!(count_eigenvalues_below(&one, 10.0, odd - 1e-3), 1);
        assert_eq!(count_eigenvalues_below(&one, 10.0, 39.48), 2);
        let even = single_delta_oracle(1.0, 10.0, 1)[0];
        assert_eq!(count_eigenvalues_below(&one, 10.0, even * (1.0 - 1e-9)), 0);
        assert_eq!(count_eigenvalues_below(&one, 10.0, even * (1.0 + 1e-9)), 1);
    }

    #[test]
    fn free_box_levels() {
        let empty = configuration_from_points(&[], PI).unwrap();
        let s = eigenvalues(&empty, 1.0, LevelRequest::Lowest(3)).unwrap();
        for (e, x) in s.eigenvalues().iter().zip([1.0, 4.0, 9.0]) {
            assert!((e - x).abs() < 1e-9 * x);
        }
        assert!(s.complete_below_cutoff());
        assert_eq!(count_eigenvalues_below(&empty, 1.0, s.energy_cutoff()), 3);
    }

    #[test]
    fn below_request_matches_count() {
        let c = sample_realization(30.0, 1.0, 11, 0).unwrap();
        let s = eigenvalues(&c, 2.0, LevelRequest::Below(20.0)).unwrap();
        assert_eq!(s.len() as u64, count_eigenvalues_below(&c, 2.0, 20.0));
        assert!(s.complete_below_cutoff());
        assert!(s.eigenvalues().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn level_cap_is_enforced() {
        let c = configuration_from_points(&[], 1.0).unwrap();
        let opts = SolverOptions {
            level_cap: 5,
            ..Default::default()
        };
        assert!(matches!(
            eigenvalues_with_options(&c, 1.0, LevelRequest::Lowest(6), &opts),
            Err(Error::Resource(_))
        ));
        assert!(matches!(
            eigenvalues_with_options(&c, 1.0, LevelRequest::Below(1e4), &opts),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn csv_rows_are_replayable() {
        let c = configuration_from_points(&[], PI).unwrap();
        let s = eigenvalues(&c, 1.0, LevelRequest::Lowest(2)).unwrap();
        let rows = s.to_csv_rows(4);
        let first: Vec<&str> = rows.lines().next().unwrap().split(',').collect();
        assert_eq!(first[..2], ["4", "1"]);
        assert_eq!(first[2].parse::<f64>().unwrap(), s.eigenvalues()[0]);
    }
}
