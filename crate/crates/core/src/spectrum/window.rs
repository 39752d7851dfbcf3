//! Low-lying levels of very long boxes from overlapping local windows.
//!
//! Below the spectral bulk the eigenfunctions are exponentially localized,
//! so a level whose state sits well inside a window is reproduced by the
//! Dirichlet problem on that window up to `e^{-2·margin/ξ}`. The box is cut
//! into disjoint cells; every cell is solved on the cell widened by a margin
//! on both sides, and a window level is kept only if its localization centre
//! lies in the cell. The union is certified against the global Sturm count.

use super::prufer::log_amplitudes;
use super::{Segment, SolverOptions, Spectrum};
use crate::error::{require_positive, Error, Result};
use crate::sampler::ImpurityConfiguration;

/// Window geometry. Lengths are in box units; `None` picks them from the
/// Lyapunov exponent at the target energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowOptions {
    pub margin: Option<f64>,
    pub cell: Option<f64>,
    /// Required decay `margin/ξ` when the margin is chosen automatically.
    pub decay_lengths: f64,
    /// Give up on windows (and solve globally) above this margin/box ratio.
    pub max_margin_fraction: f64,
}

impl Default for WindowOptions {
    fn default() -> Self {
        Self {
            margin: None,
            cell: None,
            decay_lengths: 24.0,
            max_margin_fraction: 0.05,
        }
    }
}

/// Lowest `count` levels of a long box.
///
/// Falls back to the global solver when the states are not localized on
/// the scale of the box or the windowed union fails the count certificate.
pub fn lowest_levels_windowed(
    config: &ImpurityConfiguration,
    gamma: f64,
    count: usize,
    opts: &SolverOptions,
    wopts: &WindowOptions,
) -> Result<Spectrum> {
    require_positive("gamma", gamma)?;
    if count == 0 {
        return Err(Error::param("levels", "must request at least one level"));
    }
    if count > opts.level_cap {
        return Err(Error::Resource(format!("{count} levels requested, cap is {}", opts.level_cap)));
    }
    let seg = Segment::whole(config, gamma);
    let target = count as u64 + 1;
    let (e_w, c_w) = energy_with_count(&seg, target);
    let levels = levels_below_windowed(config, gamma, e_w, c_w, opts, wopts)?;
    truncate_certified(&seg, levels, count)
}

/// Every level below `energy`, whose global count `expected` is known.
pub(crate) fn levels_below_windowed(
    config: &ImpurityConfiguration,
    gamma: f64,
    energy: f64,
    expected: u64,
    opts: &SolverOptions,
    wopts: &WindowOptions,
) -> Result<Vec<f64>> {
    if expected as usize > opts.level_cap {
        return Err(Error::Resource(format!(
            "{expected} levels below {energy}, cap is {}",
            opts.level_cap
        )));
    }
    let length = config.box_length();
    let margin = match wopts.margin {
        Some(m) => m,
        None => {
            let xi = localization_length(config, gamma, energy);
            wopts.decay_lengths * xi
        }
    };
    let global = |opts: &SolverOptions| -> Vec<f64> {
        let seg = Segment::whole(config, gamma);
        let mut out = Vec::with_capacity(expected as usize);
        seg.extract((0.0, 0), (energy, expected), expected, opts, &mut out);
        out
    };
    if !(margin.is_finite() && margin <= wopts.max_margin_fraction * length) {
        return Ok(global(opts));
    }
    let mut margin = margin;
    for _ in 0..3 {
        let cell = wopts.cell.unwrap_or(4.0 * margin).max(margin);
        let levels = collect_windows(config, gamma, energy, margin, cell, opts);
        if levels.len() as u64 == expected {
            return Ok(levels);
        }
        margin *= 2.0;
        if margin > wopts.max_margin_fraction * length {
            break;
        }
    }
    Ok(global(opts))
}

fn collect_windows(
    config: &ImpurityConfiguration,
    gamma: f64,
    energy: f64,
    margin: f64,
    cell: f64,
    opts: &SolverOptions,
) -> Vec<f64> {
    let (lo, hi) = (config.left_wall(), config.right_wall());
    let cells = ((hi - lo) / cell).ceil().max(1.0) as usize;
    let mut owned = Vec::new();
    let mut found = Vec::new();
    for i in 0..cells {
        let c_lo = lo + (hi - lo) * i as f64 / cells as f64;
        let c_hi = if i + 1 == cells { hi } else { lo + (hi - lo) * (i + 1) as f64 / cells as f64 };
        let w_lo = (c_lo - margin).max(lo);
        let w_hi = (c_hi + margin).min(hi);
        let seg = Segment {
            atoms: config.atoms_between(w_lo, w_hi),
            left: w_lo,
            right: w_hi,
            gamma,
        };
        let c = seg.count(energy);
        if c == 0 {
            continue;
        }
        found.clear();
        seg.extract((0.0, 0), (energy, c), c, opts, &mut found);
        for &e in &found {
            let centre = localization_centre(&seg, e);
            let last = i + 1 == cells;
            if centre >= c_lo && (centre < c_hi || last) {
                owned.push(e);
            }
        }
    }
    owned.sort_by(f64::total_cmp);
    owned
}

/// Midpoint of the free interval where the state at eigenvalue `e` peaks.
fn localization_centre(seg: &Segment<'_>, e: f64) -> f64 {
    let i = seg.peak_interval(e.sqrt());
    let m = seg.atoms.len();
    let a = if i == 0 { seg.left } else { seg.atoms[i - 1] };
    let b = if i == m { seg.right } else { seg.atoms[i] };
    0.5 * (a + b)
}

/// Inverse Lyapunov exponent of the transfer product at `energy`, measured
/// on a stretch of the box.
fn localization_length(config: &ImpurityConfiguration, gamma: f64, energy: f64) -> f64 {
    let lo = config.left_wall();
    let span = config.box_length().min(4000.0 / (config.atom_count().max(1) as f64 / config.box_length()));
    let atoms = config.atoms_between(lo, lo + span);
    if atoms.is_empty() {
        return f64::INFINITY;
    }
    let lr = log_amplitudes(atoms, lo, energy.sqrt(), gamma);
    let growth = lr[lr.len() - 1] / (atoms[atoms.len() - 1] - lo);
    if growth > 0.0 { 1.0 / growth } else { f64::INFINITY }
}

/// Some energy with global count at least `target`, close to the smallest.
fn energy_with_count(seg: &Segment<'_>, target: u64) -> (f64, u64) {
    let (mut hi, mut c_hi) = seg.upper_bracket(target);
    let mut lo = 0.0;
    // shrink while the bracket holds many more levels than needed
    for _ in 0..60 {
        if c_hi <= target + target / 4 + 2 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let c = seg.count(mid);
        if c >= target {
            hi = mid;
            c_hi = c;
        } else {
            lo = mid;
        }
    }
    (hi, c_hi)
}

/// Keeps the lowest `count` levels and places the cutoff between levels
/// `count` and `count + 1`, certified by one global count.
fn truncate_certified(seg: &Segment<'_>, mut levels: Vec<f64>, count: usize) -> Result<Spectrum> {
    if levels.len() <= count {
        return Err(Error::Convergence(format!(
            "windowed solve produced {} levels, needed {}",
            levels.len(),
            count + 1
        )));
    }
    let cutoff = 0.5 * (levels[count - 1] + levels[count]);
    levels.truncate(count);
    let complete = seg.count(cutoff) == count as u64;
    Spectrum::new(levels, cutoff, complete)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::sample_realization;
    use crate::spectrum::{eigenvalues, LevelRequest};

    #[test]
    fn windowed_matches_global_solver() {
        let c = sample_realization(3000.0, 1.0, 21, 0).unwrap();
        let exact = eigenvalues(&c, 5.0, LevelRequest::Lowest(40)).unwrap();
        let w = lowest_levels_windowed(&c, 5.0, 40, &SolverOptions::default(), &WindowOptions::default())
            .unwrap();
        assert!(w.complete_below_cutoff());
        for (a, b) in exact.eigenvalues().iter().zip(w.eigenvalues()) {
            assert!((a - b).abs() <= 1e-9 * a, "{a} {b}");
        }
    }

    #[test]
    fn weak_coupling_falls_back() {
        let c = sample_realization(200.0, 1.0, 3, 0).unwrap();
        let exact = eigenvalues(&c, 0.05, LevelRequest::Lowest(5)).unwrap();
        let w = lowest_levels_windowed(&c, 0.05, 5, &SolverOptions::default(), &WindowOptions::default())
            .unwrap();
        for (a, b) in exact.eigenvalues().iter().zip(w.eigenvalues()) {
            assert!((a - b).abs() <= 1e-9 * a);
        }
    }
}
