//! Scaled Prüfer phase for `-φ'' + γ Σ δ(x - x_j) φ = k² φ`.
//!
//! With `φ = r sin θ` and `φ' = r k cos θ` the angle advances by exactly `kℓ`
//! across a free interval of length `ℓ`, and a delta of strength `γ` maps
//! `cot θ ↦ cot θ + γ/k` inside the current π-branch. The branch index is
//! kept as an integer next to a residual angle in `[0, π)`, so counting
//! π-crossings never compares a large floating angle against multiples of π.

use std::f64::consts::PI;

/// Largest `f64` strictly below π.
const BELOW_PI: f64 = f64::from_bits(PI.to_bits() - 1);

/// Residual angles at or below this are treated as a node of the solution.
pub(crate) const NODE_TOLERANCE: f64 = 1e-13;

/// Lifted Prüfer angle `θ = branch·π + residual` with `residual ∈ [0, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    branch: u64,
    residual: f64,
}

impl PhaseState {
    /// Dirichlet wall: `φ = 0`, `φ' > 0`.
    pub const WALL: PhaseState = PhaseState {
        branch: 0,
        residual: 0.0,
    };

    /// State with lifted angle `theta ≥ 0`.
    pub fn from_theta(theta: f64) -> Self {
        assert!(theta >= 0.0 && theta.is_finite(), "theta must be finite and non-negative");
        let branch = (theta / PI).floor();
        let residual = (theta - branch * PI).clamp(0.0, BELOW_PI);
        Self {
            branch: branch as u64,
            residual,
        }
    }

    pub fn branch(&self) -> u64 {
        self.branch
    }

    /// Angle inside the current branch, in `[0, π)`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Lifted angle. Loses absolute precision for very large branches; use
    /// [`Self::offset_from_branch`] when comparing against `jπ`.
    pub fn theta(&self) -> f64 {
        self.branch as f64 * PI + self.residual
    }

    /// `θ - jπ`, computed without forming `θ`.
    pub fn offset_from_branch(&self, j: u64) -> f64 {
        (self.branch as i128 - j as i128) as f64 * PI + self.residual
    }

    /// Free rotation over an interval of length `ell` at wavenumber `k`.
    #[inline]
    pub fn propagate(self, k: f64, ell: f64) -> Self {
        let total = self.residual + k * ell;
        let crossings = (total / PI).floor();
        let mut residual = total - crossings * PI;
        let mut crossings = crossings as u64;
        // rounding in `total - crossings*π` can land a hair outside [0, π)
        if residual < 0.0 {
            residual = 0.0;
        } else if residual >= PI {
            residual = 0.0;
            crossings += 1;
        }
        Self {
            branch: self.branch + crossings,
            residual,
        }
    }

    /// Derivative jump `φ'(x+) - φ'(x-) = γ φ(x)` at an atom. `g = γ / k`.
    #[inline]
    pub fn kick(self, g: f64) -> Self {
        let (s, c) = self.residual.sin_cos();
        let residual = s.atan2(c + g * s).min(BELOW_PI);
        Self {
            branch: self.branch,
            residual,
        }
    }
}

/// `θ ↦ θ + kℓ`, counting the π-multiples crossed.
pub fn propagate_phase_interval(state: PhaseState, k: f64, ell: f64) -> PhaseState {
    debug_assert!(k > 0.0 && ell >= 0.0);
    state.propagate(k, ell)
}

/// Delta kick of strength `gamma` at wavenumber `k`; the branch is preserved.
pub fn apply_delta_kick(state: PhaseState, k: f64, gamma: f64) -> PhaseState {
    debug_assert!(k > 0.0 && gamma > 0.0);
    state.kick(gamma / k)
}

/// Shoots from a Dirichlet wall at `left` to `right` through `atoms`
/// (sorted, strictly inside) and returns the final lifted phase.
///
/// Runs on the vector form of [`count_below_k`]; the residual angle is read
/// off the final vector.
#[inline]
pub(crate) fn shoot(atoms: &[f64], left: f64, right: f64, k: f64, gamma: f64) -> PhaseState {
    let gaps = atoms.iter().scan(left, |prev, &a| {
        let d = a - *prev;
        *prev = a;
        Some(d)
    });
    let last = right - atoms.last().copied().unwrap_or(left);
    shoot_over(gaps, last, k, gamma)
}

/// Shoots from a Dirichlet wall at `right` leftwards through `atoms` to
/// `stop`, in the mirrored frame where the motion is again left to right.
#[inline]
pub(crate) fn shoot_back(atoms: &[f64], right: f64, stop: f64, k: f64, gamma: f64) -> PhaseState {
    let gaps = atoms.iter().rev().scan(right, |prev, &a| {
        let d = *prev - a;
        *prev = a;
        Some(d)
    });
    let last = atoms.first().copied().unwrap_or(right) - stop;
    shoot_over(gaps, last, k, gamma)
}

#[inline]
fn shoot_over(gaps: impl Iterator<Item = f64>, last: f64, k: f64, gamma: f64) -> PhaseState {
    let g = gamma / k;
    let (mut branch, mut x, mut y) = (0u64, 0.0f64, 1.0f64);
    for (step, d) in gaps.enumerate() {
        rotate(&mut branch, &mut x, &mut y, k * d);
        y += g * x;
        if step % 32 == 31 {
            let scale = 1.0 / (x.abs() + y.abs());
            x *= scale;
            y *= scale;
        }
    }
    rotate(&mut branch, &mut x, &mut y, k * last);
    PhaseState {
        branch,
        residual: x.atan2(y).clamp(0.0, BELOW_PI),
    }
}

/// Number of Dirichlet eigenvalues strictly below `k²` on `[left, right]`.
///
/// Same recursion as [`shoot`], carried on the unnormalised vector
/// `v = (φ, φ'/k)` kept in the half plane `φ ≥ 0`: a free step is a plane
/// rotation, a kick is the shear `v₂ += (γ/k)·v₁`, and a π-crossing is a sign
/// flip of `v₁`. Only the integer part of each rotation needs `floor`; the
/// short dependency chain lets consecutive steps overlap.
#[inline]
pub(crate) fn count_below_k(atoms: &[f64], left: f64, right: f64, k: f64, gamma: f64) -> u64 {
    count_below_lanes(atoms, left, right, [k], gamma)[0]
}

/// [`count_below_k`] for `LANES` wavenumbers in one pass over the atoms.
pub(crate) fn count_below_lanes<const LANES: usize>(
    atoms: &[f64],
    left: f64,
    right: f64,
    ks: [f64; LANES],
    gamma: f64,
) -> [u64; LANES] {
    let g = ks.map(|k| gamma / k);
    let mut branch = [0u64; LANES];
    let mut x = [0.0f64; LANES];
    let mut y = [1.0f64; LANES];
    let mut prev = left;
    for (step, &a) in atoms.iter().enumerate() {
        let ell = a - prev;
        for i in 0..LANES {
            rotate(&mut branch[i], &mut x[i], &mut y[i], ks[i] * ell);
            y[i] += g[i] * x[i];
        }
        if step % 32 == 31 {
            for i in 0..LANES {
                let scale = 1.0 / (x[i].abs() + y[i].abs());
                x[i] *= scale;
                y[i] *= scale;
            }
        }
        prev = a;
    }
    let ell = right - prev;
    for i in 0..LANES {
        rotate(&mut branch[i], &mut x[i], &mut y[i], ks[i] * ell);
        // residual angle atan2(x, y) at or below the node tolerance
        if branch[i] > 0 && y[i] > 0.0 && x[i] <= NODE_TOLERANCE * y[i] {
            branch[i] -= 1;
        }
    }
    branch
}

/// Taylor coefficients of `sin t / t` and `cos t` in `t²`; truncation error
/// below `3e-16` on `|t| ≤ π/2`.
const SIN_TAYLOR: [f64; 10] = [
    1.0,
    -0.16666666666666666,
    0.008333333333333333,
    -0.0001984126984126984,
    2.7557319223985893e-06,
    -2.505210838544172e-08,
    1.6059043836821613e-10,
    -7.647163731819816e-13,
    2.8114572543455206e-15,
    -8.22063524662433e-18,
];
const COS_TAYLOR: [f64; 11] = [
    1.0,
    -0.5,
    0.041666666666666664,
    -0.001388888888888889,
    2.48015873015873e-05,
    -2.755731922398589e-07,
    2.08767569878681e-09,
    -1.1470745597729725e-11,
    4.779477332387385e-14,
    -1.5619206968586225e-16,
    4.110317623312165e-19,
];

/// `(sin r, cos r)` for `r ∈ [0, π]` by shifting to `t = r - π/2`. Inlines
/// and vectorizes across lanes, unlike the libm call.
#[inline(always)]
fn sin_cos_reduced(r: f64) -> (f64, f64) {
    let t = r - std::f64::consts::FRAC_PI_2;
    let t2 = t * t;
    let mut sp = SIN_TAYLOR[9];
    for &c in SIN_TAYLOR[..9].iter().rev() {
        sp = sp * t2 + c;
    }
    let mut cp = COS_TAYLOR[10];
    for &c in COS_TAYLOR[..10].iter().rev() {
        cp = cp * t2 + c;
    }
    (cp, -sp * t)
}

#[inline(always)]
fn rotate(branch: &mut u64, x: &mut f64, y: &mut f64, angle: f64) {
    let turns = (angle * std::f64::consts::FRAC_1_PI).floor();
    let r = angle - turns * PI;
    let (s, c) = sin_cos_reduced(r.clamp(0.0, PI));
    let nx = *x * c + *y * s;
    let ny = *y * c - *x * s;
    let cross = nx < 0.0 || (nx == 0.0 && ny < 0.0);
    let sign = if cross { -1.0 } else { 1.0 };
    *branch += turns as u64 + cross as u64;
    *x = sign * nx;
    *y = sign * ny;
}

/// Sturm count from a final phase; a final node means `k²` is itself an
/// eigenvalue, which the strict inequality excludes.
#[cfg(test)]
pub(crate) fn node_adjusted_count(state: PhaseState) -> u64 {
    if state.residual <= NODE_TOLERANCE && state.branch > 0 {
        state.branch - 1
    } else {
        state.branch
    }
}

/// `ln r` on each free interval of the shooting solution from `left`
/// (`atoms.len() + 1` values, the first interval normalised to `0`).
///
/// `r` is constant across a free interval; at an atom it is multiplied by
/// `sqrt(sin²θ + (cos θ + (γ/k) sin θ)²)`.
pub(crate) fn log_amplitudes(atoms: &[f64], left: f64, k: f64, gamma: f64) -> Vec<f64> {
    let gaps = atoms.iter().scan(left, |prev, &a| {
        let d = a - *prev;
        *prev = a;
        Some(d)
    });
    log_amplitudes_over(gaps, atoms.len(), k, gamma)
}

/// [`log_amplitudes`] shooting from `right` towards the left; entry `i`
/// belongs to the interval with `i` atoms to its right.
pub(crate) fn log_amplitudes_back(atoms: &[f64], right: f64, k: f64, gamma: f64) -> Vec<f64> {
    let gaps = atoms.iter().rev().scan(right, |prev, &a| {
        let d = *prev - a;
        *prev = a;
        Some(d)
    });
    log_amplitudes_over(gaps, atoms.len(), k, gamma)
}

fn log_amplitudes_over(gaps: impl Iterator<Item = f64>, m: usize, k: f64, gamma: f64) -> Vec<f64> {
    let g = gamma / k;
    let mut out = Vec::with_capacity(m + 1);
    let (mut branch, mut x, mut y) = (0u64, 0.0f64, 1.0f64);
    let mut log_scale = 0.0;
    out.push(0.0);
    for d in gaps {
        rotate(&mut branch, &mut x, &mut y, k * d);
        y += g * x;
        let norm2 = x * x + y * y;
        out.push(log_scale + 0.5 * norm2.ln());
        if !(1e-100..=1e100).contains(&norm2) {
            let norm = norm2.sqrt();
            x /= norm;
            y /= norm;
            log_scale += norm.ln();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transfer_kick_reference(theta: f64, k: f64, gamma: f64) -> f64 {
        // (φ, φ') ↦ (φ, φ' + γφ), then back to the scaled angle
        let (phi, dphi) = (theta.sin(), k * theta.cos());
        let dphi = dphi + gamma * phi;
        phi.atan2(dphi / k).rem_euclid(PI)
    }

    #[test]
    fn free_rotation_quarter_turn() {
        let s = propagate_phase_interval(PhaseState::WALL, 1.0, PI / 2.0);
        assert_eq!(s.branch(), 0);
        assert!((s.residual() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn free_rotation_two_crossings() {
        let s = propagate_phase_interval(PhaseState::from_theta(0.1), 2.0, PI);
        assert_eq!(s.branch(), 2);
        assert!((s.residual() - 0.1).abs() < 1e-14);
        assert!((s.theta() - (0.1 + 2.0 * PI)).abs() < 1e-13);
    }

    #[test]
    fn zero_length_is_identity() {
        let s = PhaseState::from_theta(7.3);
        assert_eq!(propagate_phase_interval(s, 3.0, 0.0), s);
    }

    #[test]
    fn kick_from_quarter_turn() {
        let s = apply_delta_kick(PhaseState::from_theta(PI / 2.0), 1.0, 1.0);
        assert_eq!(s.branch(), 0);
        assert!((s.residual() - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn kick_at_node_is_annihilated() {
        let s = PhaseState::from_theta(PI);
        assert_eq!(s.branch(), 1);
        let t = apply_delta_kick(s, 0.7, 5.0);
        assert_eq!(t, s);
    }

    #[test]
    fn kick_matches_transfer_matrix() {
        // cot θ' = cot(π/4) + γ/k = 2
        let s = apply_delta_kick(PhaseState::from_theta(PI / 4.0), 2.0, 2.0);
        let expect = transfer_kick_reference(PI / 4.0, 2.0, 2.0);
        assert!((s.residual() - expect).abs() < 1e-15);
        assert!((s.residual() - 0.463_647_609_000_806_1).abs() < 1e-15);
        assert_eq!(s.branch(), 0);
    }

    #[test]
    fn kick_never_leaves_branch() {
        for i in 1..200 {
            let r = i as f64 * PI / 200.0;
            let s = PhaseState { branch: 3, residual: r.min(BELOW_PI) };
            for g in [1e-9, 0.3, 4.0, 1e9] {
                let t = s.kick(g);
                assert_eq!(t.branch(), 3);
                assert!(t.residual() <= s.residual() + 1e-15);
                let expect = transfer_kick_reference(s.residual(), 1.0, g);
                assert!((t.residual() - expect).abs() < 1e-12, "{r} {g}");
            }
        }
    }

    #[test]
    fn amplitude_matches_transfer_matrix() {
        let atoms = [0.3, 0.9, 1.4];
        let (k, gamma) = (1.7, 2.5);
        let lr = log_amplitudes(&atoms, 0.0, k, gamma);
        // explicit (φ, φ'/k) propagation
        let (mut p, mut q) = (0.0f64, 1.0f64);
        let mut prev = 0.0;
        for (i, &a) in atoms.iter().enumerate() {
            let (s, c) = (k * (a - prev)).sin_cos();
            (p, q) = (p * c + q * s, -p * s + q * c);
            q += gamma / k * p;
            assert!((lr[i + 1] - (p * p + q * q).sqrt().ln()).abs() < 1e-12);
            prev = a;
        }
    }

    #[test]
    fn cotangent_count_agrees_with_phase() {
        let atoms = [-1.3, -0.2, 0.05, 0.4, 1.9, 2.2];
        for gamma in [0.1, 1.0, 30.0] {
            for i in 1..400 {
                let k = 0.037 * i as f64;
                let phase = node_adjusted_count(shoot(&atoms, -2.5, 2.5, k, gamma));
                assert_eq!(count_below_k(&atoms, -2.5, 2.5, k, gamma), phase, "{gamma} {k}");
            }
        }
    }

    #[test]
    fn lane_count_agrees_with_scalar() {
        let atoms = [-1.3, -0.2, 0.05, 0.4, 1.9, 2.2];
        let ks = [0.3, 1.1, 2.9, 7.5];
        let many = count_below_lanes(&atoms, -2.5, 2.5, ks, 3.0);
        for (k, n) in ks.iter().zip(many) {
            assert_eq!(count_below_k(&atoms, -2.5, 2.5, *k, 3.0), n);
        }
    }

    #[test]
    fn reduced_sin_cos_is_accurate() {
        for i in 0..=1000 {
            let r = PI * i as f64 / 1000.0;
            let (s, c) = sin_cos_reduced(r);
            assert!((s - r.sin()).abs() < 1e-15 && (c - r.cos()).abs() < 1e-15, "{r}");
        }
    }

    #[test]
    fn empty_box_counts_free_levels() {
        // L = π, k² = 4.5: free levels 1, 4
        let c = count_below_k(&[], -PI / 2.0, PI / 2.0, 4.5f64.sqrt(), 1.0);
        assert_eq!(c, 2);
        // exactly at an eigenvalue the strict inequality excludes it
        let c = count_below_k(&[], -PI / 2.0, PI / 2.0, 2.0, 1.0);
        assert_eq!(c, 1);
    }
}
