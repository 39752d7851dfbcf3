//! Closed-form spectra for limiting cases, used to bracket and check the
//! Prüfer solver.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::sampler::ImpurityConfiguration;

/// Dirichlet Laplacian levels `(jπ/L)²`, `j = 1..=count`.
pub fn free_spectrum_oracle(length: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|j| free_level(length, j as u64)).collect()
}

#[inline]
pub(crate) fn free_level(length: f64, j: u64) -> f64 {
    let k = j as f64 * PI / length;
    k * k
}

/// Infinite-strength limit: the box splits into independent Dirichlet
/// intervals, one per gap. Returns the `count` smallest levels of the union
/// (with multiplicity).
pub fn dirichlet_union_oracle(config: &ImpurityConfiguration, count: usize) -> Vec<f64> {
    // min-heap over (next wavenumber of a gap, mode index, gap length)
    #[derive(PartialEq)]
    struct Entry(f64, u64, f64);
    impl Eq for Entry {}
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0)
        }
    }

    let mut heap: BinaryHeap<Reverse<Entry>> = config
        .gap_iter()
        .filter(|&g| g > 0.0)
        .map(|g| Reverse(Entry(PI / g, 1, g)))
        .collect();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let Some(Reverse(Entry(k, n, g))) = heap.pop() else {
            break;
        };
        out.push(k * k);
        heap.push(Reverse(Entry((n + 1) as f64 * PI / g, n + 1, g)));
    }
    out
}

/// Number of infinite-strength levels strictly below `energy`.
pub fn dirichlet_union_count(config: &ImpurityConfiguration, energy: f64) -> u64 {
    if energy <= 0.0 {
        return 0;
    }
    let k = energy.sqrt();
    config
        .gap_iter()
        .map(|g| {
            let x = g * k / PI;
            let n = x.floor();
            if n == x { n as u64 - 1 } else { n as u64 }
        })
        .sum()
}

/// One atom of strength `gamma` at the centre of a box of length `length`.
///
/// Odd states do not feel the delta: `k = 2nπ/L`. Even states solve
/// `tan(kL/2) = -2k/γ`, one root per interval `((2n-1)π/L, 2nπ/L)`.
pub fn single_delta_oracle(length: f64, gamma: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut n = 1u64;
    while out.len() < count {
        let lo = (2 * n - 1) as f64 * PI / length;
        let hi = (2 * n) as f64 * PI / length;
        let k = even_root(length, gamma, lo, hi);
        out.push(k * k);
        if out.len() < count {
            out.push(hi * hi);
        }
        n += 1;
    }
    out
}

/// Bisection for `γ sin(kL/2) + 2k cos(kL/2) = 0` on `(lo, hi)`.
fn even_root(length: f64, gamma: f64, mut lo: f64, mut hi: f64) -> f64 {
    let h = |k: f64| {
        let (s, c) = (0.5 * k * length).sin_cos();
        gamma * s + 2.0 * k * c
    };
    let mut h_lo = h(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        let h_mid = h(mid);
        if (h_mid > 0.0) == (h_lo > 0.0) {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
