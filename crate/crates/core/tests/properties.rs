use lsbec::{
    bose, configuration_from_points, count_eigenvalues_below, dirichlet_union_oracle, eigenvalues, finite_ids,
    free_spectrum_oracle, sample_realization, solve_mu, solve_mu_hat, ImpurityConfiguration, IdsReference,
    LevelRequest, Spectrum, ThermoOptions, ThermoSpectrum, ThermoState,
};
use proptest::prelude::*;
use std::f64::consts::PI;

/// Box of length 1..20 with up to 10 atoms.
fn small_config() -> impl Strategy<Value = ImpurityConfiguration> {
    (1.0f64..20.0, prop::collection::vec(0.001f64..0.999, 0..=10)).prop_filter_map("duplicate atoms", |(l, u)| {
        let pts: Vec<f64> = u.iter().map(|u| -0.5 * l + l * u).collect();
        configuration_from_points(&pts, l).ok()
    })
}

fn gamma() -> impl Strategy<Value = f64> {
    prop_oneof![0.01f64..1.0, 1.0f64..100.0, 100.0f64..1e4]
}

/// Zeros of the shooting solution in the open box, counted from explicit
/// `(φ, φ')` transfer matrices sampled finely enough that no step holds two.
fn transfer_matrix_sign_changes(config: &ImpurityConfiguration, gamma: f64, energy: f64) -> u64 {
    let k = energy.sqrt();
    let (mut phi, mut dphi) = (0.0f64, 1.0f64);
    let mut changes = 0;
    let mut prev_sign = 0.0f64;
    let walls: Vec<f64> = std::iter::once(config.left_wall())
        .chain(config.atoms().iter().copied())
        .chain(std::iter::once(config.right_wall()))
        .collect();
    for (i, w) in walls.windows(2).enumerate() {
        if i > 0 {
            dphi += gamma * phi;
        }
        let ell = w[1] - w[0];
        let steps = ((k * ell / 0.5).ceil() as usize).max(1);
        let h = ell / steps as f64;
        let (s, c) = (k * h).sin_cos();
        for _ in 0..steps {
            let next = phi * c + dphi * s / k;
            dphi = -phi * k * s + dphi * c;
            phi = next;
            let scale = phi.abs().max(dphi.abs() / k);
            phi /= scale;
            dphi /= scale;
            let sign = phi.signum();
            if prev_sign != 0.0 && sign != prev_sign && phi != 0.0 {
                changes += 1;
            }
            if phi != 0.0 {
                prev_sign = sign;
            }
        }
    }
    changes
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gaps_sum_to_box_length(config in small_config()) {
        let total: f64 = config.gaps().iter().sum();
        prop_assert!((total - config.box_length()).abs() <= 1e-12 * config.box_length());
    }

    #[test]
    fn sampling_is_deterministic(l in 1.0f64..1e3, nu in 0.1f64..5.0, seed: u64, stream in 0u64..1000) {
        let a = sample_realization(l, nu, seed, stream).unwrap();
        let b = sample_realization(l, nu, seed, stream).unwrap();
        prop_assert_eq!(a.atoms(), b.atoms());
        prop_assert!(a.atoms().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(a.atoms().iter().all(|&x| x > -0.5 * l && x < 0.5 * l));
    }

    #[test]
    fn count_is_monotone_in_energy(config in small_config(), g in gamma(), mut es in prop::collection::vec(0.0f64..200.0, 2..30)) {
        es.sort_by(f64::total_cmp);
        let counts: Vec<u64> = es.iter().map(|&e| count_eigenvalues_below(&config, g, e)).collect();
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
    }

    #[test]
    fn extraction_matches_counting(config in small_config(), g in gamma()) {
        let s = eigenvalues(&config, g, LevelRequest::Lowest(12)).unwrap();
        for (j, &e) in s.eigenvalues().iter().enumerate() {
            let d = 1e-8 * e.max(1.0);
            prop_assert_eq!(count_eigenvalues_below(&config, g, e - d), j as u64);
            prop_assert_eq!(count_eigenvalues_below(&config, g, e + d), j as u64 + 1);
        }
    }

    #[test]
    fn levels_increase_with_strength(config in small_config()) {
        let levels: Vec<Vec<f64>> = [0.1, 1.0, 10.0, 100.0]
            .iter()
            .map(|&g| eigenvalues(&config, g, LevelRequest::Lowest(10)).unwrap().eigenvalues().to_vec())
            .collect();
        for pair in levels.windows(2) {
            for (lo, hi) in pair[0].iter().zip(&pair[1]) {
                prop_assert!(*lo <= hi * (1.0 + 1e-9), "{lo} > {hi}");
            }
        }
    }

    #[test]
    fn levels_lie_between_free_and_decoupled(config in small_config(), g in gamma()) {
        let j = 10;
        let s = eigenvalues(&config, g, LevelRequest::Lowest(j)).unwrap();
        let free = free_spectrum_oracle(config.box_length(), j);
        let union = dirichlet_union_oracle(&config, j);
        for ((e, f), u) in s.eigenvalues().iter().zip(&free).zip(&union) {
            prop_assert!(*f <= e * (1.0 + 1e-9) && *e <= u * (1.0 + 1e-9), "{f} ≤ {e} ≤ {u}");
        }
    }

    #[test]
    fn phase_count_equals_transfer_matrix_zeros(config in small_config(), g in gamma(), e in 0.01f64..100.0) {
        let s = eigenvalues(&config, g, LevelRequest::Below(e * 1.5 + 1.0)).unwrap();
        // stay away from eigenvalues, where the last sample's sign is ambiguous
        prop_assume!(s.eigenvalues().iter().all(|&x| (x - e).abs() > 1e-6 * e));
        prop_assert_eq!(count_eigenvalues_below(&config, g, e), transfer_matrix_sign_changes(&config, g, e));
    }

    #[test]
    fn finite_ids_is_monotone_and_below_free(config in small_config(), g in gamma()) {
        let s = eigenvalues(&config, g, LevelRequest::Below(60.0)).unwrap();
        let grid: Vec<f64> = (1..=50).map(|i| 1.2 * i as f64).collect();
        let ids = finite_ids(&s, config.box_length(), &grid).unwrap();
        prop_assert!(ids.values.windows(2).all(|w| w[0] <= w[1]));
        for (e, v) in grid.iter().zip(&ids.values) {
            prop_assert!(*v <= e.sqrt() / PI + 1e-12);
        }
    }

    #[test]
    fn particle_function_increases_in_mu(mut levels in prop::collection::vec(0.01f64..50.0, 1..40), beta in 0.1f64..10.0, mut mus in prop::collection::vec(0.0f64..1.0, 2..20)) {
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let e1 = levels[0];
        mus.sort_by(f64::total_cmp);
        mus.dedup();
        // μ from E¹ - 20/β up to just below E¹
        let f = |mu: f64| levels.iter().map(|&e| bose(e - mu, beta)).sum::<f64>();
        let values: Vec<f64> = mus.iter().map(|t| f(e1 - 20.0 / beta * (1.0 - t) - 1e-9)).collect();
        prop_assert!(values.windows(2).all(|w| w[0] < w[1]), "{values:?}");
    }

    #[test]
    fn sum_rule_and_occupation_order(seed: u64, n in 50u64..1500, rho in 0.05f64..2.0, g in gamma()) {
        let config = sample_realization(n as f64 / rho, 1.0, seed, 0).unwrap();
        let ts = ThermoSpectrum::measure(&config, g, 1.0, &ThermoOptions::default()).unwrap();
        let sol = solve_mu(&ts, 1.0, n).unwrap();
        prop_assert!((sol.total() - n as f64).abs() <= 1e-8 * n as f64);
        let state = ThermoState::compute(&ts, 1.0, n, None).unwrap();
        prop_assert!(state.mu < ts.ground());
        // B(E - μ) underflows to 0 once β(E - μ) > ~745; order is strict above that
        prop_assert!(state.occupations.windows(2).all(|w| w[0] > w[1] || (w[1] == 0.0 && w[0] >= 0.0)));
        prop_assert!(state.occupations[0] > 0.0);
    }

    #[test]
    fn mu_hat_increases_with_density(nu in 0.5f64..2.0, beta in 0.5f64..4.0) {
        let reference = IdsReference::InfiniteGamma { intensity: nu };
        let rho_c = lsbec::critical_density(&reference, beta).unwrap().value;
        let mus: Vec<f64> = [0.05, 0.2, 0.4, 0.6, 0.9]
            .iter()
            .map(|f| solve_mu_hat(f * rho_c, beta, &reference).unwrap())
            .collect();
        prop_assert!(mus.windows(2).all(|w| w[0] < w[1]) && mus[4] < 0.0, "{mus:?}");
    }
}

#[test]
fn bose_matches_expansion_near_zero() {
    for beta in [0.5, 1.0, 3.0] {
        let e = 1e-12 / beta;
        let series = 1.0 / (beta * e) - 0.5;
        assert!((bose(e, beta) - series).abs() <= 1e-6 * series);
    }
}

#[test]
fn listed_spectrum_sum_rule() {
    let s = Spectrum::new(vec![1.0, 2.0], 1e6, true).unwrap();
    let ts = ThermoSpectrum::exact(s, 1.0).unwrap();
    let sol = solve_mu(&ts, 1.0, 1).unwrap();
    assert!((sol.total() - 1.0).abs() <= 1e-8);
}
