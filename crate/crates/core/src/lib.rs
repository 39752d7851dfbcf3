//! Exact spectra and Bose gas thermodynamics for a one-dimensional box with
//! delta impurities at Poisson points.

pub mod error;
pub mod experiments;
pub mod ids;
pub mod numeric;
pub mod sampler;
pub mod spectrum;
pub mod thermo;

pub use error::{Error, Result};
pub use experiments::{
    finite_volume_critical_density, rho0_estimate, run_bec_experiment, run_excited_state_check, run_gap_experiment,
    run_lifshitz_experiment, run_mu_convergence, thermo_cell, Ensemble, ExperimentReport, FiniteVolumeCritical,
    FitWindow, LifshitzOutcome, ReportMetadata, ReportRow, TheoremConstants, ThermoRecord,
};
pub use ids::{
    critical_density, critical_density_log_grid, ensemble_ids, ensemble_ids_at_length, finite_ids, free_ids, lifshitz_fit,
    limiting_ids_infinite_gamma, solve_mu_hat, subcritical_density, IdsCurve, IdsReference, LifshitzFit,
};
pub use sampler::{
    configuration_from_points, realization_rng, sample_configuration, sample_realization,
    ImpurityConfiguration, ModelParameters, SeedTag,
};
pub use spectrum::{
    apply_delta_kick, count_eigenvalues_below, count_eigenvalues_below_many, dirichlet_union_count, dirichlet_union_oracle, eigenvalues,
    eigenvalues_with_options, free_spectrum_oracle, lowest_levels_windowed, propagate_phase_interval,
    single_delta_oracle, LevelRequest, PhaseState, SolverOptions, Spectrum, WindowOptions,
};
pub use thermo::{
    bose, condensate_profile, default_epsilons, heat_trace, occupations, solve_chemical_potential, solve_mu, BulkSpectrum,
    HeatTrace, MuSolution, ProfilePoint, ThermoOptions, ThermoSpectrum, ThermoState,
};
