//! Experiment dispatch and output files.

use std::path::Path;
use std::time::Instant;

use lsbec::{
    critical_density, ensemble_ids_at_length, eigenvalues, run_bec_experiment, run_excited_state_check,
    run_gap_experiment, run_lifshitz_experiment, run_mu_convergence, sample_realization, Ensemble, ExperimentReport,
    FitWindow, IdsReference, LevelRequest, ThermoOptions, ThermoSpectrum, ThermoState,
};
use serde_json::{json, Value};

use crate::config::{Experiment, Format, GridConfig, ReferenceConfig, RunConfig, Spacing};
use crate::Failure;

/// Runs the configured experiment on a dedicated thread pool and writes its
/// artifacts plus `manifest.json`.
pub fn run(config: &RunConfig, echo: &Value) -> Result<(), Failure> {
    let threads = config.threads.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Resource(format!("cannot start {threads} worker threads: {e}")))?;
    let start = Instant::now();
    let files = pool.install(|| produce(config))?;
    let wall = start.elapsed().as_secs_f64();

    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    for (name, body) in &files {
        std::fs::write(dir.join(name), body)?;
    }
    let manifest = json!({
        "experiment": config.experiment.map(Experiment::name),
        "config": echo,
        "files": files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "threads": threads,
        "wall_time_seconds": wall,
        "versions": { "lsbec": env!("CARGO_PKG_VERSION") },
    });
    write_json(dir, "manifest.json", &manifest)?;
    Ok(())
}

fn write_json(dir: &Path, name: &str, v: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    std::fs::write(dir.join(name), text + "\n")?;
    Ok(())
}

type Files = Vec<(String, String)>;

fn produce(config: &RunConfig) -> Result<Files, Failure> {
    let experiment = config.experiment.ok_or_else(|| Failure::config("experiment", "missing"))?;
    let mut files = Files::new();
    let csv = config.wants(Format::Csv);
    let json = config.wants(Format::Json);
    let params = config.params();
    let ens = Ensemble::new(params, config.sizes.clone(), config.realizations, config.seed);
    let constants = config.constants();
    let add_report = |files: &mut Files, r: &ExperimentReport| {
        if csv {
            files.push(("report.csv".into(), r.to_csv()));
        }
        if json {
            files.push(("report.json".into(), r.to_json()));
        }
    };

    match experiment {
        Experiment::Spectrum => {
            let c = sample_realization(config.box_length(), config.nu, config.seed, 0)?;
            let s = eigenvalues(&c, config.gamma, LevelRequest::Lowest(config.levels))?;
            if csv {
                files.push(("spectrum.csv".into(), format!("realization_id,j,E_j\n{}", s.to_csv_rows(0))));
            }
            if json {
                files.push(("spectrum.json".into(), s.to_json()));
            }
        }
        Experiment::Ids => {
            let curve = ensemble_ids_at_length(
                config.box_length(),
                config.nu,
                config.gamma,
                &config.grid.energies(),
                config.realizations,
                config.seed,
            )?;
            if csv {
                files.push(("ids.csv".into(), curve.to_csv()));
            }
            if json {
                files.push(("ids.json".into(), serde_json::to_string(&curve).expect("serializable")));
            }
        }
        Experiment::Thermo => {
            let n = config.sizes[0];
            let c = sample_realization(params.box_length(), config.nu, config.seed, 0)?;
            let ts = ThermoSpectrum::measure(&c, config.gamma, config.beta, &ThermoOptions::default())?;
            let eps: Vec<f64> = config.epsilons.iter().map(|e| e * ts.ground()).collect();
            let state = ThermoState::compute(&ts, config.beta, n, Some(&eps))?;
            if csv {
                files.push((
                    "occupations.csv".into(),
                    format!("realization_id,j,E_j,n_j\n{}", state.occupation_csv_rows(0, ts.levels())),
                ));
            }
            if json {
                files.push(("thermo.json".into(), state.to_json()));
            }
        }
        Experiment::Gap => add_report(&mut files, &run_gap_experiment(&ens, &constants)?),
        Experiment::Bec => {
            let rho_c = match config.rho_c {
                Some(r) => r,
                None => critical_density(&reference(config)?, config.beta)?.value,
            };
            add_report(&mut files, &run_bec_experiment(&ens, &constants, &config.epsilons, rho_c)?);
        }
        Experiment::Excited => add_report(&mut files, &run_excited_state_check(&ens, &constants, config.eta_prime)?),
        Experiment::Mu => add_report(&mut files, &run_mu_convergence(&ens, &reference(config)?)?),
        Experiment::Lifshitz => {
            let window = config.fit_window.unwrap_or(FitWindow::IdsValues { lo: 1e-4, hi: 1e-2 });
            let out = run_lifshitz_experiment(
                &params,
                config.box_length(),
                config.realizations,
                config.seed,
                &config.grid.energies(),
                window,
            )?;
            files.push(("ids.csv".into(), out.curve.to_csv()));
            files.push(("fit.json".into(), out.fit.to_json()));
            add_report(&mut files, &out.report);
        }
    }
    Ok(files)
}

/// Seed offset for reference ensembles, so they never share streams with
/// the run itself.
const REFERENCE_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;

fn reference(config: &RunConfig) -> Result<IdsReference, Failure> {
    Ok(match config.reference {
        ReferenceConfig::InfiniteGamma => IdsReference::InfiniteGamma { intensity: config.nu },
        ReferenceConfig::Ensemble { length, realizations, grid } => {
            let grid = grid.unwrap_or(GridConfig {
                min: 5e-3,
                max: 50.0 / config.beta,
                points: 200,
                spacing: Spacing::Log,
            });
            IdsReference::Curve(ensemble_ids_at_length(
                length,
                config.nu,
                config.gamma,
                &grid.energies(),
                realizations,
                config.seed ^ REFERENCE_SEED_MIX,
            )?)
        }
    })
}
