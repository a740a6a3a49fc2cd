//! Subcommand implementations. Each one computes everything first and
//! returns the output files in memory; [`Artifact::write_to`] then moves them
//! into place, so a failed command leaves nothing behind.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::config::{Config, ModeName};
use crate::dataset::write_dataset_csv;
use crate::error::{Error, Result};
use crate::filters::{FilterConfig, FilterKind};
use crate::harness::{
    detect_steady_state, match_steady_mae, PILOT_SEED_OFFSET, run_online_prediction, tune_step_size, ExperimentConfig, ExperimentSetup,
    RunResult, SteadyCriterion, SteadyState, TuningReport,
};
use crate::noise::flom_abs_moment;

/// Noise exponents of the robustness sweep.
pub const TABLE1_ALPHAS: [f64; 5] = [1.05, 1.1, 1.15, 1.2, 1.25];

/// Named output files, kept in memory until written.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifact {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl Artifact {
    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.insert(name.into(), bytes);
    }

    fn add_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// Writes every file into `dir` through a temporary name and a rename.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.partial"));
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            staged.push((tmp, dir.join(name)));
        }
        for (tmp, dest) in staged {
            fs::rename(tmp, dest)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SetupInfo {
    pub n_nodes: usize,
    pub edges: usize,
    pub steps: usize,
    pub band: Vec<usize>,
    pub mask_nodes: Vec<usize>,
    pub sampling_sigma_min: f64,
}

impl SetupInfo {
    pub fn of(setup: &ExperimentSetup) -> Self {
        Self {
            n_nodes: setup.n_nodes(),
            edges: setup.topology.edge_count(),
            steps: setup.dataset.steps(),
            band: setup.projector.band().indices().to_vec(),
            mask_nodes: setup.mask.observed_indices(),
            sampling_sigma_min: setup.sampling_sigma_min,
        }
    }
}

/// Fills in step sizes for algorithms configured without one.
pub fn tune_missing(
    setup: &ExperimentSetup,
    config: &Config,
    experiment: &ExperimentConfig,
) -> Result<(Vec<FilterConfig>, Vec<TuningReport>)> {
    let grid = config.tuning.grid();
    let mut tuned = Vec::with_capacity(config.algorithms.len());
    let mut reports = Vec::new();
    for alg in &config.algorithms {
        if alg.step_size.is_some() {
            tuned.push(*alg);
            continue;
        }
        let report = tune_step_size(setup, experiment, alg, &grid, config.tuning.pilot_runs)?;
        log::info!("{}: tuned step size {}", alg.name(), report.step_size);
        tuned.push(alg.with_step(report.step_size));
        reports.push(report);
    }
    Ok((tuned, reports))
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn fmt_alpha(config: &Config) -> String {
    if config.noise.enabled {
        config.noise.alpha.to_string()
    } else {
        "NA".to_string()
    }
}

/// `step,algorithm,spatial_mse,spectral_mae`.
pub fn metrics_csv(result: &RunResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "algorithm", "spatial_mse", "spectral_mae"])?;
    for alg in &result.algorithms {
        for (t, (mse, mae)) in alg.spatial_mse.iter().zip(&alg.spectral_mae).enumerate() {
            w.write_record([t.to_string(), alg.name().to_string(), mse.to_string(), mae.to_string()])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub alpha: String,
    pub algorithm: String,
    pub steady_mse: f64,
    pub iters_to_steady: Option<usize>,
}

/// `alpha,algorithm,steady_mse,iters_to_steady`.
pub fn summary_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["alpha", "algorithm", "steady_mse", "iters_to_steady"])?;
    for r in rows {
        w.write_record([
            r.alpha.clone(),
            r.algorithm.clone(),
            r.steady_mse.to_string(),
            fmt_opt(r.iters_to_steady),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[derive(Debug, Clone, Serialize)]
pub struct AlgorithmReport {
    pub algorithm: String,
    pub config: FilterConfig,
    pub steady_mse: f64,
    pub steady_mse_std_error: f64,
    pub steady_mae: f64,
    pub steady_mae_std_error: f64,
    pub final_mse_observed: f64,
    pub final_mse_unobserved: f64,
    pub floor_events: usize,
    pub moment_abs: Option<f64>,
    pub steady_state: Vec<SteadyState>,
}

fn algorithm_reports(result: &RunResult, criteria: &[SteadyCriterion], on_mae: bool) -> Result<Vec<AlgorithmReport>> {
    result
        .algorithms
        .iter()
        .map(|a| {
            let series = if on_mae { &a.spectral_mae } else { &a.spatial_mse };
            let steady_state = criteria
                .iter()
                .map(|c| detect_steady_state(series, *c))
                .collect::<Result<_>>()?;
            let (mse, mae) = (a.steady_mse(), a.steady_mae());
            Ok(AlgorithmReport {
                algorithm: a.name().to_string(),
                config: a.config,
                steady_mse: mse.mean,
                steady_mse_std_error: mse.std_error,
                steady_mae: mae.mean,
                steady_mae_std_error: mae.std_error,
                final_mse_observed: *a.spatial_mse_observed.last().unwrap_or(&0.0),
                final_mse_unobserved: *a.spatial_mse_unobserved.last().unwrap_or(&0.0),
                floor_events: a.floor_events,
                moment_abs: a.moment_abs,
                steady_state,
            })
        })
        .collect()
}

fn steady_window_fits(config: &Config, steps: usize) -> Vec<SteadyCriterion> {
    std::iter::once(config.steady)
        .chain(config.convergence.alternative.iter().copied())
        .filter(|c| c.window <= steps)
        .collect()
}

fn metadata(command: &str, config: &Config, setup: &ExperimentSetup, results: serde_json::Value) -> serde_json::Value {
    json!({
        "software": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "per_run_seed": "seed XOR run_index",
        "config": config,
        "setup": SetupInfo::of(setup),
        "moment_abs": config.noise.params().ok().flatten().and_then(|p| flom_abs_moment(p).ok()),
        "results": results,
    })
}

/// One experiment at the configured noise level, tuning missing step sizes.
pub struct RunOutcome {
    pub config: Config,
    pub setup: ExperimentSetup,
    pub result: RunResult,
    pub tuning: Vec<TuningReport>,
}

pub fn run_study(config: &Config) -> Result<RunOutcome> {
    let setup = config.setup()?;
    run_study_on(config, setup)
}

fn run_study_on(config: &Config, setup: ExperimentSetup) -> Result<RunOutcome> {
    let mut experiment = config.experiment()?;
    let (algorithms, tuning) = tune_missing(&setup, config, &experiment)?;
    experiment.algorithms = algorithms.clone();
    let result = run_online_prediction(&setup, &experiment)?;
    let mut config = config.clone();
    config.algorithms = algorithms;
    Ok(RunOutcome {
        config,
        setup,
        result,
        tuning,
    })
}

fn summary_rows(config: &Config, reports: &[AlgorithmReport]) -> Vec<SummaryRow> {
    reports
        .iter()
        .map(|r| SummaryRow {
            alpha: fmt_alpha(config),
            algorithm: r.algorithm.clone(),
            steady_mse: r.steady_mse,
            iters_to_steady: r.steady_state.first().and_then(|s| s.iterations_to_steady),
        })
        .collect()
}

pub fn cmd_run(config: &Config) -> Result<Artifact> {
    let out = run_study(config)?;
    let on_mae = config.mode == ModeName::TimeInvariant;
    let reports = algorithm_reports(&out.result, &steady_window_fits(config, out.result.steps), on_mae)?;
    let mut art = Artifact::default();
    art.add("metrics.csv", metrics_csv(&out.result)?);
    art.add("summary.csv", summary_csv(&summary_rows(config, &reports))?);
    let meta = metadata(
        "run",
        &out.config,
        &out.setup,
        json!({ "algorithms": reports, "tuning": out.tuning, "n_runs": out.result.n_runs }),
    );
    art.add_json("metadata.json", &meta)?;
    Ok(art)
}

pub fn cmd_tune(config: &Config) -> Result<Artifact> {
    let setup = config.setup()?;
    let experiment = config.experiment()?;
    let grid = config.tuning.grid();
    let mut reports = Vec::new();
    let mut tuned = config.clone();
    for alg in tuned.algorithms.iter_mut() {
        let rep = tune_step_size(&setup, &experiment, alg, &grid, config.tuning.pilot_runs)?;
        *alg = alg.with_step(rep.step_size);
        reports.push(rep);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["alpha", "algorithm", "step_size", "pilot_steady_mse", "selected"])?;
    for rep in &reports {
        for (mu, score) in &rep.scores {
            w.write_record([
                fmt_alpha(config),
                rep.algorithm.label().to_string(),
                mu.to_string(),
                score.map_or_else(|| "diverged".to_string(), |s| s.to_string()),
                (*mu == rep.step_size).to_string(),
            ])?;
        }
    }
    let mut art = Artifact::default();
    art.add("tuning.csv", w.into_inner().map_err(|e| Error::Io(e.into_error()))?);
    art.add_json("metadata.json", &metadata("tune", &tuned, &setup, json!({ "tuning": reports })))?;
    Ok(art)
}

/// Per-noise-level results of the robustness sweep.
pub struct SweepPoint {
    pub alpha: f64,
    pub outcome: RunOutcome,
}

/// Runs the configured experiment at each `alpha`, tuning missing step
/// sizes separately per noise level.
pub fn table1_study(config: &Config, alphas: &[f64]) -> Result<Vec<SweepPoint>> {
    let setup = config.setup()?;
    alphas
        .iter()
        .map(|&alpha| {
            let mut c = config.clone();
            c.noise.alpha = alpha;
            c.noise.enabled = true;
            c.validate()?;
            Ok(SweepPoint {
                alpha,
                outcome: run_study_on(&c, setup.clone())?,
            })
        })
        .collect()
}

pub fn cmd_table1(config: &Config) -> Result<Artifact> {
    let sweep = table1_study(config, &TABLE1_ALPHAS)?;
    let mut art = Artifact::default();
    let mut rows = Vec::new();
    let mut per_alpha = Vec::new();
    for point in &sweep {
        let out = &point.outcome;
        let reports = algorithm_reports(&out.result, &steady_window_fits(config, out.result.steps), false)?;
        rows.extend(summary_rows(&out.config, &reports));
        art.add(format!("metrics_alpha_{}.csv", point.alpha), metrics_csv(&out.result)?);
        per_alpha.push(json!({
            "alpha": point.alpha,
            "algorithms": reports,
            "tuning": out.tuning,
        }));
    }
    art.add("summary.csv", summary_csv(&rows)?);

    // algorithms as rows, noise levels as columns
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["algorithm".to_string()];
    header.extend(sweep.iter().map(|p| format!("alpha={}", p.alpha)));
    w.write_record(&header)?;
    if let Some(first) = sweep.first() {
        for (a, alg) in first.outcome.result.algorithms.iter().enumerate() {
            let mut row = vec![alg.name().to_string()];
            row.extend(
                sweep
                    .iter()
                    .map(|p| p.outcome.result.algorithms[a].steady_mse().mean.to_string()),
            );
            w.write_record(&row)?;
        }
    }
    art.add("table1.csv", w.into_inner().map_err(|e| Error::Io(e.into_error()))?);

    let setup = &sweep.first().ok_or(Error::EmptyInput)?.outcome.setup;
    let meta = metadata("table1", config, setup, json!({ "sweep": per_alpha }));
    art.add_json("metadata.json", &meta)?;
    Ok(art)
}

/// Time-invariant study with optional step-size matching.
pub struct ConvergenceOutcome {
    pub config: Config,
    pub setup: ExperimentSetup,
    pub result: RunResult,
    pub tuning: Vec<TuningReport>,
    pub criteria: Vec<SteadyCriterion>,
}

impl ConvergenceOutcome {
    /// Steady-state detection on the run-averaged spectral MAE series.
    pub fn steady_state(&self, kind: FilterKind, criterion: SteadyCriterion) -> Result<SteadyState> {
        let alg = self
            .result
            .get(kind)
            .ok_or_else(|| Error::Config(format!("{kind} not part of the study")))?;
        detect_steady_state(&alg.spectral_mae, criterion)
    }
}

pub fn convergence_study(config: &Config) -> Result<ConvergenceOutcome> {
    let mut config = config.clone();
    config.mode = ModeName::TimeInvariant;
    config.validate()?;
    let setup = config.setup()?;
    let experiment = config.experiment()?;
    let (algorithms, tuning) = match config.convergence.reference {
        None => tune_missing(&setup, &config, &experiment)?,
        Some(reference) => {
            let pos = config
                .algorithms
                .iter()
                .position(|a| a.kind == reference)
                .ok_or_else(|| Error::Config(format!("reference {reference} is not among the algorithms")))?;
            let mut reports = Vec::new();
            let mut reference_alg = config.algorithms[pos];
            if reference_alg.step_size.is_none() {
                let rep = tune_step_size(
                    &setup,
                    &experiment,
                    &reference_alg,
                    &config.tuning.grid(),
                    config.tuning.pilot_runs,
                )?;
                reference_alg = reference_alg.with_step(rep.step_size);
                reports.push(rep);
            }
            let reference_run = run_online_prediction(
                &setup,
                &ExperimentConfig {
                    algorithms: vec![reference_alg],
                    n_runs: config.tuning.pilot_runs,
                    seed: experiment.seed.wrapping_add(PILOT_SEED_OFFSET),
                    ..experiment.clone()
                },
            )?;
            let target = reference_run.algorithms[0].steady_mae().mean;
            let mut algs = config.algorithms.clone();
            for (i, alg) in algs.iter_mut().enumerate() {
                if i == pos {
                    *alg = reference_alg;
                } else if alg.step_size.is_none() {
                    let pilot = ExperimentConfig {
                        n_runs: config.tuning.pilot_runs,
                        seed: experiment.seed.wrapping_add(PILOT_SEED_OFFSET),
                        ..experiment.clone()
                    };
                    let mu = match_steady_mae(
                        &setup,
                        &pilot,
                        alg,
                        target,
                        (config.tuning.grid_min, config.tuning.grid_max),
                        config.convergence.match_iterations,
                    )?;
                    log::info!("{}: step {mu} matches the reference steady MAE {target}", alg.name());
                    *alg = alg.with_step(mu);
                }
            }
            (algs, reports)
        }
    };
    let result = run_online_prediction(
        &setup,
        &ExperimentConfig {
            algorithms: algorithms.clone(),
            ..experiment
        },
    )?;
    let criteria = steady_window_fits(&config, result.steps);
    config.algorithms = algorithms;
    Ok(ConvergenceOutcome {
        config,
        setup,
        result,
        tuning,
        criteria,
    })
}

pub fn cmd_convergence(config: &Config) -> Result<Artifact> {
    let out = convergence_study(config)?;
    let reports = algorithm_reports(&out.result, &out.criteria, true)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["algorithm", "window", "rel_tol", "iterations_to_steady", "steady_value"])?;
    for r in &reports {
        for s in &r.steady_state {
            w.write_record([
                r.algorithm.clone(),
                s.window.to_string(),
                s.rel_tol.to_string(),
                fmt_opt(s.iterations_to_steady),
                s.steady_value.to_string(),
            ])?;
        }
    }
    let mut art = Artifact::default();
    art.add("metrics.csv", metrics_csv(&out.result)?);
    art.add("steady_state.csv", w.into_inner().map_err(|e| Error::Io(e.into_error()))?);
    art.add("summary.csv", summary_csv(&summary_rows(&out.config, &reports))?);
    let meta = metadata(
        "convergence",
        &out.config,
        &out.setup,
        json!({ "algorithms": reports, "tuning": out.tuning, "n_runs": out.result.n_runs }),
    );
    art.add_json("metadata.json", &meta)?;
    Ok(art)
}

pub fn cmd_gen_data(config: &Config) -> Result<Artifact> {
    if config.dataset.path.is_some() {
        return Err(Error::Config("gen-data needs a synthetic dataset, not a CSV path".into()));
    }
    let spec = config.synthetic_spec();
    let bundle = crate::dataset::generate_synthetic_dataset(&spec)?;
    let mut csv = Vec::new();
    write_dataset_csv(&bundle, &mut csv)?;
    let mut art = Artifact::default();
    art.add("dataset.csv", csv);
    art.add_json(
        "metadata.json",
        &json!({
            "software": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": "gen-data",
            "synthetic": spec,
        }),
    )?;
    Ok(art)
}
