//! The subcommands. Each returns the files it wrote and a one-line summary;
//! printing is left to the caller.

use std::fs;
use std::path::PathBuf;

use hybridmech_core::analysis::{self, SampledKForm};
use hybridmech_core::flow::{self, IntegratorConfig, Termination};
use hybridmech_core::stats::{self, DensityGrid, DensitySettings};
use hybridmech_core::system::ImpactLaw;
use hybridmech_core::zoo::{self, Density, ZooEntry};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{CheckKind, FormChoice, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub message: String,
}

pub fn build_entry(cfg: &RunConfig) -> CliResult<ZooEntry> {
    zoo::build(&cfg.system.name, &cfg.system.parameters).map_err(|e| CliError::Config(format!("[system] {e}")))
}

fn coordinate_names(entry: &ZooEntry) -> Vec<String> {
    match &entry.system.mechanics {
        Some(m) => m.chart.names().to_vec(),
        None => (0..entry.dof()).map(|i| format!("q{i}")).collect(),
    }
}

fn initial_state(entry: &ZooEntry, cfg: &RunConfig) -> CliResult<Vec<f64>> {
    match &cfg.run.initial {
        Some(x) if x.len() != entry.system.dim() => Err(CliError::Config(format!(
            "[run] initial has {} entries, {} needs {}",
            x.len(),
            entry.name,
            entry.system.dim()
        ))),
        Some(x) => Ok(x.clone()),
        None => entry.sample_interior(&mut ChaCha8Rng::seed_from_u64(cfg.run.seed)).map_err(CliError::runtime),
    }
}

fn out_dir(cfg: &RunConfig) -> CliResult<PathBuf> {
    fs::create_dir_all(&cfg.output.dir)?;
    Ok(cfg.output.dir.clone())
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    system: &'a str,
    parameters: &'a [(String, f64)],
    config: &'a RunConfig,
    initial: &'a [f64],
    termination: &'a Termination,
    impacts: usize,
    final_time: f64,
    final_state: &'a [f64],
    escape_time: Option<f64>,
    max_norm: f64,
    steps: usize,
    energy_drift: Option<f64>,
}

/// Writes trajectory.csv, events.csv and summary.json. A run that ends
/// before the horizon still writes its files and then reports a runtime
/// error.
pub fn simulate(cfg: &RunConfig) -> CliResult<Outcome> {
    let entry = build_entry(cfg)?;
    let x0 = initial_state(&entry, cfg)?;
    let integrator = IntegratorConfig { record_arcs: true, ..cfg.integrator.clone() };
    let traj = flow::hybrid_flow(&entry.system, &x0, cfg.run.horizon, &integrator).map_err(CliError::runtime)?;
    let dir = out_dir(cfg)?;
    let names = coordinate_names(&entry);
    let files = vec![dir.join("trajectory.csv"), dir.join("events.csv"), dir.join("summary.json")];
    output::write_trajectory(&files[0], &traj, &names)?;
    output::write_events(&files[1], &traj.events, &names)?;
    let drift = entry.system.energy(&x0).zip(entry.system.energy(&traj.final_state)).map(|(a, b)| (b - a).abs());
    let summary = SimulationSummary {
        system: &entry.name,
        parameters: &entry.parameters,
        config: cfg,
        initial: &x0,
        termination: &traj.termination,
        impacts: traj.events.len(),
        final_time: traj.final_time,
        final_state: &traj.final_state,
        escape_time: traj.escape_time,
        max_norm: traj.max_norm,
        steps: traj.steps,
        energy_drift: drift,
    };
    output::write_json(&files[2], &summary)?;
    if traj.termination != Termination::Horizon {
        return Err(CliError::Runtime(format!(
            "flow stopped at t = {} ({}) after {} impacts; files written to {}",
            traj.final_time,
            traj.termination.label(),
            traj.events.len(),
            dir.display()
        )));
    }
    Ok(Outcome {
        message: format!("{}: {} impacts up to t = {}", entry.name, traj.events.len(), traj.final_time),
        files,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub skipped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub system: String,
    pub density: String,
    pub form: FormChoice,
    pub samples: usize,
    pub impact_samples: usize,
    pub checks: Vec<CheckLine>,
    pub passed: bool,
    pub config: RunConfig,
}

/// Impact states spread over the surfaces. Surfaces that the sampler
/// cannot approach are left out.
fn impact_states(entry: &ZooEntry, count: usize, rng: &mut ChaCha8Rng) -> CliResult<Vec<(usize, Vec<f64>)>> {
    let n = entry.system.surfaces.len();
    let mut usable = vec![true; n];
    let mut out = Vec::with_capacity(count);
    let mut k = 0;
    while out.len() < count {
        if !usable.iter().any(|&u| u) {
            return Err(CliError::Runtime(format!("no impact states can be sampled for {}", entry.name)));
        }
        let s = k % n;
        k += 1;
        if !usable[s] {
            continue;
        }
        match entry.sample_impact(s, rng) {
            Ok(x) => out.push((s, x)),
            Err(_) => usable[s] = false,
        }
    }
    Ok(out)
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Runs the configured residual checks and writes check.json. Fails with
/// [`CliError::CheckFailed`] if any residual exceeds the tolerance.
pub fn check(cfg: &RunConfig) -> CliResult<(Outcome, CheckReport)> {
    let entry = build_entry(cfg)?;
    let density: Density = entry
        .density(&cfg.analysis.density)
        .cloned()
        .ok_or_else(|| {
            let known: Vec<&str> = entry.densities.iter().map(|d| d.name.as_str()).collect();
            CliError::Config(format!("[analysis] unknown density `{}` for {} (known: {})", cfg.analysis.density, entry.name, known.join(", ")))
        })?;
    let sys = &entry.system;
    let form = match cfg.analysis.form {
        FormChoice::Volume => {
            let d = density.clone();
            SampledKForm::volume(sys.dim(), move |x| d.value(x))
        }
        FormChoice::Symplectic => SampledKForm::symplectic(sys.dof()),
        FormChoice::Energy => match &sys.energy {
            Some(h) => SampledKForm::exact_phase("dH", h.clone()),
            None => return Err(CliError::Config(format!("[analysis] {} has no energy function", entry.name))),
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let points = (0..cfg.analysis.samples).map(|_| entry.sample_interior(&mut rng)).collect::<Result<Vec<_>, _>>().map_err(CliError::runtime)?;
    let hits = impact_states(&entry, cfg.analysis.impact_samples, &mut rng)?;
    let f = |x: &[f64]| density.value(x);
    let tol = cfg.analysis.tolerance;
    let line = |name: &str, residual: f64| CheckLine { name: name.into(), residual, tolerance: tol, pass: residual <= tol, skipped: false };
    let mut checks = Vec::new();
    let mut kinds = cfg.analysis.checks.clone();
    kinds.sort();
    kinds.dedup();
    let rt = CliError::runtime;
    for kind in kinds {
        match kind {
            CheckKind::Lie => checks.push(line("lie", analysis::lie_derivative_residual(&form, sys.field.as_ref(), &points, &mut rng).map_err(rt)?)),
            CheckKind::Energy => checks.push(line("energy", analysis::energy_condition_residual(&form, sys, &hits, &mut rng).map_err(rt)?)),
            CheckKind::Specular => checks.push(line("specular", analysis::specular_condition_residual(&form, sys, &hits, &mut rng).map_err(rt)?)),
            CheckKind::Jacobian => {
                let js = hits.iter().map(|(s, x)| analysis::hybrid_jacobian(sys, &f, *s, x, &mut rng).map(|j| j - 1.0)).collect::<Result<Vec<_>, _>>().map_err(rt)?;
                checks.push(line("jacobian", max_abs(js)));
            }
            CheckKind::ClosedForm => {
                if matches!(sys.law, ImpactLaw::Custom(_)) {
                    checks.push(CheckLine { name: "closed-form".into(), residual: 0.0, tolerance: tol, pass: true, skipped: true });
                } else {
                    let js = hits.iter().map(|(s, x)| analysis::nonholonomic_jacobian_closed_form(sys, *s, x).map(|j| j - 1.0)).collect::<Result<Vec<_>, _>>().map_err(rt)?;
                    checks.push(line("closed-form", max_abs(js)));
                }
            }
            CheckKind::Divergence => checks.push(line("divergence", max_abs(analysis::divergence(sys.field.as_ref(), &f, &points).map_err(rt)?))),
            CheckKind::Cohomology => {
                let g = |x: &[f64]| density.log(x);
                let (flow_res, jump_res) = analysis::cohomology_residual(sys, &g, &|_| 1.0, &points, &hits, &mut rng).map_err(rt)?;
                checks.push(line("cohomology-flow", flow_res));
                checks.push(line("cohomology-impact", jump_res));
            }
        }
    }
    let passed = checks.iter().all(|c| c.pass);
    let report = CheckReport {
        system: entry.name.clone(),
        density: density.name.clone(),
        form: cfg.analysis.form,
        samples: points.len(),
        impact_samples: hits.len(),
        checks,
        passed,
        config: cfg.clone(),
    };
    let dir = out_dir(cfg)?;
    let path = dir.join("check.json");
    output::write_json(&path, &report)?;
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if !failed.is_empty() {
        return Err(CliError::CheckFailed(format!("{} with density {}: {}", entry.name, density.name, failed.join(", "))));
    }
    Ok((Outcome { files: vec![path], message: format!("{}: all {} checks pass", entry.name, report.checks.len()) }, report))
}

/// Ensemble grid with members run on the rayon pool. Members are pooled in
/// seed order, so the result matches the sequential ensemble exactly.
pub fn parallel_ensemble(entry: &ZooEntry, count: usize, settings: &DensitySettings, config: &IntegratorConfig) -> CliResult<DensityGrid> {
    let grids = stats::member_seeds(settings.seed, count)
        .into_par_iter()
        .map(|s| stats::member_density(entry, s, settings, config))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::runtime)?;
    stats::pool(grids, settings).map_err(CliError::runtime)
}

#[derive(Serialize)]
struct GridSidecar<'a> {
    system: &'a str,
    parameters: &'a [(String, f64)],
    bounds: [f64; 4],
    rows: usize,
    cols: usize,
    total: u64,
    occupied: usize,
    iterations: usize,
    burn_in: usize,
    trajectories: usize,
    seed: u64,
    flags: &'a [String],
    config: &'a RunConfig,
}

/// Writes density.csv and density.json.
pub fn density(cfg: &RunConfig) -> CliResult<(Outcome, DensityGrid)> {
    let entry = build_entry(cfg)?;
    let settings = DensitySettings {
        iterations: cfg.run.iterations,
        burn_in: cfg.run.burn_in,
        rows: cfg.run.rows,
        cols: cfg.run.cols,
        seed: cfg.run.seed,
    };
    let integrator = IntegratorConfig { record_arcs: false, ..cfg.integrator.clone() };
    let grid = match (&cfg.run.initial, cfg.run.trajectories) {
        (Some(_), 1) => {
            let x0 = initial_state(&entry, cfg)?;
            stats::accumulate_density(&entry, &x0, &settings, &integrator).map_err(CliError::runtime)?
        }
        (Some(_), _) => return Err(CliError::Config("[run] an initial state needs trajectories = 1".into())),
        (None, n) => parallel_ensemble(&entry, n, &settings, &integrator)?,
    };
    let dir = out_dir(cfg)?;
    let files = vec![dir.join("density.csv"), dir.join("density.json")];
    output::write_grid(&files[0], &grid)?;
    let sidecar = GridSidecar {
        system: &entry.name,
        parameters: &entry.parameters,
        bounds: grid.bounds,
        rows: grid.rows,
        cols: grid.cols,
        total: grid.total,
        occupied: grid.occupied(),
        iterations: grid.iterations,
        burn_in: grid.burn_in,
        trajectories: grid.trajectories,
        seed: grid.seed,
        flags: &grid.flags,
        config: cfg,
    };
    output::write_json(&files[1], &sidecar)?;
    let mut message = format!("{}: {} samples in {} occupied cells", entry.name, grid.total, grid.occupied());
    if !grid.flags.is_empty() {
        message.push_str(&format!(" (stopped early: {})", grid.flags.join("; ")));
    }
    Ok((Outcome { files, message }, grid))
}

#[derive(Serialize)]
struct ZenoOutput<'a> {
    system: &'a str,
    parameters: &'a [(String, f64)],
    initial: &'a [f64],
    report: &'a flow::ZenoReport,
    config: &'a RunConfig,
}

/// Runs the flow to the horizon and writes zeno.json.
pub fn zeno(cfg: &RunConfig) -> CliResult<(Outcome, flow::ZenoReport)> {
    let entry = build_entry(cfg)?;
    let x0 = initial_state(&entry, cfg)?;
    let integrator = IntegratorConfig { record_arcs: false, ..cfg.integrator.clone() };
    let traj = flow::hybrid_flow(&entry.system, &x0, cfg.run.horizon, &integrator).map_err(CliError::runtime)?;
    let report = flow::detect_zeno(&traj, &entry.system, &integrator);
    let dir = out_dir(cfg)?;
    let path = dir.join("zeno.json");
    output::write_json(&path, &ZenoOutput { system: &entry.name, parameters: &entry.parameters, initial: &x0, report: &report, config: cfg })?;
    let mut message = format!("{}: {} after {} impacts", entry.name, report.classification.label(), report.impact_times.len());
    if let Some(t) = report.t_infinity {
        message.push_str(&format!(", accumulation time {t}"));
    }
    if let Some(t) = report.escape_time {
        message.push_str(&format!(", escape at t = {t}"));
    }
    Ok((Outcome { files: vec![path], message }, report))
}

/// Catalog table, one system per line, in catalog order.
pub fn list_systems() -> CliResult<String> {
    let mut out = format!("{:<18} {:>3} {:>11} {:>8}  {:<40} {}\n", "name", "dof", "constraints", "surfaces", "parameters", "description");
    for name in zoo::CATALOG {
        let e = zoo::build(name, &Default::default()).map_err(CliError::runtime)?;
        let params: Vec<String> = e.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!(
            "{:<18} {:>3} {:>11} {:>8}  {:<40} {}\n",
            e.name,
            e.dof(),
            e.constraint_count(),
            e.system.surfaces.len(),
            params.join(","),
            e.description
        ));
    }
    Ok(out)
}
