//! The `run`, `verify-operator` and `sweep` subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use fracfilm_core::diagnostics::{
    audit_rows, holder_fit_space, holder_fit_time, positivity_with_floor, trajectory_diagnostics, AuditReport,
    HolderFit, PositivityVerdict, StepDiagnostics,
};
use fracfilm_core::stepper::{run_with_guesses, Trajectory};
use fracfilm_core::SpectralField;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{self, FORMAT_TAG};
use crate::verify::{operator_checks, CheckRow, VerifySettings};
use crate::CliError;

pub const TIME_FIT_SAMPLES: usize = 16;

#[derive(Debug, Clone, Serialize)]
pub struct FailureInfo {
    pub epsilon: f64,
    pub step: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionSummary {
    pub min_before: f64,
    pub min_after: f64,
    pub tail_bound: f64,
    pub undershoot: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolverSummary {
    pub steps: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub max_residual: f64,
    pub iterations: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationEntry {
    pub epsilon: f64,
    pub distance_to_previous: Option<f64>,
    pub min_value: f64,
    pub audit_passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub format: &'static str,
    pub status: &'static str,
    pub failure: Option<FailureInfo>,
    /// Effective configuration; feeding it back as `key = value` pairs
    /// reproduces the run.
    pub config: BTreeMap<String, String>,
    pub tau: f64,
    pub rows: usize,
    pub initial_projection: Option<ProjectionSummary>,
    pub solver: SolverSummary,
    pub continuation: Vec<ContinuationEntry>,
    pub audit: Option<AuditReport>,
    pub positivity: Option<PositivityVerdict>,
    pub holder_space: Option<HolderFit>,
    pub holder_time: Option<HolderFit>,
    pub notes: Vec<String>,
}

/// Everything a run produced, before anything is written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub rows: Vec<StepDiagnostics>,
    pub trajectory: Trajectory,
}

impl RunOutcome {
    pub fn failed(&self) -> bool {
        self.report.failure.is_some()
    }

    pub fn final_state(&self) -> &SpectralField {
        self.trajectory.final_state()
    }

    fn failure_marker(&self) -> Option<String> {
        self.report.failure.as_ref().map(|f| match f.step {
            Some(step) => format!("epsilon {:e} step {step}: {}", f.epsilon, f.message),
            None => format!("epsilon {:e}: {}", f.epsilon, f.message),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let marker = self.failure_marker();
        output::write(
            dir,
            "diagnostics.csv",
            &output::diagnostics_csv(&self.rows, marker.as_deref()),
        )?;
        output::write(
            dir,
            "snapshots.csv",
            &output::snapshots_csv(&self.trajectory.times, &self.trajectory.states, marker.as_deref()),
        )?;
        output::write(dir, "report.json", &output::to_json(&self.report)?)
    }
}

fn solver_err(e: impl std::fmt::Display) -> CliError {
    CliError::Solver(e.to_string())
}

fn solver_summary(traj: &Trajectory) -> SolverSummary {
    let iterations: Vec<usize> = traj.solves.iter().map(|s| s.iterations).collect();
    SolverSummary {
        steps: traj.solves.len(),
        total_iterations: iterations.iter().sum(),
        max_iterations: iterations.iter().copied().max().unwrap_or(0),
        max_residual: traj.solves.iter().map(|s| s.residual_norm).fold(0.0, f64::max),
        iterations,
    }
}

/// Runs the configured problem (through the whole ε schedule) without
/// touching the file system.
pub fn execute_run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let (u0, projection) = cfg.initial_state()?;
    let mut continuation = Vec::new();
    let mut failure = None;
    let mut current: Option<(Trajectory, Vec<StepDiagnostics>)> = None;

    for &epsilon in &cfg.epsilon {
        let params = cfg.model_params_for(epsilon)?;
        let guesses = current.as_ref().map(|(t, _)| t.states.as_slice());
        let (traj, ok) = match run_with_guesses(&u0, cfg.t_final, cfg.n_steps, &params, guesses) {
            Ok(t) => (t, true),
            Err(f) => {
                failure = Some(FailureInfo {
                    epsilon,
                    step: f.error.step(),
                    message: f.error.to_string(),
                });
                (f.partial, false)
            }
        };
        let rows = trajectory_diagnostics(&traj, &params.entropy_fn()).map_err(solver_err)?;
        if ok {
            let audit = audit_rows(&rows, traj.tau, params.newton_tol, params.audit_tol()).map_err(solver_err)?;
            continuation.push(ContinuationEntry {
                epsilon,
                distance_to_previous: current
                    .as_ref()
                    .map(|(t, _)| t.final_state().l2_distance(traj.final_state())),
                min_value: rows.iter().map(|r| r.min_value).fold(f64::INFINITY, f64::min),
                audit_passed: audit.passed,
            });
        }
        current = Some((traj, rows));
        if !ok {
            break;
        }
    }

    let (traj, rows) = current.expect("schedule is non-empty");
    let params = traj.params;
    let mut notes = Vec::new();
    let audit = audit_rows(&rows, traj.tau, params.newton_tol, params.audit_tol()).map_err(solver_err)?;
    let positivity = positivity_with_floor(&rows, &params, cfg.positivity_floor).map_err(solver_err)?;
    let holder_space = holder_fit_space(traj.final_state(), params.alpha)
        .map_err(|e| notes.push(format!("space fit: {e}")))
        .ok();
    let holder_time = holder_fit_time(&traj, TIME_FIT_SAMPLES)
        .map_err(|e| notes.push(format!("time fit: {e}")))
        .ok();
    if let Some(p) = projection.as_ref().and_then(|p| p.undershoot) {
        notes.push(format!("projection of the initial data undershoots to {:e}", -p));
    }

    let report = RunReport {
        format: FORMAT_TAG,
        status: if failure.is_some() { "failed" } else { "ok" },
        failure,
        config: cfg.to_pairs(),
        tau: traj.tau,
        rows: rows.len(),
        initial_projection: projection.map(|p| ProjectionSummary {
            min_before: p.min_before,
            min_after: p.min_after,
            tail_bound: p.tail_bound,
            undershoot: p.undershoot,
        }),
        solver: solver_summary(&traj),
        continuation,
        audit: Some(audit),
        positivity: Some(positivity),
        holder_space,
        holder_time,
        notes,
    };
    Ok(RunOutcome {
        report,
        rows,
        trajectory: traj,
    })
}

/// Runs and writes `diagnostics.csv`, `snapshots.csv` and `report.json`
/// into the configured output directory. A solver failure still writes the
/// partial outputs before returning [`CliError::Solver`].
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let outcome = execute_run(cfg)?;
    outcome.write(&cfg.output_dir)?;
    if let Some(marker) = outcome.failure_marker() {
        return Err(CliError::Solver(marker));
    }
    Ok(outcome)
}

/// Runs the operator suite. The table is written (when `output_dir` is
/// given) and returned even when a check fails; failure is reported as
/// [`CliError::Verification`] alongside it.
pub fn cmd_verify_operator(
    settings: &VerifySettings,
    output_dir: Option<&Path>,
) -> Result<(Vec<CheckRow>, Option<CliError>), CliError> {
    let rows = operator_checks(settings)?;
    if let Some(dir) = output_dir {
        output::write(dir, "verify_operator.csv", &output::check_table_csv(&rows))?;
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    let breach = (!failed.is_empty()).then(|| CliError::Verification(failed.join(", ")));
    Ok((rows, breach))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Tau,
    Epsilon,
    Modes,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Tau => "tau",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::Modes => "modes",
        }
    }

    /// Discretization parameter whose ratio defines the observed order.
    fn resolution(self, value: f64) -> f64 {
        match self {
            SweepAxis::Modes => 1.0 / value,
            _ => value,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub distance_to_previous: Option<f64>,
    pub observed_order: Option<f64>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    pub members: Vec<Result<RunOutcome, CliError>>,
}

impl SweepOutcome {
    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.observed_order).collect()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.distance_to_previous).collect()
    }
}

/// Member configurations of a sweep, each writing to its own directory.
pub fn sweep_members(base: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<RunConfig>, CliError> {
    if values.len() < 2 {
        return Err(CliError::Config(format!(
            "a sweep needs at least 2 values, got {}",
            values.len()
        )));
    }
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut cfg = base.clone();
            cfg.output_dir = base.output_dir.join(format!("member_{i:02}"));
            match axis {
                SweepAxis::Tau => {
                    let steps = (base.t_final / v).round();
                    if !(v > 0.0) || steps < 1.0 || (steps * v - base.t_final).abs() > 1e-9 * base.t_final {
                        return Err(CliError::Config(format!(
                            "tau = {v} does not divide T = {}",
                            base.t_final
                        )));
                    }
                    cfg.n_steps = steps as usize;
                }
                SweepAxis::Epsilon => cfg.epsilon = vec![v],
                SweepAxis::Modes => {
                    if v.fract() != 0.0 || v < 0.0 {
                        return Err(CliError::Config(format!("modes value {v} is not an integer")));
                    }
                    cfg.n_modes = v as usize;
                }
            }
            cfg.validate()?;
            Ok(cfg)
        })
        .collect()
}

/// Runs every member (concurrently), then writes `convergence.csv` with the
/// distances between successive final states and the observed orders.
pub fn cmd_sweep(base: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepOutcome, CliError> {
    let members = sweep_members(base, axis, values)?;
    let results: Vec<Result<RunOutcome, CliError>> = members
        .par_iter()
        .map(|cfg| {
            let outcome = execute_run(cfg)?;
            outcome.write(&cfg.output_dir)?;
            Ok(outcome)
        })
        .collect();

    let finals: Vec<Option<&SpectralField>> = results
        .iter()
        .map(|r| r.as_ref().ok().filter(|o| !o.failed()).map(RunOutcome::final_state))
        .collect();
    let mut rows: Vec<SweepRow> = Vec::with_capacity(values.len());
    for (i, &value) in values.iter().enumerate() {
        let distance = (i > 0)
            .then(|| match (finals[i - 1], finals[i]) {
                (Some(a), Some(b)) => {
                    let n = a.n_modes().max(b.n_modes());
                    Some(a.resized(n).l2_distance(&b.resized(n)))
                }
                _ => None,
            })
            .flatten();
        let order = (i > 1)
            .then(|| {
                let (d0, d1) = (rows[i - 1].distance_to_previous?, distance?);
                let ratio = axis.resolution(values[i - 2]) / axis.resolution(values[i - 1]);
                let order = (d0 / d1).ln() / ratio.ln();
                order.is_finite().then_some(order)
            })
            .flatten();
        rows.push(SweepRow {
            index: i,
            value,
            distance_to_previous: distance,
            observed_order: order,
        });
    }

    let failures: Vec<String> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| match r {
            Err(e) => Some(format!("member {i}: {e}")),
            Ok(o) => o.failure_marker().map(|m| format!("member {i}: {m}")),
        })
        .collect();
    let marker = (!failures.is_empty()).then(|| failures.join("; "));
    let table: Vec<_> = rows
        .iter()
        .map(|r| (r.index, r.value, r.distance_to_previous, r.observed_order))
        .collect();
    output::write(
        &base.output_dir,
        "convergence.csv",
        &output::convergence_csv(axis.name(), &table, marker.as_deref()),
    )?;
    if let Some(m) = marker {
        return Err(CliError::Solver(m));
    }
    Ok(SweepOutcome {
        axis,
        rows,
        members: results,
    })
}
