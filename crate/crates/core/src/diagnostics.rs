//! Physical functionals along trajectories, audits of the discrete energy and
//! entropy estimates, the positivity check and Hölder exponent fits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{entropy_total, EntropyError, EntropyFn};
use crate::spectral::{seminorm_sq, GridField, SpectralError, SpectralField};
use crate::stepper::{Discretization, ModelParams, StepperError, Trajectory};

/// Minimum number of usable samples for a Hölder fit.
pub const MIN_FIT_PAIRS: usize = 8;
/// Width of the small-separation window used by the Hölder fits, in grid
/// spacings.
pub const FIT_DECADE: usize = 10;
/// Evaluation grid size for spatial Hölder fits.
pub const SPACE_FIT_POINTS: usize = 512;
/// Relative positivity floor, multiplied by the initial mass.
pub const POSITIVITY_FLOOR_FACTOR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("trajectory holds no states")]
    EmptyTrajectory,
    #[error("only {found} usable pairs for a Hölder fit (need {MIN_FIT_PAIRS})")]
    TooFewPairs { found: usize },
    #[error("time fit needs at least {MIN_FIT_PAIRS} steps, trajectory has {steps}")]
    TooFewSteps { steps: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Stepper(#[from] StepperError),
}

type Result<T> = std::result::Result<T, DiagnosticsError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    /// `+∞` when `u` reaches zero and the entropy density blows up.
    pub entropy: f64,
    pub energy_dissip: f64,
    pub entropy_dissip: f64,
    pub min_value: f64,
    pub flux_l1: f64,
}

fn diagnostics_with(disc: &Discretization, t: f64, u: &SpectralField, entropy: &EntropyFn) -> Result<StepDiagnostics> {
    let alpha = disc.params().alpha;
    let sample = disc.sample(u)?;
    let energy_dissip = disc.energy_dissipation(&sample);
    let flux_l1 = disc.flux_l1(&sample);
    let grid = GridField::new(sample.u)?;
    Ok(StepDiagnostics {
        t,
        mass: u.mean(),
        energy: seminorm_sq(u, alpha / 2.0)?,
        entropy: entropy_total(&grid, entropy)?,
        energy_dissip,
        entropy_dissip: seminorm_sq(u, alpha / 2.0 + 1.0)?,
        min_value: grid.min(),
        flux_l1,
    })
}

/// Functionals of a single state, evaluated on the `M = 2N` grid of `p`;
/// `t` is left at zero.
pub fn step_diagnostics(u: &SpectralField, p: &ModelParams, entropy: &EntropyFn) -> Result<StepDiagnostics> {
    let disc = Discretization::new(p)?;
    diagnostics_with(&disc, 0.0, &u.resized(p.n_modes), entropy)
}

/// One row per state of `traj`, including `t = 0`.
pub fn trajectory_diagnostics(traj: &Trajectory, entropy: &EntropyFn) -> Result<Vec<StepDiagnostics>> {
    if traj.states.is_empty() {
        return Err(DiagnosticsError::EmptyTrajectory);
    }
    let disc = Discretization::new(&traj.params)?;
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, u)| diagnostics_with(&disc, t, u, entropy))
        .collect()
}

/// Slack of one inequality at every step (nonnegative means satisfied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityAudit {
    pub slacks: Vec<f64>,
    pub worst_slack: f64,
    pub worst_step: usize,
    pub first_failure: Option<usize>,
    pub tolerance: f64,
    pub passed: bool,
}

impl InequalityAudit {
    fn from_slacks(slacks: Vec<f64>, tolerance: impl Fn(usize) -> f64) -> Self {
        let (worst_step, worst_slack) = slacks
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 0.0));
        let first_failure = slacks.iter().enumerate().position(|(k, s)| !(*s >= -tolerance(k)));
        Self {
            worst_slack,
            worst_step,
            first_failure,
            tolerance: tolerance(1),
            passed: first_failure.is_none(),
            slacks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Slack `k·newton_tol − |mass(uᵏ) − mass(u⁰)|`.
    pub mass: InequalityAudit,
    /// Slack `‖u⁰‖² − ‖uᵏ‖² − 2τ Σ_{j=1..k} ∫f_ε(uʲ)(∂ₓI(uʲ))²`.
    pub energy: InequalityAudit,
    /// Slack `∫G_ε(u⁰) − ∫G_ε(uᵏ) − τ Σ_{j=1..k} ‖uʲ‖²_{α/2+1}`; absent when
    /// the initial entropy is infinite.
    pub entropy: Option<InequalityAudit>,
    pub worst_slack: f64,
    pub passed: bool,
}

/// Audits precomputed rows. The cumulative dissipation sums run over the
/// implicit levels `j = 1..k`, matching the scheme.
pub fn audit_rows(rows: &[StepDiagnostics], tau: f64, newton_tol: f64, audit_tol: f64) -> Result<AuditReport> {
    let first = rows.first().ok_or(DiagnosticsError::EmptyTrajectory)?;
    let mass_slacks = rows
        .iter()
        .enumerate()
        .map(|(k, r)| k as f64 * newton_tol - (r.mass - first.mass).abs())
        .collect();
    let mut energy_slacks = Vec::with_capacity(rows.len());
    let mut entropy_slacks = Vec::with_capacity(rows.len());
    let (mut energy_sum, mut entropy_sum) = (0.0, 0.0);
    for (k, r) in rows.iter().enumerate() {
        if k > 0 {
            energy_sum += tau * r.energy_dissip;
            entropy_sum += tau * r.entropy_dissip;
        }
        energy_slacks.push(first.energy - r.energy - 2.0 * energy_sum);
        entropy_slacks.push(first.entropy - r.entropy - entropy_sum);
    }
    let mass = InequalityAudit::from_slacks(mass_slacks, |_| 0.0);
    let energy = InequalityAudit::from_slacks(energy_slacks, |_| audit_tol);
    let entropy = first
        .entropy
        .is_finite()
        .then(|| InequalityAudit::from_slacks(entropy_slacks, |_| audit_tol));
    let worst_slack = energy
        .worst_slack
        .min(entropy.as_ref().map_or(f64::INFINITY, |e| e.worst_slack));
    let passed = mass.passed && energy.passed && entropy.as_ref().is_none_or(|e| e.passed);
    Ok(AuditReport {
        mass,
        energy,
        entropy,
        worst_slack,
        passed,
    })
}

pub fn audit_trajectory(traj: &Trajectory, entropy: &EntropyFn, audit_tol: f64) -> Result<AuditReport> {
    let rows = trajectory_diagnostics(traj, entropy)?;
    audit_rows(&rows, traj.tau, traj.params.newton_tol, audit_tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivityStatus {
    /// Hypothesis and preconditions hold and the minimum stayed above the floor.
    Pass,
    /// Hypothesis and preconditions hold but the minimum touched the floor.
    SuspectedDefect,
    /// Hypothesis or preconditions fail; the minimum is tracked only.
    Informational,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityVerdict {
    pub threshold: f64,
    pub hypothesis: bool,
    pub initial_positive: bool,
    pub initial_entropy_finite: bool,
    pub min_value: f64,
    pub min_step: usize,
    pub floor: f64,
    pub above_floor: bool,
    pub status: PositivityStatus,
}

/// `2 + 2/(α+1)`: mobility exponents above it keep solutions positive.
pub fn positivity_threshold(alpha: f64) -> f64 {
    2.0 + 2.0 / (alpha + 1.0)
}

pub fn positivity_from_rows(rows: &[StepDiagnostics], p: &ModelParams) -> Result<PositivityVerdict> {
    positivity_with_floor(rows, p, POSITIVITY_FLOOR_FACTOR)
}

/// As [`positivity_from_rows`] with the floor set to `floor_factor` times
/// the initial mass.
pub fn positivity_with_floor(
    rows: &[StepDiagnostics],
    p: &ModelParams,
    floor_factor: f64,
) -> Result<PositivityVerdict> {
    let first = rows.first().ok_or(DiagnosticsError::EmptyTrajectory)?;
    let threshold = positivity_threshold(p.alpha);
    let hypothesis = p.mobility.n > threshold;
    let (min_step, min_value) = rows
        .iter()
        .map(|r| r.min_value)
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    let floor = floor_factor * first.mass;
    let above_floor = min_value > floor;
    let initial_positive = first.min_value > 0.0;
    let initial_entropy_finite = first.entropy.is_finite();
    let status = match (hypothesis && initial_positive && initial_entropy_finite, above_floor) {
        (true, true) => PositivityStatus::Pass,
        (true, false) => PositivityStatus::SuspectedDefect,
        (false, _) => PositivityStatus::Informational,
    };
    Ok(PositivityVerdict {
        threshold,
        hypothesis,
        initial_positive,
        initial_entropy_finite,
        min_value,
        min_step,
        floor,
        above_floor,
        status,
    })
}

pub fn positivity_check(traj: &Trajectory, p: &ModelParams) -> Result<PositivityVerdict> {
    let rows = trajectory_diagnostics(traj, &p.entropy_fn())?;
    positivity_from_rows(&rows, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitDirection {
    Space,
    Time,
}

/// Least-squares fit `ω(h) ≈ C·h^β` of the modulus of continuity over the
/// smallest separations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub exponent_est: f64,
    pub constant_est: f64,
    pub pairs_used: usize,
    pub direction: FitDirection,
    /// Exponent predicted for the degenerate limit: `γ = (α−1)/2` in space,
    /// `μ = γ/(2γ+3)` in time.
    pub theoretical_exponent: f64,
    /// Set when every difference vanished; exponent and constant are then 0.
    pub degenerate: bool,
}

pub fn space_exponent(alpha: f64) -> f64 {
    (alpha - 1.0) / 2.0
}

pub fn time_exponent(alpha: f64) -> f64 {
    let gamma = space_exponent(alpha);
    gamma / (2.0 * gamma + 3.0)
}

fn degenerate(direction: FitDirection, theoretical_exponent: f64) -> HolderFit {
    HolderFit {
        exponent_est: 0.0,
        constant_est: 0.0,
        pairs_used: 0,
        direction,
        theoretical_exponent,
        degenerate: true,
    }
}

/// For each separation `d = 1..=FIT_DECADE` grid steps, the largest
/// difference over all sample pairs at that separation, then a log–log line.
fn modulus_fit(samples: &[f64], spacing: f64, direction: FitDirection, theoretical_exponent: f64) -> Result<HolderFit> {
    let scale = samples.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    let cutoff = 1e-13 * scale;
    let mut points = Vec::new();
    let mut pairs_used = 0;
    for d in 1..=FIT_DECADE.min(samples.len().saturating_sub(1)) {
        let diffs = samples.windows(d + 1).map(|w| (w[d] - w[0]).abs());
        let mut worst: f64 = 0.0;
        for diff in diffs {
            if diff > cutoff {
                pairs_used += 1;
                worst = worst.max(diff);
            }
        }
        if worst > cutoff {
            points.push(((d as f64 * spacing).ln(), worst.ln()));
        }
    }
    if pairs_used == 0 {
        return Ok(degenerate(direction, theoretical_exponent));
    }
    if pairs_used < MIN_FIT_PAIRS || points.len() < 2 {
        return Err(DiagnosticsError::TooFewPairs { found: pairs_used });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(HolderFit {
        exponent_est: slope,
        constant_est: (my - slope * mx).exp(),
        pairs_used,
        direction,
        theoretical_exponent,
        degenerate: false,
    })
}

/// Spatial Hölder fit of `u` on a uniform grid of [`SPACE_FIT_POINTS`] nodes.
pub fn holder_fit_space(u: &SpectralField, alpha: f64) -> Result<HolderFit> {
    let m = SPACE_FIT_POINTS.max(2 * u.n_modes());
    let values = crate::spectral::synthesize(u, m)?;
    modulus_fit(
        values.values(),
        1.0 / m as f64,
        FitDirection::Space,
        space_exponent(alpha),
    )
}

/// Temporal Hölder fit at `x_samples` evenly spaced interior points,
/// returning the fit with the largest constant.
pub fn holder_fit_time(traj: &Trajectory, x_samples: usize) -> Result<HolderFit> {
    let steps = traj.states.len().saturating_sub(1);
    if steps < MIN_FIT_PAIRS {
        return Err(DiagnosticsError::TooFewSteps { steps });
    }
    let mu = time_exponent(traj.params.alpha);
    let mut worst: Option<HolderFit> = None;
    for i in 0..x_samples.max(1) {
        let x = (i as f64 + 0.5) / x_samples.max(1) as f64;
        let series: Vec<f64> = traj.states.iter().map(|u| u.eval(x)).collect();
        let fit = modulus_fit(&series, traj.tau, FitDirection::Time, mu)?;
        if fit.degenerate {
            continue;
        }
        if worst.is_none_or(|w| fit.constant_est > w.constant_est) {
            worst = Some(fit);
        }
    }
    Ok(worst.unwrap_or_else(|| degenerate(FitDirection::Time, mu)))
}
