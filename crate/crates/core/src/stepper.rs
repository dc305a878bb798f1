//! Implicit Euler time stepping for the regularized problem
//! `∂ₜu + ∂ₓ(f_ε(u) ∂ₓI(u)) = 0`.
//!
//! Each step solves the stationary Galerkin system
//!
//! `R_k(u) = c_k(u) − τ ⟨f_ε(u) ∂ₓI(u), φ_k'⟩ − c_k(g) = 0,  k < N`
//!
//! where the inner product is the midpoint rule on `M = 2N` collocation
//! nodes. The nonlinear system is solved by damped Newton with an exact
//! Jacobian of the discrete residual; a relaxed Picard step (mobility frozen)
//! is taken whenever the Newton direction is unusable.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{entropy_total, mobility, mobility_derivative, EntropyError, EntropyFn, MobilitySpec};
use crate::spectral::{multiplier, seminorm_sq, BasisConvention, Collocation, GridField, SpectralError, SpectralField};

pub const DEFAULT_NEWTON_TOL: f64 = 1e-10;
pub const DEFAULT_NEWTON_MAX_ITER: usize = 50;
pub const DEFAULT_DAMPING_MIN: f64 = 1.0 / 64.0;
const PICARD_RELAXATION: f64 = 0.5;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepperError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error("stationary solve did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("step {step}: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<StepperError>,
    },
    #[error("epsilon = {epsilon:e}: {source}")]
    EpsilonFailed {
        epsilon: f64,
        #[source]
        source: Box<StepperError>,
    },
    #[error("epsilon schedule must be non-empty, positive and strictly decreasing")]
    InvalidSchedule,
}

impl StepperError {
    /// Index of the failing time step, if the error happened inside a run.
    pub fn step(&self) -> Option<usize> {
        match self {
            StepperError::StepFailed { step, .. } => Some(*step),
            StepperError::EpsilonFailed { source, .. } => source.step(),
            _ => None,
        }
    }
}

/// One regularized problem: operator order, mobility, truncation and solver
/// tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: f64,
    pub mobility: MobilitySpec,
    pub n_modes: usize,
    pub grid_points: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub damping_min: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, mobility: MobilitySpec, n_modes: usize) -> Result<Self, StepperError> {
        let p = Self {
            alpha,
            mobility,
            n_modes,
            grid_points: 2 * n_modes,
            newton_tol: DEFAULT_NEWTON_TOL,
            newton_max_iter: DEFAULT_NEWTON_MAX_ITER,
            damping_min: DEFAULT_DAMPING_MIN,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tolerances(
        mut self,
        newton_tol: f64,
        newton_max_iter: usize,
        damping_min: f64,
    ) -> Result<Self, StepperError> {
        self.newton_tol = newton_tol;
        self.newton_max_iter = newton_max_iter;
        self.damping_min = damping_min;
        self.validate()?;
        Ok(self)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self, StepperError> {
        self.mobility = self.mobility.with_epsilon(epsilon)?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), StepperError> {
        let bad = |m: String| Err(StepperError::InvalidParams(m));
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return bad(format!("alpha = {} must lie in (0, 2)", self.alpha));
        }
        MobilitySpec::new(self.mobility.n, self.mobility.epsilon)?;
        if self.n_modes < 4 {
            return bad(format!("n_modes = {} must be >= 4", self.n_modes));
        }
        if self.grid_points < self.n_modes {
            return bad(format!(
                "grid_points = {} smaller than n_modes = {}",
                self.grid_points, self.n_modes
            ));
        }
        if !(self.newton_tol > 0.0) {
            return bad(format!("newton_tol = {} must be positive", self.newton_tol));
        }
        if self.newton_max_iter == 0 {
            return bad("newton_max_iter must be positive".into());
        }
        if !(self.damping_min > 0.0 && self.damping_min <= 1.0) {
            return bad(format!("damping_min = {} must lie in (0, 1]", self.damping_min));
        }
        Ok(())
    }

    /// Slack allowed in the per-step inequality audits.
    pub fn audit_tol(&self) -> f64 {
        10.0 * self.newton_tol
    }

    pub fn entropy_fn(&self) -> EntropyFn {
        EntropyFn::new(self.mobility)
    }
}

/// Precomputed transforms and basis tables for one `ModelParams`.
#[derive(Debug, Clone)]
pub struct Discretization {
    params: ModelParams,
    colloc: Collocation,
    multipliers: Vec<f64>,
    // M×N tables of φ_k(x_j) and φ_k'(x_j)
    phi: DMatrix<f64>,
    dphi: DMatrix<f64>,
}

/// Nodal quantities entering the flux `f_ε(u) ∂ₓI(u)`.
#[derive(Debug, Clone)]
pub struct FluxSample {
    pub u: Vec<f64>,
    pub grad_iu: Vec<f64>,
    pub mobility: Vec<f64>,
}

impl FluxSample {
    pub fn flux(&self) -> impl Iterator<Item = f64> + '_ {
        self.mobility.iter().zip(&self.grad_iu).map(|(f, w)| f * w)
    }
}

impl Discretization {
    pub fn new(params: &ModelParams) -> Result<Self, StepperError> {
        params.validate()?;
        let (n, m) = (params.n_modes, params.grid_points);
        let colloc = Collocation::new(m)?;
        let x = colloc.nodes();
        let phi = DMatrix::from_fn(m, n, |j, k| BasisConvention::phi(k, x[j]));
        let dphi = DMatrix::from_fn(m, n, |j, k| BasisConvention::dphi(k, x[j]));
        Ok(Self {
            params: *params,
            colloc,
            multipliers: (0..n).map(|k| multiplier(k, params.alpha)).collect(),
            phi,
            dphi,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn collocation(&self) -> &Collocation {
        &self.colloc
    }

    fn check(&self, u: &SpectralField) -> Result<(), StepperError> {
        if u.n_modes() != self.params.n_modes {
            return Err(SpectralError::ModeMismatch {
                left: u.n_modes(),
                right: self.params.n_modes,
            }
            .into());
        }
        Ok(())
    }

    /// Values of `u` on the fine grid.
    pub fn nodal(&self, u: &SpectralField) -> Result<GridField, StepperError> {
        Ok(self.colloc.synthesize(u)?)
    }

    pub fn sample(&self, u: &SpectralField) -> Result<FluxSample, StepperError> {
        let coeffs = u.coeffs();
        let values = self.colloc.synthesize_values(coeffs)?;
        let iu: Vec<f64> = coeffs.iter().zip(&self.multipliers).map(|(c, m)| -m * c).collect();
        let grad_iu = self.colloc.synthesize_dx_values(&iu)?;
        let mob = values.iter().map(|&v| mobility(v, &self.params.mobility)).collect();
        Ok(FluxSample {
            u: values,
            grad_iu,
            mobility: mob,
        })
    }

    /// `∫ f_ε(u) (∂ₓI(u))²` by the fine-grid midpoint rule.
    pub fn energy_dissipation(&self, sample: &FluxSample) -> f64 {
        sample
            .mobility
            .iter()
            .zip(&sample.grad_iu)
            .map(|(f, w)| f * w * w)
            .sum::<f64>()
            / sample.u.len() as f64
    }

    pub fn flux_l1(&self, sample: &FluxSample) -> f64 {
        sample.flux().map(f64::abs).sum::<f64>() / sample.u.len() as f64
    }

    pub fn residual(&self, u: &SpectralField, g: &SpectralField, tau: f64) -> Result<SpectralField, StepperError> {
        self.check(u)?;
        self.check(g)?;
        let sample = self.sample(u)?;
        let flux: Vec<f64> = sample.flux().collect();
        let proj = self.colloc.project_onto_dx(&flux, self.params.n_modes)?;
        let r = u
            .coeffs()
            .iter()
            .zip(g.coeffs())
            .zip(&proj)
            .map(|((cu, cg), p)| cu - tau * p - cg)
            .collect();
        Ok(SpectralField::new(r)?)
    }

    /// Exact Jacobian of [`residual`](Self::residual) with respect to the
    /// coefficients of `u`.
    pub fn jacobian(&self, u: &SpectralField, tau: f64) -> Result<DMatrix<f64>, StepperError> {
        self.check(u)?;
        let sample = self.sample(u)?;
        let (m, n) = (self.params.grid_points, self.params.n_modes);
        // ∂F_j/∂c_l = f'(u_j) w_j φ_l(x_j) − f(u_j) m_l φ_l'(x_j)
        let mut d_flux = DMatrix::zeros(m, n);
        for j in 0..m {
            let a = mobility_derivative(sample.u[j], &self.params.mobility) * sample.grad_iu[j];
            let b = sample.mobility[j];
            for l in 0..n {
                d_flux[(j, l)] = a * self.phi[(j, l)] - b * self.multipliers[l] * self.dphi[(j, l)];
            }
        }
        let mut jac = self.dphi.tr_mul(&d_flux);
        jac *= -tau / m as f64;
        for k in 0..n {
            jac[(k, k)] += 1.0;
        }
        Ok(jac)
    }

    /// Linear operator of the residual with the mobility frozen at `u`.
    fn frozen_mobility_matrix(&self, u: &SpectralField, tau: f64) -> Result<DMatrix<f64>, StepperError> {
        let sample = self.sample(u)?;
        let (m, n) = (self.params.grid_points, self.params.n_modes);
        let mut scaled = DMatrix::zeros(m, n);
        for j in 0..m {
            for l in 0..n {
                scaled[(j, l)] = sample.mobility[j] * self.multipliers[l] * self.dphi[(j, l)];
            }
        }
        let mut mat = self.dphi.tr_mul(&scaled);
        mat *= tau / m as f64;
        for k in 0..n {
            mat[(k, k)] += 1.0;
        }
        Ok(mat)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarySolveResult {
    pub u: SpectralField,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn norm(r: &SpectralField) -> f64 {
    r.l2_norm()
}

/// Solves one implicit Euler step `u + τ∂ₓ(f_ε(u)∂ₓI(u)) = g` starting from
/// `u_init`.
pub fn stationary_solve(
    g: &SpectralField,
    tau: f64,
    p: &ModelParams,
    u_init: &SpectralField,
) -> Result<StationarySolveResult, StepperError> {
    let disc = Discretization::new(p)?;
    solve_with(&disc, g, tau, u_init)
}

pub(crate) fn solve_with(
    disc: &Discretization,
    g: &SpectralField,
    tau: f64,
    u_init: &SpectralField,
) -> Result<StationarySolveResult, StepperError> {
    if !(tau > 0.0) {
        return Err(StepperError::InvalidParams(format!("tau = {tau} must be positive")));
    }
    let p = disc.params();
    let mut u = u_init.clone();
    let mut r = disc.residual(&u, g, tau)?;
    let mut res = norm(&r);
    let mut iterations = 0;
    while !(res <= p.newton_tol) {
        if iterations >= p.newton_max_iter || !res.is_finite() {
            return Err(StepperError::NonConvergence {
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        let newton = newton_step(disc, &u, g, tau, &r, res)?;
        let (next, next_r) = match newton {
            Some(accepted) => accepted,
            None => picard_step(disc, &u, g, tau)?,
        };
        u = next;
        r = next_r;
        res = norm(&r);
    }
    Ok(StationarySolveResult {
        u,
        residual_norm: res,
        iterations,
        converged: true,
    })
}

fn newton_step(
    disc: &Discretization,
    u: &SpectralField,
    g: &SpectralField,
    tau: f64,
    r: &SpectralField,
    res: f64,
) -> Result<Option<(SpectralField, SpectralField)>, StepperError> {
    let jac = disc.jacobian(u, tau)?;
    let rhs = -DVector::from_column_slice(r.coeffs());
    let Some(delta) = jac.lu().solve(&rhs) else {
        return Ok(None);
    };
    if delta.iter().any(|d| !d.is_finite()) {
        return Ok(None);
    }
    let delta = SpectralField::new(delta.as_slice().to_vec())?;
    let mut damping = 1.0;
    while damping >= disc.params().damping_min {
        let trial = u + &(&delta * damping);
        let tr = disc.residual(&trial, g, tau)?;
        if norm(&tr) <= (1.0 - ARMIJO * damping) * res {
            return Ok(Some((trial, tr)));
        }
        damping *= 0.5;
    }
    Ok(None)
}

fn picard_step(
    disc: &Discretization,
    u: &SpectralField,
    g: &SpectralField,
    tau: f64,
) -> Result<(SpectralField, SpectralField), StepperError> {
    let mat = disc.frozen_mobility_matrix(u, tau)?;
    let rhs = DVector::from_column_slice(g.coeffs());
    let solved = mat.lu().solve(&rhs).ok_or(StepperError::NonConvergence {
        iterations: 0,
        residual: f64::INFINITY,
    })?;
    let target = SpectralField::new(solved.as_slice().to_vec())?;
    let next = &(u * (1.0 - PICARD_RELAXATION)) + &(&target * PICARD_RELAXATION);
    let r = disc.residual(&next, g, tau)?;
    Ok((next, r))
}

/// Galerkin residual of one implicit Euler step.
pub fn residual(
    u: &SpectralField,
    g: &SpectralField,
    tau: f64,
    p: &ModelParams,
) -> Result<SpectralField, StepperError> {
    Discretization::new(p)?.residual(u, g, tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Cumulative estimate slacks after step `k` (positive means satisfied):
///
/// * energy: `‖u⁰‖² − ‖uᵏ‖² − 2τ Σ_{j=1..k} ∫ f_ε(uʲ)(∂ₓI(uʲ))²`
/// * entropy: `∫G_ε(u⁰) − ∫G_ε(uᵏ) − τ Σ_{j=1..k} ‖uʲ‖²_{α/2+1}`, absent when
///   the initial entropy is infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunningEstimate {
    pub energy_slack: f64,
    pub entropy_slack: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub params: ModelParams,
    pub tau: f64,
    /// Solver statistics for steps `1..=n`.
    pub solves: Vec<SolveRecord>,
    /// Running estimates for steps `0..=n`.
    pub estimates: Vec<RunningEstimate>,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn initial(&self) -> &SpectralField {
        &self.states[0]
    }

    pub fn final_state(&self) -> &SpectralField {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Whether every running estimate is within `k · audit_tol` at step `k`.
    pub fn estimates_hold(&self) -> bool {
        let tol = self.params.audit_tol();
        self.estimates.iter().enumerate().all(|(k, e)| {
            let bound = -(k as f64) * tol;
            e.energy_slack >= bound && e.entropy_slack.is_none_or(|s| s >= bound)
        })
    }
}

/// A run that stopped early; `partial` holds every accepted step.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: StepperError,
    pub partial: Trajectory,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} steps completed)", self.error, self.partial.n_steps())
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

struct EstimateTracker {
    energy0: f64,
    entropy0: f64,
    energy_dissip_sum: f64,
    entropy_dissip_sum: f64,
}

impl EstimateTracker {
    fn new(disc: &Discretization, u0: &SpectralField, entropy: &EntropyFn) -> Result<Self, StepperError> {
        let alpha = disc.params().alpha;
        Ok(Self {
            energy0: seminorm_sq(u0, alpha / 2.0)?,
            entropy0: entropy_total(&disc.nodal(u0)?, entropy)?,
            energy_dissip_sum: 0.0,
            entropy_dissip_sum: 0.0,
        })
    }

    fn initial(&self) -> RunningEstimate {
        RunningEstimate {
            energy_slack: 0.0,
            entropy_slack: self.entropy0.is_finite().then_some(0.0),
        }
    }

    fn advance(
        &mut self,
        disc: &Discretization,
        u: &SpectralField,
        tau: f64,
        entropy: &EntropyFn,
    ) -> Result<RunningEstimate, StepperError> {
        let alpha = disc.params().alpha;
        let sample = disc.sample(u)?;
        self.energy_dissip_sum += tau * disc.energy_dissipation(&sample);
        self.entropy_dissip_sum += tau * seminorm_sq(u, alpha / 2.0 + 1.0)?;
        let energy = seminorm_sq(u, alpha / 2.0)?;
        let entropy_slack = if self.entropy0.is_finite() {
            let g = entropy_total(&GridField::new(sample.u)?, entropy)?;
            Some(self.entropy0 - g - self.entropy_dissip_sum)
        } else {
            None
        };
        Ok(RunningEstimate {
            energy_slack: self.energy0 - energy - 2.0 * self.energy_dissip_sum,
            entropy_slack,
        })
    }
}

/// Advances `u0` to time `T` with `n_steps` implicit Euler steps.
pub fn implicit_euler_run(
    u0: &SpectralField,
    t_final: f64,
    n_steps: usize,
    p: &ModelParams,
) -> Result<Trajectory, Box<RunFailure>> {
    run_with_guesses(u0, t_final, n_steps, p, None)
}

/// As [`implicit_euler_run`], but step `k` starts Newton from `guesses[k]`
/// when provided instead of from the previous level.
pub fn run_with_guesses(
    u0: &SpectralField,
    t_final: f64,
    n_steps: usize,
    p: &ModelParams,
    guesses: Option<&[SpectralField]>,
) -> Result<Trajectory, Box<RunFailure>> {
    let tau = if n_steps > 0 {
        t_final / n_steps as f64
    } else {
        f64::NAN
    };
    let start = u0.resized(p.n_modes);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![start.clone()],
        params: *p,
        tau,
        solves: Vec::with_capacity(n_steps),
        estimates: Vec::with_capacity(n_steps + 1),
    };
    let fail = |error: StepperError, traj: Trajectory| Box::new(RunFailure { error, partial: traj });

    if n_steps == 0 {
        return Err(fail(StepperError::InvalidParams("n_steps must be >= 1".into()), traj));
    }
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(fail(
            StepperError::InvalidParams(format!("T = {t_final} must be positive")),
            traj,
        ));
    }
    let disc = match Discretization::new(p) {
        Ok(d) => d,
        Err(e) => return Err(fail(e, traj)),
    };
    let entropy = p.entropy_fn();
    let mut tracker = match EstimateTracker::new(&disc, &start, &entropy) {
        Ok(t) => t,
        Err(e) => return Err(fail(e, traj)),
    };
    traj.estimates.push(tracker.initial());

    for step in 1..=n_steps {
        let prev = traj.states.last().expect("non-empty").clone();
        let guess = guesses
            .and_then(|gs| gs.get(step))
            .filter(|g| g.n_modes() == p.n_modes)
            .unwrap_or(&prev);
        let solved = solve_with(&disc, &prev, tau, guess).or_else(|e| {
            if std::ptr::eq(guess, &prev) {
                Err(e)
            } else {
                solve_with(&disc, &prev, tau, &prev)
            }
        });
        let solved = match solved {
            Ok(s) => s,
            Err(e) => {
                return Err(fail(
                    StepperError::StepFailed {
                        step,
                        source: Box::new(e),
                    },
                    traj,
                ))
            }
        };
        let estimate = match tracker.advance(&disc, &solved.u, tau, &entropy) {
            Ok(e) => e,
            Err(e) => return Err(fail(e, traj)),
        };
        traj.times.push(step as f64 * tau);
        traj.states.push(solved.u);
        traj.solves.push(SolveRecord {
            iterations: solved.iterations,
            residual_norm: solved.residual_norm,
        });
        traj.estimates.push(estimate);
    }
    Ok(traj)
}

#[derive(Debug, Clone)]
pub struct Continuation {
    pub epsilons: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
    /// `L²` distances between the final states of successive runs.
    pub final_distances: Vec<f64>,
}

/// Runs the regularized problem for each `ε` of a strictly decreasing
/// schedule, warm-starting each run from the previous one.
pub fn epsilon_continuation(
    u0: &SpectralField,
    t_final: f64,
    n_steps: usize,
    base: &ModelParams,
    schedule: &[f64],
) -> Result<Continuation, StepperError> {
    let valid = !schedule.is_empty()
        && schedule.iter().all(|e| *e > 0.0 && e.is_finite())
        && schedule.windows(2).all(|w| w[1] < w[0]);
    if !valid {
        return Err(StepperError::InvalidSchedule);
    }
    let mut trajectories: Vec<Trajectory> = Vec::with_capacity(schedule.len());
    for &epsilon in schedule {
        let wrap = |e: StepperError| StepperError::EpsilonFailed {
            epsilon,
            source: Box::new(e),
        };
        let p = base.with_epsilon(epsilon).map_err(wrap)?;
        let guesses = trajectories.last().map(|t| t.states.as_slice());
        let traj = run_with_guesses(u0, t_final, n_steps, &p, guesses).map_err(|f| wrap(f.error))?;
        trajectories.push(traj);
    }
    let final_distances = trajectories
        .windows(2)
        .map(|w| w[0].final_state().l2_distance(w[1].final_state()))
        .collect();
    Ok(Continuation {
        epsilons: schedule.to_vec(),
        trajectories,
        final_distances,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedInitial {
    pub field: SpectralField,
    pub min_before: f64,
    /// Minimum of the truncated field at the input nodes.
    pub min_after: f64,
    /// `Σ_{k≥N} |c_k|·√2`, a bound on the pointwise truncation error.
    pub tail_bound: f64,
    /// Set when truncation turned a nonnegative minimum negative.
    pub undershoot: Option<f64>,
}

/// Projects nodal initial data onto the first `N` modes.
pub fn project_initial(values: &GridField, p: &ModelParams) -> Result<ProjectedInitial, StepperError> {
    let colloc = Collocation::new(values.n_points())?;
    let full = colloc.analyze(values)?;
    let field = full.resized(p.n_modes);
    let tail_bound = full.coeffs().iter().skip(p.n_modes).map(|c| c.abs()).sum::<f64>() * std::f64::consts::SQRT_2;
    let min_before = values.min();
    let at_nodes = colloc.synthesize_values(&field.resized(values.n_points().min(p.n_modes)).into_coeffs())?;
    let min_after = at_nodes.iter().copied().fold(f64::INFINITY, f64::min);
    let undershoot = (min_before >= 0.0 && min_after < 0.0).then_some(-min_after);
    Ok(ProjectedInitial {
        field,
        min_before,
        min_after,
        tail_bound,
        undershoot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(alpha: f64, n: f64, eps: f64, modes: usize) -> ModelParams {
        ModelParams::new(alpha, MobilitySpec::new(n, eps).unwrap(), modes).unwrap()
    }

    fn smooth_positive(modes: usize) -> SpectralField {
        let mut c = vec![0.0; modes];
        c[0] = 1.0;
        c[1] = 0.3;
        c[2] = -0.1;
        c[3] = 0.05;
        SpectralField::new(c).unwrap()
    }

    #[test]
    fn params_validation() {
        let mob = MobilitySpec::new(2.0, 0.1).unwrap();
        assert!(ModelParams::new(0.0, mob, 8).is_err());
        assert!(ModelParams::new(2.0, mob, 8).is_err());
        assert!(ModelParams::new(1.0, mob, 3).is_err());
        let p = ModelParams::new(1.0, mob, 8).unwrap();
        assert_eq!(p.grid_points, 16);
        assert!(p.with_tolerances(0.0, 10, 0.1).is_err());
        assert!(p.with_tolerances(1e-9, 0, 0.1).is_err());
        assert!(p.with_tolerances(1e-9, 10, 0.0).is_err());
    }

    #[test]
    fn residual_vanishes_for_equal_constants() {
        let p = params(1.0, 3.0, 0.0, 8);
        let u = SpectralField::constant(8, 0.7);
        let r = residual(&u, &u, 0.1, &p).unwrap();
        assert!(r.coeffs().iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn residual_mean_is_mass_difference() {
        let p = params(1.3, 2.0, 0.01, 12);
        let u = smooth_positive(12);
        let g = SpectralField::constant(12, 0.8);
        let r = residual(&u, &g, 0.05, &p).unwrap();
        assert!((r.coeffs()[0] - (u.mean() - g.mean())).abs() < 1e-15);
    }

    #[test]
    fn residual_linear_regime() {
        // f_ε ≡ ε when u stays negative, so the operator is exactly linear:
        // R_k = c_k(u) + τ ε (kπ)^{α+2} c_k(u) − c_k(g)
        let (alpha, eps, tau) = (1.0, 1.0, 1e-3);
        let p = params(alpha, 3.0, eps, 10);
        let mut c = vec![0.0; 10];
        c[0] = -5.0;
        c[1] = 1e-3;
        c[4] = -2e-3;
        let u = SpectralField::new(c).unwrap();
        let g = SpectralField::constant(10, -5.0);
        let r = residual(&u, &g, tau, &p).unwrap();
        for k in 0..10 {
            let lin = u.coeffs()[k] * (1.0 + tau * eps * (k as f64 * PI).powf(alpha + 2.0)) - g.coeffs()[k];
            assert!((r.coeffs()[k] - lin).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = params(0.8, 3.0, 1e-3, 8);
        let disc = Discretization::new(&p).unwrap();
        let u = smooth_positive(8);
        let g = SpectralField::constant(8, 1.0);
        let tau = 1e-2;
        let jac = disc.jacobian(&u, tau).unwrap();
        let h = 1e-6;
        for l in 0..8 {
            let mut up = u.clone();
            up.coeffs_mut()[l] += h;
            let mut dn = u.clone();
            dn.coeffs_mut()[l] -= h;
            let rp = disc.residual(&up, &g, tau).unwrap();
            let rm = disc.residual(&dn, &g, tau).unwrap();
            for k in 0..8 {
                let fd = (rp.coeffs()[k] - rm.coeffs()[k]) / (2.0 * h);
                assert!((fd - jac[(k, l)]).abs() < 1e-6 * (1.0 + fd.abs()), "J[{k},{l}]");
            }
        }
    }

    #[test]
    fn constant_is_fixed_point() {
        let p = params(1.0, 3.0, 0.0, 8);
        let g = SpectralField::constant(8, 2.0);
        let s = stationary_solve(&g, 0.1, &p, &g).unwrap();
        assert_eq!(s.iterations, 0);
        assert!(s.converged);
        assert_eq!(s.u, g);
    }

    #[test]
    fn small_amplitude_matches_linear_oracle() {
        let (alpha, eps, tau) = (1.0, 1.0, 1e-2);
        let p = params(alpha, 1.0, eps, 8);
        // u ≈ 0 keeps u₊ⁿ negligible next to ε only to first order, so work
        // around zero mean where f_ε(u) = ε + O(1e-3).
        let g = SpectralField::mode(8, 1, 1e-3);
        let s = stationary_solve(&g, tau, &p, &g).unwrap();
        let lin = 1e-3 / (1.0 + tau * eps * PI.powi(3));
        assert!(((s.u.coeffs()[1] - lin) / lin).abs() < 1e-3);

        // with the mobility exactly ε (negative state) the oracle is exact
        let mut c = vec![0.0; 8];
        c[0] = -1.0;
        c[1] = 1e-3;
        let g = SpectralField::new(c).unwrap();
        let s = stationary_solve(&g, tau, &p, &g).unwrap();
        assert!(((s.u.coeffs()[1] - lin) / lin).abs() < 1e-6);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let p = params(1.5, 3.0, 1e-4, 16)
            .with_tolerances(1e-14, 1, DEFAULT_DAMPING_MIN)
            .unwrap();
        let g = smooth_positive(16);
        let err = stationary_solve(&g, 1.0, &p, &g).unwrap_err();
        assert!(matches!(err, StepperError::NonConvergence { iterations: 1, .. }));
    }

    #[test]
    fn run_conserves_mass_and_satisfies_estimates() {
        let p = params(1.0, 3.0, 1e-3, 16);
        let u0 = smooth_positive(16);
        let traj = implicit_euler_run(&u0, 0.01, 20, &p).unwrap();
        assert_eq!(traj.states.len(), 21);
        assert_eq!(traj.states[0], u0);
        for (k, s) in traj.states.iter().enumerate() {
            assert!((s.mean() - u0.mean()).abs() <= k as f64 * p.newton_tol);
        }
        assert!(traj.estimates_hold(), "{:?}", traj.estimates.last());
    }

    #[test]
    fn constant_run_is_constant() {
        let p = params(0.5, 1.0, 0.0, 8);
        let u0 = SpectralField::constant(8, 0.4);
        let traj = implicit_euler_run(&u0, 1.0, 5, &p).unwrap();
        assert!(traj.states.iter().all(|s| *s == u0));
        assert!(traj
            .estimates
            .iter()
            .all(|e| e.energy_slack == 0.0 && e.entropy_slack == Some(0.0)));
    }

    #[test]
    fn run_rejects_zero_steps() {
        let p = params(0.5, 1.0, 0.0, 8);
        let err = implicit_euler_run(&SpectralField::constant(8, 1.0), 1.0, 0, &p).unwrap_err();
        assert!(matches!(err.error, StepperError::InvalidParams(_)));
    }

    #[test]
    fn failing_run_keeps_partial_trajectory() {
        let p = params(1.5, 3.0, 1e-4, 16).with_tolerances(1e-15, 1, 0.5).unwrap();
        let err = implicit_euler_run(&smooth_positive(16), 10.0, 3, &p).unwrap_err();
        assert_eq!(err.error.step(), Some(1));
        assert_eq!(err.partial.states.len(), 1);
    }

    #[test]
    fn continuation_single_entry_equals_run() {
        let p = params(1.0, 3.0, 1e-2, 8);
        let u0 = smooth_positive(8);
        let c = epsilon_continuation(&u0, 0.01, 5, &p, &[1e-2]).unwrap();
        let direct = implicit_euler_run(&u0, 0.01, 5, &p).unwrap();
        assert_eq!(c.trajectories.len(), 1);
        assert!(c.final_distances.is_empty());
        assert_eq!(c.trajectories[0].states, direct.states);
    }

    #[test]
    fn continuation_rejects_bad_schedules() {
        let p = params(1.0, 3.0, 1e-2, 8);
        let u0 = smooth_positive(8);
        for bad in [&[][..], &[1e-2, 1e-2][..], &[1e-3, 1e-2][..], &[1e-2, 0.0][..]] {
            assert!(matches!(
                epsilon_continuation(&u0, 0.01, 2, &p, bad),
                Err(StepperError::InvalidSchedule)
            ));
        }
    }

    #[test]
    fn project_initial_examples() {
        let p = params(1.0, 1.0, 0.0, 8);
        let vals = GridField::from_fn(32, |x| 1.0 + 0.5 * BasisConvention::phi(1, x)).unwrap();
        let pi = project_initial(&vals, &p).unwrap();
        assert!((pi.field.coeffs()[0] - 1.0).abs() < 1e-14);
        assert!((pi.field.coeffs()[1] - 0.5).abs() < 1e-14);
        assert!(pi.field.coeffs()[2..].iter().all(|c| c.abs() < 1e-14));
        assert!(pi.undershoot.is_none());
        assert_eq!(pi.field.n_modes(), 8);
    }

    #[test]
    fn project_initial_reports_undershoot() {
        let p = params(1.0, 1.0, 0.0, 6);
        // nonnegative bump touching zero on a flat region
        let vals = GridField::from_fn(128, |x| (0.2 - (x - 0.5).abs()).max(0.0)).unwrap();
        let pi = project_initial(&vals, &p).unwrap();
        let under = pi.undershoot.expect("truncation creates a negative dip");
        assert!(under > 0.0);
        assert!(pi.min_before - pi.min_after <= pi.tail_bound);
    }
}
