//! Quasi-isometric stiffening: an increasing sequence `t^k` contracting the feasible set
//! `f(J_k) < 1/t` around an untangled map.

use crate::assembly::{eval_stiffened, Objective};
use crate::constraints::ConstraintSet;
use crate::energy::{Density, EnergyParams};
use crate::error::{Error, Result};
use crate::mesh::{inverted_count, DeformationState, SimplicialMesh};
use crate::report::{ContinuationReport, IterationRecord, Phase, ReportRow, RunStatus};
use crate::solver::{descent_coefficient, minimize, SolverConfig};
use crate::untangle::prepare;

/// When the outer loop stops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Stagnation {
    /// Stop when `t^{k+1} - t^k < relative_stagnation·t^{k+1}`.
    #[default]
    ParameterIncrement,
    /// Stop when `W(X^{k+1}, t^{k+1}) > (1 - relative_stagnation)·W(X^k, t^k)`.
    ///
    /// Since `W` grows with `t`, this usually fires after the first iteration.
    ObjectiveRatio,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StiffenConfig {
    pub theta: f64,
    pub density: Density,
    pub sigma_floor: f64,
    pub relative_stagnation: f64,
    pub stagnation: Stagnation,
    pub max_outer_iterations: usize,
    pub solver: SolverConfig,
}

impl Default for StiffenConfig {
    fn default() -> Self {
        StiffenConfig {
            theta: 0.5,
            density: Density::MixedShapeVolume,
            sigma_floor: 0.1,
            relative_stagnation: 1e-3,
            stagnation: Stagnation::ParameterIncrement,
            max_outer_iterations: 200,
            solver: SolverConfig::default(),
        }
    }
}

impl StiffenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        if !(self.sigma_floor > 0.0 && self.sigma_floor < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma0 must lie in (0, 1), got {}",
                self.sigma_floor
            )));
        }
        if !(self.relative_stagnation > 0.0 && self.relative_stagnation < 1.0) {
            return Err(Error::InvalidParameter("relative stagnation must lie in (0, 1)".into()));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::InvalidParameter(
                "at least one outer iteration is required".into(),
            ));
        }
        self.solver.validate()
    }

    fn params(&self, t: f64) -> EnergyParams {
        EnergyParams::new(self.density, self.theta).stiffened(t)
    }
}

/// Margin below `1` kept for `f_max·t_next`.
const CONTACT_MARGIN: f64 = 1e-12;

/// `t + σ·(1 - t·f_max)/f_max`, pulled back to the midpoint of `[t, 1/f_max]` when it
/// would touch the barrier.
pub fn t_update(t_prev: f64, f_max: f64, sigma: f64) -> Result<f64> {
    if !(f_max >= 1.0 - 1e-12) || !f_max.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "distortion must be at least 1, got {f_max}"
        )));
    }
    if !(t_prev >= 0.0 && t_prev * f_max < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "state is not feasible for t = {t_prev} (f_max = {f_max})"
        )));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must lie in (0, 1), got {sigma}"
        )));
    }
    let f = f_max.max(1.0);
    let next = t_prev + sigma * (1.0 - t_prev * f) / f;
    if f * next >= 1.0 - CONTACT_MARGIN {
        Ok(t_prev + 0.5 * (1.0 / f - t_prev))
    } else {
        Ok(next)
    }
}

#[derive(Clone, Debug)]
pub struct StiffenOutcome {
    pub state: DeformationState,
    pub report: ContinuationReport,
    /// The parameter every element of `state` satisfies `f < 1/t` for.
    pub terminal_t: f64,
}

impl StiffenOutcome {
    pub fn converged(&self) -> bool {
        self.report.status == RunStatus::Converged
    }
}

/// Runs the stiffening continuation from an untangled `initial` state.
pub fn stiffen(
    mesh: &SimplicialMesh,
    initial: &DeformationState,
    constraints: &ConstraintSet,
    config: &StiffenConfig,
) -> Result<StiffenOutcome> {
    config.validate()?;
    let (reduction, mut free) = prepare(mesh, initial, constraints)?;
    let projected = DeformationState::new(mesh.dim(), reduction.expand(&free))?;
    let inverted = inverted_count(mesh, &projected);
    if inverted > 0 {
        return Err(Error::Tangled(inverted));
    }

    let mut t = 0.0;
    let mut objective = Objective::new(mesh, &reduction, config.params(t))?;
    let mut current = objective.value(&free).value;
    let mut report = ContinuationReport::new(Phase::Stiffen);
    for k in 0..config.max_outer_iterations {
        let solve = minimize(&objective, &free, &config.solver)?;
        free = solve.x;
        let after = objective.value(&free);
        let sigma = if k == 0 {
            config.sigma_floor
        } else {
            descent_coefficient(solve.initial_value, solve.final_value, config.sigma_floor)
        };
        let sigma = sigma.min(1.0 - 1e-12);
        let next_t = t_update(t, after.f_max, sigma)?;
        let f = after.f_max.max(1.0);
        let sigma_used = (next_t - t) * f / (1.0 - t * f);
        let next_objective_fn = objective.with_params(config.params(next_t))?;
        let next_value = next_objective_fn.value(&free).value;
        report.records.push(IterationRecord {
            row: ReportRow {
                iter: k,
                param: t,
                objective: solve.final_value,
                f_max: after.f_max,
                d_min: after.d_min,
                inner_iters: solve.iterations,
                sigma: Some(sigma_used),
            },
            start_objective: solve.initial_value,
            next_param: next_t,
            next_objective: next_value,
        });
        let stalled = match config.stagnation {
            Stagnation::ParameterIncrement => next_t - t < config.relative_stagnation * next_t,
            Stagnation::ObjectiveRatio => next_value > (1.0 - config.relative_stagnation) * current,
        };
        t = next_t;
        objective = next_objective_fn;
        current = next_value;
        if stalled {
            report.status = RunStatus::Converged;
            break;
        }
    }

    let state = DeformationState::new(mesh.dim(), reduction.expand(&free))?;
    Ok(StiffenOutcome {
        state,
        report,
        terminal_t: t,
    })
}

/// Checks the invariants a stiffening trace must satisfy; returns one message per violation.
pub fn validate_report(report: &ContinuationReport) -> Vec<String> {
    let mut violations = Vec::new();
    let mut total = 0.0;
    for r in &report.records {
        let k = r.row.iter;
        let (t, t_next) = (r.row.param, r.next_param);
        if !(t_next > t) {
            violations.push(format!("iteration {k}: t does not increase ({t} -> {t_next})"));
        }
        total += t_next - t;
        if !r.row.objective.is_finite() || !r.next_objective.is_finite() || !r.start_objective.is_finite() {
            violations.push(format!("iteration {k}: non-finite objective"));
        }
        if !(r.row.f_max * t < 1.0) {
            violations.push(format!("iteration {k}: f_max·t = {} is not below 1", r.row.f_max * t));
        }
        if !(r.row.f_max * t_next < 1.0) {
            violations.push(format!(
                "iteration {k}: f_max·t_next = {} is not below 1",
                r.row.f_max * t_next
            ));
        }
        if let Some(sigma) = r.row.sigma {
            let lhs = (1.0 - sigma) * r.next_objective;
            let rhs = r.row.objective;
            if lhs > rhs + 1e-9 * rhs.abs() {
                violations.push(format!(
                    "iteration {k}: (1-σ)·W(X, t_next) = {lhs} exceeds W(X, t) = {rhs}"
                ));
            }
        } else {
            violations.push(format!("iteration {k}: missing sigma"));
        }
    }
    if total > 1.0 {
        violations.push(format!("sum of t increments {total} exceeds 1"));
    }
    violations
}

/// Checks the boundedness argument iteration by iteration, with the terminal state as the
/// feasible reference `X*`.
///
/// Where the inner solve achieved essential descent, `W(X^{k+1}, t^{k+1}) ≤ W(X^k, t^k)`
/// must hold. Elsewhere `W(X^{k+1}, t^{k+1}) ≤ W(X*, t^k)/(1-σ)²` is required for every
/// `k` with `t^{k+1}` below the terminal `t`.
pub fn boundedness_violations(
    mesh: &SimplicialMesh,
    outcome: &StiffenOutcome,
    config: &StiffenConfig,
) -> Result<Vec<String>> {
    let mut violations = Vec::new();
    for r in &outcome.report.records {
        let k = r.row.iter;
        let sigma = r.row.sigma.unwrap_or(config.sigma_floor);
        let tol = 1.0 + 1e-9;
        if r.row.objective <= (1.0 - sigma) * r.start_objective * tol {
            if r.next_objective > r.start_objective * tol {
                violations.push(format!(
                    "iteration {k}: descent step but W rose from {} to {}",
                    r.start_objective, r.next_objective
                ));
            }
        } else if r.next_param < outcome.terminal_t {
            let reference = eval_stiffened(mesh, &outcome.state, config.density, config.theta, r.row.param)?;
            let bound = reference.value / (1.0 - sigma).powi(2);
            if r.next_objective > bound * tol {
                violations.push(format!(
                    "iteration {k}: W = {} exceeds W(X*, t)/(1-σ)² = {bound}",
                    r.next_objective
                ));
            }
        }
    }
    Ok(violations)
}
