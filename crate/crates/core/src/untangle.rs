//! Foldover removal by a decreasing regularization sequence `ε^k`.
//!
//! Each outer iteration minimizes `F(X, ε^k)` from the previous iterate, then shrinks `ε`
//! toward `epsilon_floor` in proportion to the depth of the worst remaining inversion.
//! The run stops once no element is inverted and `F` stagnates.

use crate::assembly::Objective;
use crate::constraints::{ConstraintSet, Reduction};
use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::mesh::{jacobian_from_coords, DeformationState, SimplicialMesh};
use crate::report::{ContinuationReport, IterationRecord, Phase, ReportRow, RunStatus};
use crate::solver::{minimize, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UntangleConfig {
    pub theta: f64,
    pub epsilon_floor: f64,
    pub schedule_coefficient: f64,
    pub relative_stagnation: f64,
    pub max_outer_iterations: usize,
    pub solver: SolverConfig,
}

impl Default for UntangleConfig {
    fn default() -> Self {
        UntangleConfig {
            theta: 0.5,
            epsilon_floor: 1e-9,
            schedule_coefficient: 0.04,
            relative_stagnation: 1e-3,
            max_outer_iterations: 200,
            solver: SolverConfig::default(),
        }
    }
}

impl UntangleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        if !(self.epsilon_floor > 0.0) {
            return Err(Error::InvalidParameter("epsilon floor must be positive".into()));
        }
        if !(self.schedule_coefficient > 0.0) {
            return Err(Error::InvalidParameter("schedule coefficient must be positive".into()));
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
}

fn schedule_target(d_min: f64, config: &UntangleConfig) -> f64 {
    let depth = d_min.min(0.0);
    (config.epsilon_floor.powi(2) + config.schedule_coefficient * depth * depth).sqrt()
}

/// `min(ε_prev, sqrt(ε_floor² + c·min(0, d_min)²))`.
pub fn epsilon_update(epsilon_prev: f64, d_min_current: f64, config: &UntangleConfig) -> f64 {
    epsilon_prev.min(schedule_target(d_min_current, config))
}

/// Starting regularization for an input with smallest determinant `d_min` and mean
/// absolute determinant `mean_abs_det`.
pub fn initial_epsilon(d_min: f64, mean_abs_det: f64, config: &UntangleConfig) -> f64 {
    schedule_target(d_min, config).max(1e-2 * mean_abs_det)
}

#[derive(Clone, Debug)]
pub struct UntangleOutcome {
    /// Final state on success; the iterate with the largest `d_min` otherwise.
    pub state: DeformationState,
    pub report: ContinuationReport,
}

impl UntangleOutcome {
    pub fn converged(&self) -> bool {
        self.report.status == RunStatus::Converged
    }

    pub fn d_min_trace(&self) -> Vec<f64> {
        self.report.rows().map(|r| r.d_min).collect()
    }
}

pub(crate) fn prepare(
    mesh: &SimplicialMesh,
    initial: &DeformationState,
    constraints: &ConstraintSet,
) -> Result<(Reduction, Vec<f64>)> {
    initial.check_against(mesh)?;
    if !constraints.is_empty() && constraints.dim() != mesh.dim() {
        return Err(Error::InvalidParameter(format!(
            "constraints are {}-dimensional, the map is {}-dimensional",
            constraints.dim(),
            mesh.dim()
        )));
    }
    let reduction = if constraints.is_empty() {
        Reduction::identity(mesh.dim() * mesh.vertex_count())
    } else {
        constraints.build_reduction(mesh.vertex_count())?
    };
    let free = reduction.restrict(initial.coords());
    Ok((reduction, free))
}

/// Runs the untangling continuation from `initial`.
pub fn untangle(
    mesh: &SimplicialMesh,
    initial: &DeformationState,
    constraints: &ConstraintSet,
    config: &UntangleConfig,
) -> Result<UntangleOutcome> {
    config.validate()?;
    let (reduction, mut free) = prepare(mesh, initial, constraints)?;
    let dim = mesh.dim();

    let full = reduction.expand(&free);
    let dets: Vec<f64> = (0..mesh.simplex_count())
        .map(|k| jacobian_from_coords(mesh, &full, k).det())
        .collect();
    let d_min0 = dets.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_abs = dets.iter().map(|d| d.abs()).sum::<f64>() / dets.len() as f64;
    let mut epsilon = initial_epsilon(d_min0, mean_abs, config);

    let base = EnergyParams::mixed(config.theta);
    let mut objective = Objective::new(mesh, &reduction, base.regularized(epsilon))?;
    let mut current = objective.value(&free).value;

    let mut report = ContinuationReport::new(Phase::Untangle);
    let mut best = (d_min0, free.clone());
    for k in 0..config.max_outer_iterations {
        let solve = minimize(&objective, &free, &config.solver)?;
        free = solve.x;
        let after = objective.value(&free);
        let next_epsilon = epsilon_update(epsilon, after.d_min, config);
        let next_objective_fn = objective.with_params(base.regularized(next_epsilon))?;
        let next_value = next_objective_fn.value(&free).value;
        report.records.push(IterationRecord {
            row: ReportRow {
                iter: k,
                param: epsilon,
                objective: solve.final_value,
                f_max: after.f_max,
                d_min: after.d_min,
                inner_iters: solve.iterations,
                sigma: None,
            },
            start_objective: solve.initial_value,
            next_param: next_epsilon,
            next_objective: next_value,
        });
        if after.d_min > best.0 {
            best = (after.d_min, free.clone());
        }
        if after.d_min > 0.0 && next_value > (1.0 - config.relative_stagnation) * current {
            report.status = RunStatus::Converged;
            break;
        }
        epsilon = next_epsilon;
        objective = next_objective_fn;
        current = next_value;
    }

    let chosen = if report.status == RunStatus::Converged {
        free
    } else {
        best.1
    };
    let state = DeformationState::new(dim, reduction.expand(&chosen))?;
    Ok(UntangleOutcome { state, report })
}
