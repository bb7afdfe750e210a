//! Limited-memory BFGS with a barrier-aware backtracking line search.
//!
//! Trial points whose objective is not finite are rejected exactly like points with
//! insufficient decrease, so an accepted iterate never leaves the feasible set.

use std::collections::VecDeque;

use crate::assembly::Objective;
use crate::error::{Error, Result};

/// An objective over a flat variable vector. `None` marks an infeasible point.
pub trait Minimizable {
    fn value(&self, x: &[f64]) -> Option<f64>;
    fn value_and_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)>;
}

impl Minimizable for Objective<'_> {
    fn value(&self, x: &[f64]) -> Option<f64> {
        let v = Objective::value(self, x);
        v.finite.then_some(v.value)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let v = self.evaluate(x);
        v.finite.then_some((v.value, v.gradient))
    }
}

/// Adapts a closure returning the value and gradient.
pub struct FnObjective<F>(pub F);

impl<F> Minimizable for FnObjective<F>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    fn value(&self, x: &[f64]) -> Option<f64> {
        (self.0)(x).map(|(v, _)| v)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        (self.0)(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_inner_iterations: usize,
    /// Stop once `‖g‖ ≤ gradient_tolerance·‖g₀‖`.
    pub gradient_tolerance: f64,
    pub history_size: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo_c1: f64,
    pub backtracking_factor: f64,
    pub max_backtracks: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_inner_iterations: 500,
            gradient_tolerance: 1e-6,
            history_size: 10,
            armijo_c1: 1e-4,
            backtracking_factor: 0.5,
            max_backtracks: 60,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_inner_iterations > 0
            && self.gradient_tolerance > 0.0
            && self.history_size > 0
            && self.armijo_c1 > 0.0
            && self.armijo_c1 <= 0.5
            && self.backtracking_factor > 0.0
            && self.backtracking_factor < 1.0
            && self.max_backtracks > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid solver configuration {self:?}"
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvergedReason {
    GradientSmall,
    MaxIterations,
    /// The line search could not find an acceptable step.
    NoProgress,
}

#[derive(Clone, Debug)]
pub struct InnerSolveResult {
    pub x: Vec<f64>,
    pub initial_value: f64,
    pub final_value: f64,
    pub iterations: usize,
    pub converged_reason: ConvergedReason,
    /// Value at every accepted iterate, starting with the initial one.
    pub value_history: Vec<f64>,
    pub gradient_norm: f64,
    /// Trial points rejected because the objective was not finite.
    pub infeasible_trials: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `-H·g` by the two-loop recursion.
fn lbfgs_direction(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let gamma = match history.back() {
        Some((s, y, _)) => dot(s, y) / dot(y, y),
        None => 1.0 / norm(g),
    };
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

/// Minimizes `objective` from `start`, never accepting a non-finite point.
pub fn minimize<P: Minimizable + ?Sized>(
    objective: &P,
    start: &[f64],
    config: &SolverConfig,
) -> Result<InnerSolveResult> {
    config.validate()?;
    let (mut f, mut g) = objective
        .value_and_gradient(start)
        .ok_or(Error::InfeasibleStart("the regularization or stiffening parameter"))?;
    let mut x = start.to_vec();
    let initial_value = f;
    let g0 = norm(&g);
    let tol = config.gradient_tolerance * g0;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.history_size);
    let mut value_history = vec![f];
    let mut infeasible_trials = 0;
    let mut iterations = 0;
    let mut reason = ConvergedReason::MaxIterations;
    let mut gnorm = g0;

    if g0 == 0.0 {
        reason = ConvergedReason::GradientSmall;
    }
    while reason == ConvergedReason::MaxIterations && iterations < config.max_inner_iterations {
        let mut d = lbfgs_direction(&g, &history);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = lbfgs_direction(&g, &history);
            slope = dot(&g, &d);
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..config.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            match objective.value(&trial) {
                Some(ft) if ft <= f + config.armijo_c1 * alpha * slope => {
                    accepted = Some(trial);
                    break;
                }
                Some(_) => {}
                None => infeasible_trials += 1,
            }
            alpha *= config.backtracking_factor;
        }
        let Some(trial) = accepted else {
            reason = ConvergedReason::NoProgress;
            break;
        };
        let Some((ft, gt)) = objective.value_and_gradient(&trial) else {
            infeasible_trials += 1;
            reason = ConvergedReason::NoProgress;
            break;
        };
        iterations += 1;

        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if history.len() == config.history_size {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let stalled = ft >= f;
        x = trial;
        f = ft;
        g = gt;
        gnorm = norm(&g);
        value_history.push(f);
        if gnorm <= tol {
            reason = ConvergedReason::GradientSmall;
        } else if stalled {
            reason = ConvergedReason::NoProgress;
        }
    }

    Ok(InnerSolveResult {
        x,
        initial_value,
        final_value: f,
        iterations,
        converged_reason: reason,
        value_history,
        gradient_norm: gnorm,
        infeasible_trials,
    })
}

/// `max(1 - final/initial, σ₀)`: the relative decrease achieved by an inner solve.
pub fn descent_coefficient(initial_value: f64, final_value: f64, sigma_floor: f64) -> f64 {
    let sigma = 1.0 - final_value / initial_value;
    if sigma.is_finite() {
        sigma.max(sigma_floor)
    } else {
        sigma_floor
    }
}
