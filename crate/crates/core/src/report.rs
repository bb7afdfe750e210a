//! Per-iteration traces of the continuation drivers.

use crate::energy::Density;
use crate::quality::{gamma_bound, QualityStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Untangle,
    Stiffen,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
}

/// One CSV row: `iter,param,objective,f_max,d_min,inner_iters,sigma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReportRow {
    pub iter: usize,
    /// `ε^k` when untangling, `t^k` when stiffening.
    pub param: f64,
    /// Objective after the inner solve, at the iteration's own parameter.
    pub objective: f64,
    pub f_max: f64,
    pub d_min: f64,
    pub inner_iters: usize,
    /// Step coefficient used for the next `t`; absent for untangling.
    pub sigma: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub row: ReportRow,
    /// Objective at the start of the inner solve.
    pub start_objective: f64,
    /// Parameter of the following iteration.
    pub next_param: f64,
    /// Objective at the post-solve state under `next_param`.
    pub next_objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationReport {
    pub phase: Phase,
    pub records: Vec<IterationRecord>,
    pub status: RunStatus,
}

impl ContinuationReport {
    pub fn new(phase: Phase) -> Self {
        ContinuationReport {
            phase,
            records: Vec::new(),
            status: RunStatus::BudgetExhausted,
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &ReportRow> + '_ {
        self.records.iter().map(|r| &r.row)
    }

    pub fn outer_iterations(&self) -> usize {
        self.records.len()
    }

    /// Parameter the returned state was certified against.
    pub fn terminal_param(&self) -> Option<f64> {
        self.records.last().map(|r| r.next_param)
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

/// End-of-run figures printed on stdout and appended to the report CSV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    /// Measured quasi-isometry constant; absent when `θ = 0`.
    pub gamma: Option<f64>,
    /// Guaranteed bound at the terminal `t`; absent without stiffening or when undefined.
    pub gamma_bound: Option<f64>,
    pub t: Option<f64>,
    pub f_max: f64,
    pub d_min: f64,
}

impl Summary {
    pub fn new(stats: &QualityStats, density: Density, theta: f64, dim: usize, t: Option<f64>) -> Self {
        let volume_term = density == Density::SymmetricDirichlet || theta > 0.0;
        Summary {
            gamma: stats.measured_gamma.filter(|_| volume_term),
            gamma_bound: t
                .and_then(|t| gamma_bound(density, t, theta, dim).ok())
                .filter(|_| volume_term),
            t,
            f_max: stats.f_max,
            d_min: stats.d_min,
        }
    }

    /// `gamma=<v> gamma_bound=<v> t=<v> f_max=<v> d_min=<v>`, with `n/a` for absent values.
    pub fn line(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| v.to_string());
        format!(
            "gamma={} gamma_bound={} t={} f_max={} d_min={}",
            opt(self.gamma),
            opt(self.gamma_bound),
            opt(self.t),
            self.f_max,
            self.d_min
        )
    }
}
