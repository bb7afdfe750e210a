//! Foldover-free simplicial maps and quasi-isometric stiffening.
//!
//! The crate untangles a deformation of a triangle or tetrahedral mesh by a decreasing
//! regularization continuation, then stiffens the result by an increasing barrier
//! parameter `t` that bounds every element distortion below `1/t`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod constraints;
pub mod energy;
pub mod error;
pub mod generators;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod quality;
pub mod report;
pub mod solver;
pub mod stiffen;
pub mod untangle;

pub use assembly::{eval_regularized, eval_stiffened, Objective, ObjectiveValue};
pub use constraints::{AffineRow, ConstraintSet, FractionalIndex, Reduction};
pub use energy::{Density, EnergyParams};
pub use error::{Error, Result};
pub use linalg::Mat;
pub use mesh::{DeformationState, SimplicialMesh};
pub use quality::{
    gamma_bound, gamma_bound_mixed, gamma_bound_sd, measured_gamma, quality_stats, singular_values, QualityStats,
};
pub use report::{ContinuationReport, IterationRecord, Phase, ReportRow, RunStatus, Summary};
pub use solver::{minimize, InnerSolveResult, SolverConfig};
pub use stiffen::{stiffen, StiffenConfig, StiffenOutcome};
pub use untangle::{untangle, UntangleConfig, UntangleOutcome};
