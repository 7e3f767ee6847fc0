//! Dense solvers for the two small problems the platform needs: a strictly
//! convex box-constrained QP (control allocation) and a bounded LP
//! (force-set support queries).

mod lp;
mod qp;

pub use lp::{solve_lp, BoundedLP, LpOutcome, LpSolution};
pub use qp::{solve_box_qp, solve_box_qp_warm, BoundStatus, BoxQP, QpOptions, QpSolution};

use nalgebra::DVector;

#[derive(Debug, Clone, thiserror::Error)]
pub enum OptimizerError {
    #[error("QP did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize, best: DVector<f64> },
    #[error("ill-posed problem: {0}")]
    InvalidProblem(String),
}
