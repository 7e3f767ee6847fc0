//! Actuation regime of the platform from the rank of the full allocation
//! matrix `F(u) = [A(alpha) | dA/dalpha u_w]`.

use nalgebra::{DMatrix, SMatrix, Vector6};

use crate::geometry::{allocation_alpha_jacobian, allocation_matrix, InputVector, PlatformParams, PropellerLayout};
use crate::linalg;

pub type FullAllocation = SMatrix<f64, 6, 9>;

/// Relative singular-value threshold used for every rank decision.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActuationTag {
    /// rank(F) <= 4
    Underactuated,
    /// rank(F) = 5: the wrench can only be changed on a five-dimensional
    /// manifold.
    ReducedManifold5,
    /// rank(F) = 6 but only thanks to the tilt input; rank(A) = 5.
    FullyActuated,
    /// rank(A) = 6: fully actuated by the propellers alone, with the tilt as
    /// a redundant ninth input.
    FullyActuatedRedundant,
}

impl std::fmt::Display for ActuationTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ActuationTag::Underactuated => "underactuated",
            ActuationTag::ReducedManifold5 => "reduced-manifold-5",
            ActuationTag::FullyActuated => "fully-actuated",
            ActuationTag::FullyActuatedRedundant => "fully-actuated-redundant",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActuationClass {
    pub tag: ActuationTag,
    /// rank of the full 6x9 allocation matrix
    pub rank: usize,
    /// rank of `A(alpha)` alone
    pub allocation_rank: usize,
    pub singular_values: Vector6<f64>,
}

pub fn full_allocation(
    params: &PlatformParams,
    layout: &PropellerLayout,
    u_w: &InputVector,
    alpha: f64,
) -> FullAllocation {
    let mut f = FullAllocation::zeros();
    f.fixed_view_mut::<6, 8>(0, 0)
        .copy_from(&allocation_matrix(params, layout, alpha));
    f.set_column(8, &allocation_alpha_jacobian(params, layout, alpha, u_w));
    f
}

pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    linalg::numerical_rank(m, tol)
}

pub fn classify_actuation(
    params: &PlatformParams,
    layout: &PropellerLayout,
    alpha: f64,
    u_w: &InputVector,
) -> ActuationClass {
    let f = full_allocation(params, layout, u_w, alpha);
    let f_dyn = DMatrix::from_column_slice(6, 9, f.as_slice());
    let a_dyn = f_dyn.columns(0, 8).into_owned();

    let sv = linalg::singular_values(&f_dyn);
    let rank = linalg::numerical_rank(&f_dyn, RANK_TOL);
    let allocation_rank = linalg::numerical_rank(&a_dyn, RANK_TOL);
    let tag = match (rank, allocation_rank) {
        (0..=4, _) => ActuationTag::Underactuated,
        (5, _) => ActuationTag::ReducedManifold5,
        (_, 6) => ActuationTag::FullyActuatedRedundant,
        _ => ActuationTag::FullyActuated,
    };
    ActuationClass {
        tag,
        rank,
        allocation_rank,
        singular_values: Vector6::from_iterator(sv.iter().take(6).cloned()),
    }
}

/// Rank of `A(alpha)` alone.
pub fn allocation_rank(params: &PlatformParams, layout: &PropellerLayout, alpha: f64) -> usize {
    let a = allocation_matrix(params, layout, alpha);
    linalg::numerical_rank(&DMatrix::from_column_slice(6, 8, a.as_slice()), RANK_TOL)
}
