//! Propeller layout and the tilt-parameterized allocation matrix.
//!
//! Eight bi-directional propellers sit on the vertices of a cube centred at
//! the CoM. All of them tilt by the same angle `alpha` about axes lying on the
//! cube edges, driven by a single servo. At `alpha = 0` every thrust axis is
//! vertical (uni-directional thrust); at `alpha = acos(1/sqrt(3))` the layout
//! coincides with the classic fixed-tilt omnidirectional octorotor, yawed by
//! 15 degrees.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, SMatrix, SVector, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::linalg::{rot_x, rot_z, skew};

pub const N_PROPS: usize = 8;

/// Maps squared propeller speeds to the body wrench `[force; torque]`.
pub type AllocationMatrix = SMatrix<f64, 6, N_PROPS>;
/// Signed squared propeller speeds `w|w|`, in (rad/s)^2.
pub type InputVector = SVector<f64, N_PROPS>;
pub type Wrench = Vector6<f64>;
pub type Matrix3x8 = SMatrix<f64, 3, N_PROPS>;

/// Yaw applied to the pre-tilt frames so that tilt axes lie on cube edges.
pub const CUBE_EDGE_YAW: f64 = PI / 12.0;

/// Tilt angle at which the platform can no longer hover; anchors the
/// default thrust calibration.
pub const HOVER_LIMIT_ALPHA: f64 = 72.0 * PI / 180.0;

/// Handedness of each propeller (0-based order): the
/// drag torque is `-k_i * c_tau * u_i * z_i`.
pub const SPIN_SIGNS: [f64; N_PROPS] = [-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct PlatformParams {
    /// kg
    pub mass: f64,
    /// kg m^2, body frame
    pub inertia: Matrix3<f64>,
    /// Distance from the CoM to each propeller centre, m.
    pub cube_half_diag: f64,
    /// N / (rad/s)^2
    pub thrust_coeff: f64,
    /// N m / (rad/s)^2
    pub drag_coeff: f64,
    /// Symmetric bound on each signed squared speed, (rad/s)^2.
    pub u_w_max: f64,
    /// rad
    pub alpha_min: f64,
    /// rad
    pub alpha_max: f64,
    /// Maximum tilt change per control period, rad.
    pub alpha_rate: f64,
    /// s
    pub control_period: f64,
    /// Propeller inertia about its spin axis, kg m^2.
    pub prop_inertia: f64,
    /// m/s^2
    pub gravity: f64,
}

impl Default for PlatformParams {
    fn default() -> Self {
        let mass = 1.3150;
        let gravity = 9.81;
        let thrust_coeff = 1.0e-5;
        Self {
            mass,
            inertia: Matrix3::from_diagonal(&Vector3::new(1.16e-2, 1.13e-2, 1.13e-2)),
            cube_half_diag: 0.20,
            thrust_coeff,
            drag_coeff: 0.016 * thrust_coeff,
            u_w_max: calibrated_u_w_max(mass, gravity, thrust_coeff, HOVER_LIMIT_ALPHA),
            alpha_min: 0.0,
            alpha_max: 60f64.to_radians(),
            alpha_rate: 0.5f64.to_radians(),
            control_period: 0.004,
            prop_inertia: rod_inertia(0.01, 0.0635),
            gravity,
        }
    }
}

/// Squared-speed bound such that all eight propellers at full thrust just
/// hold the weight when tilted by `hover_limit`: `8 c_f u_max cos(hover_limit) = m g`.
pub fn calibrated_u_w_max(mass: f64, gravity: f64, thrust_coeff: f64, hover_limit: f64) -> f64 {
    mass * gravity / (8.0 * thrust_coeff * hover_limit.cos())
}

/// Spin inertia of a propeller modelled as a thin rod of radius `radius`.
pub fn rod_inertia(prop_mass: f64, radius: f64) -> f64 {
    prop_mass * (2.0 * radius).powi(2) / 12.0
}

impl PlatformParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("thrust_coeff", self.thrust_coeff),
            ("drag_coeff", self.drag_coeff),
            ("cube_half_diag", self.cube_half_diag),
            ("u_w_max", self.u_w_max),
            ("alpha_rate", self.alpha_rate),
            ("control_period", self.control_period),
            ("gravity", self.gravity),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        if !(self.prop_inertia.is_finite() && self.prop_inertia >= 0.0) {
            return Err(Error::invalid("prop_inertia", "must be finite and >= 0"));
        }
        if !(0.0 <= self.alpha_min && self.alpha_min < self.alpha_max && self.alpha_max <= FRAC_PI_2) {
            return Err(Error::invalid(
                "alpha_min/alpha_max",
                format!(
                    "need 0 <= alpha_min < alpha_max <= pi/2, got [{}, {}]",
                    self.alpha_min, self.alpha_max
                ),
            ));
        }
        let j = &self.inertia;
        if (j - j.transpose()).abs().max() > 1e-12 * j.abs().max() || j.cholesky().is_none() {
            return Err(Error::invalid("inertia", "must be symmetric positive definite"));
        }
        Ok(())
    }

    pub fn drag_to_thrust(&self) -> f64 {
        self.drag_coeff / self.thrust_coeff
    }

    pub fn max_prop_thrust(&self) -> f64 {
        self.thrust_coeff * self.u_w_max
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// Propeller centres as columns, `(L / sqrt 3) * (+-1, +-1, +-1)` in the
/// standard numbering.
pub fn propeller_positions(cube_half_diag: f64) -> Result<Matrix3x8> {
    if !(cube_half_diag.is_finite() && cube_half_diag > 0.0) {
        return Err(Error::invalid("cube_half_diag", "must be finite and > 0"));
    }
    #[rustfmt::skip]
    let signs = Matrix3x8::from_row_slice(&[
        1.0, -1.0,  1.0, -1.0,  1.0, -1.0,  1.0, -1.0,
        1.0,  1.0, -1.0, -1.0,  1.0,  1.0, -1.0, -1.0,
        1.0,  1.0,  1.0,  1.0, -1.0, -1.0, -1.0, -1.0,
    ]);
    Ok(signs * (cube_half_diag / 3f64.sqrt()))
}

/// Spin axes of the optimal fixed-tilt omnidirectional octorotor.
pub fn brescianini_axes() -> Matrix3x8 {
    let a = 0.5 + 1.0 / 12f64.sqrt();
    let b = 0.5 - 1.0 / 12f64.sqrt();
    let c = 1.0 / 3f64.sqrt();
    #[rustfmt::skip]
    let m = Matrix3x8::from_row_slice(&[
        -a,  b, -b,  a,  a, -b,  b, -a,
         b,  a, -a, -b, -b, -a,  a,  b,
         c, -c, -c,  c,  c, -c, -c,  c,
    ]);
    m
}

/// Fixed-design spin axes flipped into the upper hemisphere. Propellers are
/// bi-directional, so `z` and `-z` describe the same actuator.
pub fn upper_brescianini_axes() -> Matrix3x8 {
    let mut b = brescianini_axes();
    for mut col in b.column_iter_mut() {
        if col[2] < 0.0 {
            col.neg_mut();
        }
    }
    b
}

/// Tilt axes before the cube-edge yaw: unit vectors orthogonal to both the
/// fixed-design spin axis and `e3`, oriented so that a positive tilt moves
/// the thrust from `e3` toward the (upper-hemisphere) fixed-design axis.
pub fn unrotated_tilt_axes() -> Matrix3x8 {
    let z = upper_brescianini_axes();
    let mut out = Matrix3x8::zeros();
    for (i, zi) in z.column_iter().enumerate() {
        out.set_column(i, &Vector3::z().cross(&zi).normalize());
    }
    out
}

/// Tilt axes of the built platform; they lie along the edges of the
/// propeller cube.
pub fn tilt_axes() -> Matrix3x8 {
    rot_z(CUBE_EDGE_YAW) * unrotated_tilt_axes()
}

/// Fixed geometry of the eight propellers.
#[derive(Debug, Clone, PartialEq)]
pub struct PropellerLayout {
    pub positions: Matrix3x8,
    pub spin_signs: [f64; N_PROPS],
    /// Per-propeller frames `R'_i = [b~_i, e3 x b~_i, e3]`.
    pub base_rotations: [Matrix3<f64>; N_PROPS],
    /// `R'_i * R_z(pi/12)`, cached.
    tilt_frames: [Matrix3<f64>; N_PROPS],
}

impl PropellerLayout {
    pub fn omnimorph(cube_half_diag: f64) -> Result<Self> {
        let positions = propeller_positions(cube_half_diag)?;
        let axes = unrotated_tilt_axes();
        let mut base_rotations = [Matrix3::zeros(); N_PROPS];
        let mut tilt_frames = [Matrix3::zeros(); N_PROPS];
        for i in 0..N_PROPS {
            let x = axes.column(i).into_owned();
            let z = Vector3::z();
            let y = z.cross(&x);
            base_rotations[i] = Matrix3::from_columns(&[x, y, z]);
            tilt_frames[i] = base_rotations[i] * rot_z(CUBE_EDGE_YAW);
        }
        Ok(Self {
            positions,
            spin_signs: SPIN_SIGNS,
            base_rotations,
            tilt_frames,
        })
    }

    pub fn for_params(params: &PlatformParams) -> Result<Self> {
        Self::omnimorph(params.cube_half_diag)
    }

    pub fn count(&self) -> usize {
        N_PROPS
    }

    /// Body-frame orientation of propeller `i` (0-based) at tilt `alpha`:
    /// `R'_i R_z(pi/12) R_x(alpha)`. The third column is the thrust axis.
    pub fn rotation(&self, i: usize, alpha: f64) -> Result<Matrix3<f64>> {
        let frame = self.tilt_frames.get(i).ok_or(Error::PropellerIndex(i))?;
        Ok(frame * rot_x(alpha))
    }

    /// Thrust axis of propeller `i` at tilt `alpha`.
    pub fn thrust_axis(&self, i: usize, alpha: f64) -> Vector3<f64> {
        let (s, c) = alpha.sin_cos();
        self.tilt_frames[i] * Vector3::new(0.0, -s, c)
    }

    fn thrust_axis_derivative(&self, i: usize, alpha: f64) -> Vector3<f64> {
        let (s, c) = alpha.sin_cos();
        self.tilt_frames[i] * Vector3::new(0.0, -c, -s)
    }

    fn wrench_column(&self, i: usize, z: &Vector3<f64>, thrust_coeff: f64, drag_ratio: f64) -> Vector6<f64> {
        let p = self.positions.column(i).into_owned();
        let torque = (skew(&p) - Matrix3::identity() * (self.spin_signs[i] * drag_ratio)) * z;
        Vector6::new(z.x, z.y, z.z, torque.x, torque.y, torque.z) * thrust_coeff
    }
}

/// Propeller orientation for the standard layout; see [`PropellerLayout::rotation`].
pub fn propeller_rotation(layout: &PropellerLayout, i: usize, alpha: f64) -> Result<Matrix3<f64>> {
    layout.rotation(i, alpha)
}

/// `A(alpha)`: column `i` is `c_f [z_i; (p_i x - k_i c_tau/c_f) z_i]`.
pub fn allocation_matrix(params: &PlatformParams, layout: &PropellerLayout, alpha: f64) -> AllocationMatrix {
    let ratio = params.drag_to_thrust();
    let mut a = AllocationMatrix::zeros();
    for i in 0..N_PROPS {
        let z = layout.thrust_axis(i, alpha);
        a.set_column(i, &layout.wrench_column(i, &z, params.thrust_coeff, ratio));
    }
    a
}

/// `dA/dalpha`, differentiated analytically.
pub fn allocation_matrix_derivative(params: &PlatformParams, layout: &PropellerLayout, alpha: f64) -> AllocationMatrix {
    let ratio = params.drag_to_thrust();
    let mut a = AllocationMatrix::zeros();
    for i in 0..N_PROPS {
        let dz = layout.thrust_axis_derivative(i, alpha);
        a.set_column(i, &layout.wrench_column(i, &dz, params.thrust_coeff, ratio));
    }
    a
}

/// Sensitivity of the wrench to the tilt angle, `(dA/dalpha) u_w`.
pub fn allocation_alpha_jacobian(
    params: &PlatformParams,
    layout: &PropellerLayout,
    alpha: f64,
    u_w: &InputVector,
) -> Wrench {
    allocation_matrix_derivative(params, layout, alpha) * u_w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup() -> (PlatformParams, PropellerLayout) {
        let p = PlatformParams::default();
        let l = PropellerLayout::for_params(&p).unwrap();
        (p, l)
    }

    #[test]
    fn positions_are_sign_vectors_for_sqrt3() {
        let pos = propeller_positions(3f64.sqrt()).unwrap();
        assert_relative_eq!(pos.column(0).into_owned(), Vector3::new(1.0, 1.0, 1.0), epsilon = 1e-15);
        for col in pos.column_iter() {
            for v in col.iter() {
                assert_relative_eq!(v.abs(), 1.0, epsilon = 1e-15);
            }
        }
        // all eight sign patterns are distinct
        for i in 0..8 {
            for j in (i + 1)..8 {
                assert!((pos.column(i) - pos.column(j)).norm() > 1.0);
            }
        }
    }

    #[test]
    fn positions_reject_degenerate_cube() {
        assert!(propeller_positions(0.0).is_err());
        assert!(propeller_positions(-0.1).is_err());
        assert!(propeller_positions(f64::NAN).is_err());
    }

    #[test]
    fn position_norms_equal_half_diagonal() {
        for l in [0.05, 0.2, 1.7] {
            for col in propeller_positions(l).unwrap().column_iter() {
                assert_relative_eq!(col.norm(), l, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn brescianini_matrix_entries() {
        let b = brescianini_axes();
        assert_relative_eq!(b[(0, 0)], -0.788_675_134_594_812_9, epsilon = 1e-15);
        assert_relative_eq!(b[(1, 0)], 0.211_324_865_405_187_1, epsilon = 1e-15);
        assert_relative_eq!(b[(2, 0)], 0.577_350_269_189_625_8, epsilon = 1e-15);
        for col in b.column_iter() {
            assert_relative_eq!(col.norm(), 1.0, epsilon = 1e-15);
        }
        let sum: Vector3<f64> = b.column_iter().map(|c| c.into_owned()).sum();
        assert!(sum.norm() < 1e-15);
    }

    #[test]
    fn unrotated_axes_orthogonality_pattern() {
        let bt = unrotated_tilt_axes();
        let z = brescianini_axes();
        for i in 0..8 {
            assert_relative_eq!(bt.column(i).dot(&z.column(i)), 0.0, epsilon = 1e-15);
            assert_relative_eq!(bt.column(i)[2], 0.0, epsilon = 1e-15);
        }
        for i in [0, 3, 4, 7] {
            for j in [1, 2, 5, 6] {
                assert_relative_eq!(bt.column(i).dot(&bt.column(j)), 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn rotated_axes_lie_on_cube_edges() {
        // enumerate the 12 edges of the propeller cube and collect their directions
        let pos = propeller_positions(1.0).unwrap();
        let edge = 2.0 / 3f64.sqrt();
        let mut dirs = Vec::new();
        for i in 0..8 {
            for j in (i + 1)..8 {
                let d = pos.column(j) - pos.column(i);
                if (d.norm() - edge).abs() < 1e-12 {
                    dirs.push(d.normalize());
                }
            }
        }
        assert_eq!(dirs.len(), 12);
        for b in tilt_axes().column_iter() {
            let best = dirs.iter().map(|d| d.dot(&b).abs()).fold(0.0, f64::max);
            assert!((best - 1.0).abs() < 1e-12, "axis {b} not on an edge");
        }
    }

    #[test]
    fn rotation_is_proper_and_vertical_at_zero() {
        let (_, l) = setup();
        for i in 0..8 {
            let r = l.rotation(i, 0.0).unwrap();
            assert_relative_eq!(r.column(2).into_owned(), Vector3::z(), epsilon = 1e-15);
            for alpha in [-1.0, 0.0, 0.3, 1.2, 3.0] {
                let r = l.rotation(i, alpha).unwrap();
                assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-12);
                assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
            }
        }
        assert!(matches!(l.rotation(8, 0.1), Err(Error::PropellerIndex(8))));
    }

    #[test]
    fn base_rotations_are_proper() {
        let (_, l) = setup();
        for r in &l.base_rotations {
            assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-15);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-15);
        }
        assert_eq!(l.spin_signs.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn allocation_extremes() {
        let (p, l) = setup();
        let a0 = allocation_matrix(&p, &l, 0.0);
        let ct = p.drag_coeff;
        for i in 0..8 {
            assert_relative_eq!(a0[(0, i)], 0.0, epsilon = 1e-20);
            assert_relative_eq!(a0[(1, i)], 0.0, epsilon = 1e-20);
            assert_relative_eq!(a0[(2, i)], p.thrust_coeff, epsilon = 1e-20);
            assert_relative_eq!(a0[(5, i)], -SPIN_SIGNS[i] * ct, epsilon = 1e-20);
        }
        let a90 = allocation_matrix(&p, &l, FRAC_PI_2);
        for i in 0..8 {
            assert!(a90[(2, i)].abs() < 1e-20);
        }
    }

    #[test]
    fn force_columns_have_norm_cf() {
        let (p, l) = setup();
        for k in 0..=30 {
            let a = allocation_matrix(&p, &l, k as f64 * 0.05);
            for i in 0..8 {
                assert_relative_eq!(a.fixed_view::<3, 1>(0, i).norm(), p.thrust_coeff, epsilon = 1e-18);
            }
        }
    }

    #[test]
    fn jacobian_zero_input_and_vertical_derivative_at_zero() {
        let (p, l) = setup();
        assert_eq!(
            allocation_alpha_jacobian(&p, &l, 0.7, &InputVector::zeros()),
            Wrench::zeros()
        );
        let u = InputVector::from_element(1.0e5);
        let f2 = allocation_alpha_jacobian(&p, &l, 0.0, &u);
        assert!(f2[2].abs() < 1e-15);
    }
}
