//! PD + feedforward reference acceleration followed by a per-step QP that
//! trades input norm, acceleration tracking and propeller acceleration.
//!
//! The tilt angle enters the allocation nonlinearly, so it is not a QP
//! variable. Instead the QP is solved for three candidate tilts around the
//! previous one and the cheapest candidate wins.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, SMatrix, Vector3, Vector6};

use crate::dynamics::RigidBodyState;
use crate::error::{Error, Result};
use crate::geometry::{allocation_matrix, InputVector, PlatformParams, PropellerLayout, N_PROPS};
use crate::linalg::vee;
use crate::optimizer::{solve_box_qp_warm, BoundStatus, BoxQP, OptimizerError, QpOptions};

pub type InputWeight = SMatrix<f64, N_PROPS, N_PROPS>;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlGains {
    /// velocity gain, 1/s
    pub kp1: Matrix3<f64>,
    /// position gain, 1/s^2
    pub kp2: Matrix3<f64>,
    /// angular velocity gain, 1/s
    pub kw1: Matrix3<f64>,
    /// attitude gain, 1/s^2
    pub kw2: Matrix3<f64>,
}

impl ControlGains {
    pub fn uniform(kp1: f64, kp2: f64, kw1: f64, kw2: f64) -> Self {
        Self {
            kp1: Matrix3::identity() * kp1,
            kp2: Matrix3::identity() * kp2,
            kw1: Matrix3::identity() * kw1,
            kw2: Matrix3::identity() * kw2,
        }
    }

    /// Gains shared by both bundled presets.
    pub fn preset() -> Self {
        Self::uniform(30.0, 300.0, 40.0, 100.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, k) in [
            ("kp1", &self.kp1),
            ("kp2", &self.kp2),
            ("kw1", &self.kw1),
            ("kw2", &self.kw2),
        ] {
            let off_diag = (k - Matrix3::from_diagonal(&k.diagonal())).abs().max();
            if off_diag != 0.0 || k.diagonal().iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::invalid(name, "gain must be diagonal with positive entries"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptWeights {
    /// input norm
    pub w1: InputWeight,
    /// acceleration tracking, translational block first
    pub w2: Matrix6<f64>,
    /// input rate
    pub w3: InputWeight,
}

impl OptWeights {
    pub fn diagonal(w1: f64, w2_trans: f64, w2_rot: f64, w3: f64) -> Self {
        Self {
            w1: InputWeight::identity() * w1,
            w2: Matrix6::from_diagonal(&Vector6::new(w2_trans, w2_trans, w2_trans, w2_rot, w2_rot, w2_rot)),
            w3: InputWeight::identity() * w3,
        }
    }

    /// Tight tracking at the price of input effort.
    pub fn case_a() -> Self {
        Self::diagonal(1e-8, 3e6, 1e3, 1e-5)
    }

    /// Effort-saving weights with looser tracking.
    pub fn case_b() -> Self {
        Self::diagonal(1e-5, 3e4, 10.0, 1e-5)
    }

    pub fn validate(&self) -> Result<()> {
        fn spd<const N: usize>(m: &SMatrix<f64, N, N>) -> bool {
            let sym = (m - m.transpose()).abs().max() <= 1e-12 * m.abs().max();
            sym && m.iter().all(|v| v.is_finite()) && m.cholesky().is_some()
        }
        if !spd(&self.w1) {
            return Err(Error::invalid("w1", "must be symmetric positive definite"));
        }
        if !spd(&self.w2) {
            return Err(Error::invalid("w2", "must be symmetric positive definite"));
        }
        if !spd(&self.w3) {
            return Err(Error::invalid("w3", "must be symmetric positive definite"));
        }
        Ok(())
    }
}

/// Desired pose with consistent derivatives. Angular quantities are in the
/// body frame of `r_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatReference {
    pub p_d: Vector3<f64>,
    pub v_d: Vector3<f64>,
    pub a_d: Vector3<f64>,
    pub r_d: Matrix3<f64>,
    pub w_d: Vector3<f64>,
    pub dw_d: Vector3<f64>,
}

impl FlatReference {
    pub fn hold(p_d: Vector3<f64>, r_d: Matrix3<f64>) -> Self {
        Self {
            p_d,
            v_d: Vector3::zeros(),
            a_d: Vector3::zeros(),
            r_d,
            w_d: Vector3::zeros(),
            dw_d: Vector3::zeros(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    pub alpha_prev: f64,
    pub u_w_prev: InputVector,
    pub warm_start: Option<Vec<BoundStatus>>,
}

impl ControllerState {
    pub fn new(alpha: f64, u_w: InputVector) -> Self {
        Self {
            alpha_prev: alpha,
            u_w_prev: u_w,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ControlOptions {
    /// Freeze the tilt at this angle instead of searching.
    pub fixed_alpha: Option<f64>,
    pub qp: QpOptions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerms {
    pub input: f64,
    pub tracking: f64,
    pub rate: f64,
}

impl CostTerms {
    pub fn total(&self) -> f64 {
        self.input + self.tracking + self.rate
    }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub alpha: f64,
    /// `None` if the QP failed for this tilt.
    pub cost: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ControlSolution {
    pub alpha: f64,
    pub u_w: InputVector,
    pub cost: CostTerms,
    pub q_ddot_ref: Vector6<f64>,
    pub candidates: Vec<Candidate>,
    pub qp_iterations: usize,
}

/// `e_R = 1/2 (R^T R_d - R_d^T R)^vee`
pub fn attitude_error(r: &Matrix3<f64>, r_d: &Matrix3<f64>) -> Vector3<f64> {
    vee(&(r.transpose() * r_d))
}

pub fn reference_accel(state: &RigidBodyState, reference: &FlatReference, gains: &ControlGains) -> Vector6<f64> {
    let trans = reference.a_d + gains.kp1 * (reference.v_d - state.v) + gains.kp2 * (reference.p_d - state.p);
    let rot =
        reference.dw_d + gains.kw1 * (reference.w_d - state.w) + gains.kw2 * attitude_error(&state.r, &reference.r_d);
    Vector6::new(trans.x, trans.y, trans.z, rot.x, rot.y, rot.z)
}

/// The optimization problem at a fixed tilt, in physical units. The cost is
/// `1/2 u'Hu + g'u + constant`.
#[derive(Debug, Clone)]
pub struct ReducedQp {
    /// maps inputs to generalized acceleration: `qdd = G u - r_offset`
    pub g_map: SMatrix<f64, 6, N_PROPS>,
    /// `q_ddot_ref - M^-1 h`
    pub r: Vector6<f64>,
    pub qp: BoxQP,
    pub constant: f64,
}

impl ReducedQp {
    pub fn total_cost(&self, u: &InputVector) -> f64 {
        let x = DVector::from_column_slice(u.as_slice());
        self.qp.cost(&x) + self.constant
    }
}

/// Eliminates the acceleration from the problem using the Newton–Euler
/// equations at the current state: `qdd = M^-1 (h + J_R A(alpha) u)`.
pub fn build_reduced_qp(
    params: &PlatformParams,
    layout: &PropellerLayout,
    alpha_bar: f64,
    state: &RigidBodyState,
    q_ddot_ref: &Vector6<f64>,
    weights: &OptWeights,
    u_w_prev: &InputVector,
) -> ReducedQp {
    let (g_map, r) = acceleration_map(params, layout, alpha_bar, state, q_ddot_ref);
    let gt_w2 = g_map.transpose() * weights.w2;
    let h = (weights.w1 + gt_w2 * g_map + weights.w3) * 2.0;
    let h = (h + h.transpose()) * 0.5;
    let lin = -(gt_w2 * r + weights.w3 * u_w_prev) * 2.0;
    let constant = r.dot(&(weights.w2 * r)) + u_w_prev.dot(&(weights.w3 * u_w_prev));
    let u_max = params.u_w_max;
    ReducedQp {
        g_map,
        r,
        qp: BoxQP {
            hessian: DMatrix::from_column_slice(N_PROPS, N_PROPS, h.as_slice()),
            linear: DVector::from_column_slice(lin.as_slice()),
            lower: DVector::from_element(N_PROPS, -u_max),
            upper: DVector::from_element(N_PROPS, u_max),
        },
        constant,
    }
}

fn acceleration_map(
    params: &PlatformParams,
    layout: &PropellerLayout,
    alpha: f64,
    state: &RigidBodyState,
    q_ddot_ref: &Vector6<f64>,
) -> (SMatrix<f64, 6, N_PROPS>, Vector6<f64>) {
    let a = allocation_matrix(params, layout, alpha);
    let j_inv = params.inertia.try_inverse().expect("validated inertia is invertible");
    let mut g_map = SMatrix::<f64, 6, N_PROPS>::zeros();
    g_map
        .fixed_rows_mut::<3>(0)
        .copy_from(&(state.r * a.fixed_rows::<3>(0) / params.mass));
    g_map.fixed_rows_mut::<3>(3).copy_from(&(j_inv * a.fixed_rows::<3>(3)));
    let gyro = -state.w.cross(&(params.inertia * state.w));
    let m_inv_h_rot = j_inv * gyro;
    let m_inv_h = Vector6::new(0.0, 0.0, -params.gravity, m_inv_h_rot.x, m_inv_h_rot.y, m_inv_h_rot.z);
    (g_map, q_ddot_ref - m_inv_h)
}

fn cost_terms(
    weights: &OptWeights,
    g_map: &SMatrix<f64, 6, N_PROPS>,
    r: &Vector6<f64>,
    u: &InputVector,
    u_prev: &InputVector,
) -> CostTerms {
    let e = r - g_map * u;
    let du = u - u_prev;
    CostTerms {
        input: u.dot(&(weights.w1 * u)),
        tracking: e.dot(&(weights.w2 * e)),
        rate: du.dot(&(weights.w3 * du)),
    }
}

/// Candidate tilts `{a - eps, a, a + eps}` clamped to the admissible range,
/// ascending and without duplicates.
pub fn candidate_alphas(params: &PlatformParams, alpha_prev: f64) -> Vec<f64> {
    let eps = params.alpha_rate;
    let mut out: Vec<f64> = [alpha_prev - eps, alpha_prev, alpha_prev + eps]
        .iter()
        .map(|a| a.clamp(params.alpha_min, params.alpha_max))
        .collect();
    out.dedup();
    out
}

/// Rescales to `x = u / u_max` and normalizes the Hessian so the solver's
/// absolute tolerances act relative to the problem size.
fn scaled(qp: &BoxQP, u_max: f64) -> BoxQP {
    let h = &qp.hessian * (u_max * u_max);
    let scale = h.diagonal().amax().max(f64::MIN_POSITIVE);
    BoxQP {
        hessian: h / scale,
        linear: &qp.linear * (u_max / scale),
        lower: DVector::from_element(qp.dim(), -1.0),
        upper: DVector::from_element(qp.dim(), 1.0),
    }
}

/// One control decision. `t` is only used to label faults.
#[allow(clippy::too_many_arguments)]
pub fn control_step(
    params: &PlatformParams,
    layout: &PropellerLayout,
    gains: &ControlGains,
    weights: &OptWeights,
    options: &ControlOptions,
    state: &RigidBodyState,
    reference: &FlatReference,
    ctrl: &mut ControllerState,
    t: f64,
) -> Result<ControlSolution> {
    let q_ddot_ref = reference_accel(state, reference, gains);
    let alphas = match options.fixed_alpha {
        Some(a) => vec![a],
        None => candidate_alphas(params, ctrl.alpha_prev),
    };
    let u_max = params.u_w_max;

    let mut candidates = Vec::with_capacity(alphas.len());
    let mut best: Option<(f64, InputVector, CostTerms, Vec<BoundStatus>)> = None;
    let mut iterations = 0;
    let mut last_error: Option<OptimizerError> = None;
    for &alpha in &alphas {
        let reduced = build_reduced_qp(params, layout, alpha, state, &q_ddot_ref, weights, &ctrl.u_w_prev);
        let s = scaled(&reduced.qp, u_max);
        let sol = match solve_box_qp_warm(&s, &options.qp, ctrl.warm_start.as_deref()) {
            Ok(sol) => sol,
            Err(e) => {
                candidates.push(Candidate { alpha, cost: None });
                last_error = Some(e);
                continue;
            }
        };
        iterations += sol.iterations;
        let u = InputVector::from_iterator(sol.x.iter().map(|x| x * u_max));
        let terms = cost_terms(weights, &reduced.g_map, &reduced.r, &u, &ctrl.u_w_prev);
        let total = terms.total();
        candidates.push(Candidate {
            alpha,
            cost: Some(total),
        });
        // strict comparison keeps the smallest tilt on ties
        if best.as_ref().is_none_or(|(_, _, c, _)| total < c.total()) {
            best = Some((alpha, u, terms, sol.active_set));
        }
    }

    let Some((alpha, u_w, cost, active)) = best else {
        return Err(Error::ControllerFault {
            t,
            reason: format!(
                "QP failed for every candidate tilt: {}",
                last_error.map_or_else(|| "no candidates".to_string(), |e| e.to_string())
            ),
        });
    };
    ctrl.alpha_prev = alpha;
    ctrl.u_w_prev = u_w;
    ctrl.warm_start = Some(active);
    Ok(ControlSolution {
        alpha,
        u_w,
        cost,
        q_ddot_ref,
        candidates,
        qp_iterations: iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::hover_input;
    use crate::linalg::rot_x;
    use approx::assert_relative_eq;

    fn setup() -> (PlatformParams, PropellerLayout) {
        let p = PlatformParams::default();
        let l = PropellerLayout::for_params(&p).unwrap();
        (p, l)
    }

    fn at_rest() -> RigidBodyState {
        RigidBodyState::at_rest(Vector3::zeros())
    }

    #[test]
    fn attitude_error_of_elementary_rotation() {
        let r = rot_x(0.3);
        let r_d = r * rot_x(0.2);
        assert_relative_eq!(
            attitude_error(&r, &r_d),
            Vector3::new(0.2f64.sin(), 0.0, 0.0),
            epsilon = 1e-15
        );
        assert_relative_eq!(attitude_error(&r_d, &r), -attitude_error(&r, &r_d), epsilon = 1e-15);
        assert_eq!(attitude_error(&r, &r), Vector3::zeros());
    }

    #[test]
    fn reference_accel_gain_pairing() {
        let gains = ControlGains::preset();
        let mut s = at_rest();
        let reference = FlatReference::hold(Vector3::zeros(), Matrix3::identity());
        assert_eq!(reference_accel(&s, &reference, &gains), Vector6::zeros());
        s.p = Vector3::new(-1.0, 0.0, 0.0);
        assert_relative_eq!(
            reference_accel(&s, &reference, &gains),
            Vector6::new(300.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        );
        s.p = Vector3::zeros();
        s.v = Vector3::new(0.0, 0.5, 0.0);
        assert_relative_eq!(reference_accel(&s, &reference, &gains)[1], -15.0);
        let s = at_rest();
        let reference = FlatReference::hold(Vector3::zeros(), rot_x(0.2));
        assert_relative_eq!(
            reference_accel(&s, &reference, &gains)[3],
            100.0 * 0.2f64.sin(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn hessian_is_symmetric() {
        let (p, l) = setup();
        let mut s = at_rest();
        s.w = Vector3::new(0.3, -1.0, 2.0);
        s.r = rot_x(0.7);
        let u0 = InputVector::from_element(1.0e5);
        let red = build_reduced_qp(&p, &l, 0.5, &s, &Vector6::repeat(1.0), &OptWeights::case_a(), &u0);
        assert!((&red.qp.hessian - red.qp.hessian.transpose()).amax() < 1e-12);
    }

    #[test]
    fn cost_matches_direct_terms() {
        let (p, l) = setup();
        let s = at_rest();
        let w = OptWeights::case_b();
        let u_prev = InputVector::from_element(1.5e5);
        let qdd = Vector6::new(0.5, -0.2, 1.0, 0.1, 0.0, -0.3);
        let red = build_reduced_qp(&p, &l, 0.4, &s, &qdd, &w, &u_prev);
        let u = InputVector::from_fn(|i, _| 1.0e5 + 1.0e4 * i as f64);
        let direct = cost_terms(&w, &red.g_map, &red.r, &u, &u_prev).total();
        assert_relative_eq!(red.total_cost(&u), direct, max_relative = 1e-9);
    }

    #[test]
    fn hover_step_reproduces_hover_input() {
        let (p, l) = setup();
        let mut weights = OptWeights::case_a();
        weights.w1 *= 1e-6;
        weights.w3 *= 1e-6;
        let alpha = 0.5;
        let u_h = hover_input(&p, &l, alpha, p.mass).unwrap();
        let mut ctrl = ControllerState::new(alpha, u_h);
        let opts = ControlOptions {
            fixed_alpha: Some(alpha),
            ..Default::default()
        };
        let reference = FlatReference::hold(Vector3::zeros(), Matrix3::identity());
        let sol = control_step(
            &p,
            &l,
            &ControlGains::preset(),
            &weights,
            &opts,
            &at_rest(),
            &reference,
            &mut ctrl,
            0.0,
        )
        .unwrap();
        let wrench = allocation_matrix(&p, &l, alpha) * sol.u_w;
        assert_relative_eq!(wrench[2], p.weight(), max_relative = 1e-6);
        assert!(wrench.fixed_rows::<2>(0).norm() < 1e-5);
        assert!(wrench.fixed_rows::<3>(3).norm() < 1e-5);
    }

    #[test]
    fn candidates_clamp_and_dedup() {
        let p = PlatformParams::default();
        assert_eq!(candidate_alphas(&p, 0.0), vec![0.0, p.alpha_rate]);
        assert_eq!(candidate_alphas(&p, p.alpha_max).len(), 2);
        assert_eq!(candidate_alphas(&p, 0.3).len(), 3);
    }

    #[test]
    fn selection_is_minimal_and_rate_limited() {
        let (p, l) = setup();
        let u_h = hover_input(&p, &l, 0.2, p.mass).unwrap();
        let mut ctrl = ControllerState::new(0.2, u_h);
        let reference = FlatReference::hold(Vector3::new(0.1, 0.0, 0.0), rot_x(0.1));
        let sol = control_step(
            &p,
            &l,
            &ControlGains::preset(),
            &OptWeights::case_a(),
            &ControlOptions::default(),
            &at_rest(),
            &reference,
            &mut ctrl,
            0.0,
        )
        .unwrap();
        assert_eq!(sol.candidates.len(), 3);
        for c in &sol.candidates {
            assert!(sol.cost.total() <= c.cost.unwrap());
        }
        assert!((sol.alpha - 0.2).abs() <= p.alpha_rate + 1e-15);
        assert!(sol.u_w.iter().all(|u| u.abs() <= p.u_w_max));
        assert_eq!(ctrl.alpha_prev, sol.alpha);
    }

    #[test]
    fn weights_validation() {
        assert!(OptWeights::case_a().validate().is_ok());
        let mut w = OptWeights::case_b();
        w.w2[(0, 0)] = -1.0;
        assert!(w.validate().is_err());
        let mut g = ControlGains::preset();
        g.kp1[(0, 1)] = 1.0;
        assert!(g.validate().is_err());
    }
}
