//! Rigid-body plant and the closed-loop simulation harness.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3, Vector4};

use crate::controller::{attitude_error, control_step, ControlGains, ControlOptions, ControllerState, OptWeights};
use crate::energy::{accumulate_energy, hover_input, motor_power, EnergyAccount};
use crate::error::{Error, Result};
use crate::geometry::{allocation_matrix, InputVector, PlatformParams, PropellerLayout, Wrench};
use crate::linalg::{project_to_so3, skew};
use crate::trajectory::Mission;

#[derive(Debug, Clone, PartialEq)]
pub struct RigidBodyState {
    /// world position, m
    pub p: Vector3<f64>,
    /// world velocity, m/s
    pub v: Vector3<f64>,
    /// world <- body
    pub r: Matrix3<f64>,
    /// body angular velocity, rad/s
    pub w: Vector3<f64>,
}

impl RigidBodyState {
    pub fn at_rest(p: Vector3<f64>) -> Self {
        Self {
            p,
            v: Vector3::zeros(),
            r: Matrix3::identity(),
            w: Vector3::zeros(),
        }
    }

    fn is_finite(&self) -> bool {
        self.p
            .iter()
            .chain(self.v.iter())
            .chain(self.r.iter())
            .chain(self.w.iter())
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantConfig {
    /// Actual thrust coefficient relative to the nominal one, in (0, 1].
    pub cf_scale: f64,
    pub dt_sim: f64,
    pub steps_per_ctrl: usize,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            cf_scale: 1.0,
            dt_sim: 0.001,
            steps_per_ctrl: 4,
        }
    }
}

impl PlantConfig {
    pub fn dt_ctrl(&self) -> f64 {
        self.dt_sim * self.steps_per_ctrl as f64
    }

    pub fn validate(&self, params: &PlatformParams) -> Result<()> {
        if !(self.cf_scale > 0.0 && self.cf_scale <= 1.0) {
            return Err(Error::invalid(
                "cf_scale",
                format!("must be in (0, 1], got {}", self.cf_scale),
            ));
        }
        if !(self.dt_sim.is_finite() && self.dt_sim > 0.0) {
            return Err(Error::invalid("dt_sim", "must be > 0"));
        }
        if self.steps_per_ctrl == 0 {
            return Err(Error::invalid("steps_per_ctrl", "must be >= 1"));
        }
        if (self.dt_ctrl() - params.control_period).abs() > 1e-12 * params.control_period {
            return Err(Error::invalid(
                "steps_per_ctrl",
                format!(
                    "dt_sim * steps_per_ctrl = {} s does not match the control period {} s",
                    self.dt_ctrl(),
                    params.control_period
                ),
            ));
        }
        Ok(())
    }
}

/// Body-frame wrench actually produced by the (possibly degraded) propellers.
pub fn body_wrench(
    params: &PlatformParams,
    layout: &PropellerLayout,
    plant: &PlantConfig,
    alpha: f64,
    u_w: &InputVector,
) -> Wrench {
    allocation_matrix(params, layout, alpha) * u_w * plant.cf_scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub dp: Vector3<f64>,
    pub dv: Vector3<f64>,
    pub dr: Matrix3<f64>,
    pub dw: Vector3<f64>,
}

pub fn state_derivative(params: &PlatformParams, state: &RigidBodyState, wrench: &Wrench) -> StateDerivative {
    let f_b = wrench.fixed_rows::<3>(0).into_owned();
    let tau_b = wrench.fixed_rows::<3>(3).into_owned();
    let j = &params.inertia;
    let j_inv = j.try_inverse().expect("validated inertia is invertible");
    StateDerivative {
        dp: state.v,
        dv: Vector3::new(0.0, 0.0, -params.gravity) + state.r * f_b / params.mass,
        dr: state.r * skew(&state.w),
        dw: j_inv * (tau_b - state.w.cross(&(j * state.w))),
    }
}

fn advance(s: &RigidBodyState, d: &StateDerivative, h: f64) -> RigidBodyState {
    RigidBodyState {
        p: s.p + d.dp * h,
        v: s.v + d.dv * h,
        r: s.r + d.dr * h,
        w: s.w + d.dw * h,
    }
}

/// Classical RK4 with the tilt given as a function of the local time in
/// `[0, dt]`; the rotation is projected back onto SO(3) after the step.
pub fn rk4_step_with<F: Fn(f64) -> f64>(
    params: &PlatformParams,
    layout: &PropellerLayout,
    plant: &PlantConfig,
    state: &RigidBodyState,
    alpha_at: F,
    u_w: &InputVector,
    dt: f64,
) -> RigidBodyState {
    let f = |s: &RigidBodyState, tau: f64| {
        state_derivative(params, s, &body_wrench(params, layout, plant, alpha_at(tau), u_w))
    };
    let k1 = f(state, 0.0);
    let k2 = f(&advance(state, &k1, dt / 2.0), dt / 2.0);
    let k3 = f(&advance(state, &k2, dt / 2.0), dt / 2.0);
    let k4 = f(&advance(state, &k3, dt), dt);
    let w = dt / 6.0;
    RigidBodyState {
        p: state.p + (k1.dp + (k2.dp + k3.dp) * 2.0 + k4.dp) * w,
        v: state.v + (k1.dv + (k2.dv + k3.dv) * 2.0 + k4.dv) * w,
        r: project_to_so3(&(state.r + (k1.dr + (k2.dr + k3.dr) * 2.0 + k4.dr) * w)),
        w: state.w + (k1.dw + (k2.dw + k3.dw) * 2.0 + k4.dw) * w,
    }
}

/// RK4 step with constant inputs. Fails if the new state is not finite.
pub fn rk4_step(
    params: &PlatformParams,
    layout: &PropellerLayout,
    plant: &PlantConfig,
    state: &RigidBodyState,
    alpha: f64,
    u_w: &InputVector,
    dt: f64,
) -> Result<RigidBodyState> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::invalid("dt", "must be > 0"));
    }
    let next = rk4_step_with(params, layout, plant, state, |_| alpha, u_w, dt);
    if !next.is_finite() {
        return Err(Error::Diverged {
            step: 0,
            t: dt,
            reason: "non-finite state".into(),
        });
    }
    Ok(next)
}

/// Everything needed for one closed-loop run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: PlatformParams,
    pub gains: ControlGains,
    pub weights: OptWeights,
    pub options: ControlOptions,
    pub plant: PlantConfig,
    pub mission: Mission,
    /// Simulated time; defaults to the mission span.
    pub duration: Option<f64>,
    /// Tilt at t = 0, rad.
    pub initial_alpha: f64,
    /// Position error beyond which the run counts as diverged, m.
    pub divergence_radius: f64,
}

impl Scenario {
    pub fn new(params: PlatformParams, gains: ControlGains, weights: OptWeights, mission: Mission) -> Self {
        let initial_alpha = params.alpha_min;
        Self {
            params,
            gains,
            weights,
            options: ControlOptions::default(),
            plant: PlantConfig::default(),
            mission,
            duration: None,
            initial_alpha,
            divergence_radius: DEFAULT_DIVERGENCE_RADIUS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.gains.validate()?;
        self.weights.validate()?;
        self.plant.validate(&self.params)?;
        if let Some(d) = self.duration {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::invalid("duration", "must be > 0"));
            }
        }
        let (lo, hi) = (self.params.alpha_min, self.params.alpha_max);
        if let Some(a) = self.options.fixed_alpha {
            if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&a) {
                return Err(Error::invalid("fixed_alpha", "must be in [0, pi/2]"));
            }
        } else if !(lo..=hi).contains(&self.initial_alpha) {
            return Err(Error::invalid("initial_alpha", "must lie in [alpha_min, alpha_max]"));
        }
        if self.divergence_radius.is_nan() || self.divergence_radius <= 0.0 {
            return Err(Error::invalid("divergence_radius", "must be > 0"));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.duration.unwrap_or_else(|| self.mission.span())
    }
}

pub const DEFAULT_DIVERGENCE_RADIUS: f64 = 5.0;

/// One row per control period. Attitudes are stored as unit quaternions
/// `(w, x, y, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub p: Vector3<f64>,
    pub p_d: Vector3<f64>,
    pub q: Vector4<f64>,
    pub q_d: Vector4<f64>,
    pub alpha: f64,
    pub u_w: InputVector,
    pub wrench: Wrench,
    pub p_drag: f64,
    pub e_drag: f64,
    pub e_accel: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimTrace {
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub steps: usize,
    pub duration: f64,
    pub mean_position_error: f64,
    pub mean_attitude_error: f64,
    pub drag_energy: f64,
    pub prop_accel_energy: f64,
    pub final_alpha: f64,
    pub max_alpha: f64,
}

pub fn quaternion_of(r: &Matrix3<f64>) -> Vector4<f64> {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    let q = if q.w < 0.0 { -q.into_inner() } else { q.into_inner() };
    Vector4::new(q.w, q.i, q.j, q.k)
}

pub fn rotation_of(q: &Vector4<f64>) -> Matrix3<f64> {
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]))
        .to_rotation_matrix()
        .into_inner()
}

impl TraceRow {
    pub fn position_error(&self) -> f64 {
        (self.p_d - self.p).norm()
    }

    pub fn attitude_error(&self) -> f64 {
        attitude_error(&rotation_of(&self.q), &rotation_of(&self.q_d)).norm()
    }
}

impl SimTrace {
    pub fn summary(&self) -> TraceSummary {
        let n = self.rows.len().max(1) as f64;
        let last = self.rows.last();
        TraceSummary {
            steps: self.rows.len(),
            duration: last.map_or(0.0, |r| r.t),
            mean_position_error: self.rows.iter().map(TraceRow::position_error).sum::<f64>() / n,
            mean_attitude_error: self.rows.iter().map(TraceRow::attitude_error).sum::<f64>() / n,
            drag_energy: last.map_or(0.0, |r| r.e_drag),
            prop_accel_energy: last.map_or(0.0, |r| r.e_accel),
            final_alpha: last.map_or(0.0, |r| r.alpha),
            max_alpha: self.rows.iter().map(|r| r.alpha).fold(0.0, f64::max),
        }
    }

    /// Mean tilt over rows with `t0 <= t < t1`.
    pub fn mean_alpha_between(&self, t0: f64, t1: f64) -> Option<f64> {
        let sel: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.t >= t0 && r.t < t1)
            .map(|r| r.alpha)
            .collect();
        (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
    }

    pub fn max_alpha_between(&self, t0: f64, t1: f64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.t >= t0 && r.t < t1)
            .map(|r| r.alpha)
            .reduce(f64::max)
    }
}

/// Result of a run that may have stopped early. `trace` holds every row
/// recorded before the fault.
#[derive(Debug)]
pub struct SimRun {
    pub trace: SimTrace,
    pub fault: Option<Error>,
}

/// Runs the closed loop: sample the reference, decide `(alpha, u_w)` once
/// per control period, hold `u_w` and slew the tilt linearly toward the
/// decision while integrating the plant.
pub fn run_scenario(scenario: &Scenario) -> Result<SimRun> {
    scenario.validate()?;
    let params = &scenario.params;
    let plant = &scenario.plant;
    let layout = PropellerLayout::for_params(params)?;
    let dt_ctrl = plant.dt_ctrl();
    let steps = (scenario.duration() / dt_ctrl).round() as usize;

    let mut alpha = scenario.options.fixed_alpha.unwrap_or(scenario.initial_alpha);
    let u0 = hover_input(params, &layout, alpha, params.mass)?;
    let mut ctrl = ControllerState::new(alpha, u0);
    let mut state = RigidBodyState {
        r: scenario.mission.start_attitude,
        ..RigidBodyState::at_rest(scenario.mission.start)
    };
    let mut energy = EnergyAccount::default();
    let mut trace = SimTrace {
        rows: Vec::with_capacity(steps),
    };

    for k in 0..steps {
        let t = k as f64 * dt_ctrl;
        let reference = scenario.mission.sample(t);
        let u_prev = ctrl.u_w_prev;
        let sol = match control_step(
            params,
            &layout,
            &scenario.gains,
            &scenario.weights,
            &scenario.options,
            &state,
            &reference,
            &mut ctrl,
            t,
        ) {
            Ok(sol) => sol,
            Err(e) => return Ok(SimRun { trace, fault: Some(e) }),
        };
        accumulate_energy(&mut energy, params, &u_prev, &sol.u_w, dt_ctrl);

        trace.rows.push(TraceRow {
            t,
            p: state.p,
            p_d: reference.p_d,
            q: quaternion_of(&state.r),
            q_d: quaternion_of(&reference.r_d),
            alpha,
            u_w: sol.u_w,
            wrench: body_wrench(params, &layout, plant, alpha, &sol.u_w),
            p_drag: motor_power(params, &sol.u_w),
            e_drag: energy.drag_energy,
            e_accel: energy.prop_accel_energy,
        });

        let (a0, a1) = (alpha, sol.alpha);
        for j in 0..plant.steps_per_ctrl {
            let s0 = j as f64 * plant.dt_sim;
            let slew = |tau: f64| a0 + (a1 - a0) * ((s0 + tau) / dt_ctrl);
            state = rk4_step_with(params, &layout, plant, &state, slew, &sol.u_w, plant.dt_sim);
        }
        alpha = a1;

        let t_next = t + dt_ctrl;
        let reason = if !state.is_finite() {
            Some("non-finite state".to_string())
        } else {
            let err = (scenario.mission.sample(t_next).p_d - state.p).norm();
            (err > scenario.divergence_radius)
                .then(|| format!("position error {err:.2} m exceeds {} m", scenario.divergence_radius))
        };
        if let Some(reason) = reason {
            return Ok(SimRun {
                trace,
                fault: Some(Error::Diverged {
                    step: k + 1,
                    t: t_next,
                    reason,
                }),
            });
        }
    }
    Ok(SimRun { trace, fault: None })
}

/// As [`run_scenario`], but a fault discards the partial trace.
pub fn simulate(scenario: &Scenario) -> Result<SimTrace> {
    let run = run_scenario(scenario)?;
    match run.fault {
        Some(e) => Err(e),
        None => Ok(run.trace),
    }
}
