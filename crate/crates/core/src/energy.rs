//! Hover inputs, shaft power and energy bookkeeping.
//!
//! Motor torque is approximated by the propeller drag moment, so the shaft
//! power of propeller `i` is `c_tau |u_i|^{3/2}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{allocation_matrix, InputVector, PlatformParams, PropellerLayout, Wrench};
use crate::linalg::pseudo_inverse;

/// Singular values below this fraction of the largest are dropped when
/// pseudo-inverting the allocation matrix.
pub const PINV_RCOND: f64 = 1e-12;

/// Absolute tolerance on the hover wrench residual, in N / N m.
pub const HOVER_RESIDUAL_TOL: f64 = 1e-9;

/// Minimum-norm squared speeds holding `mass` in hover with `R = I`:
/// `u = A(alpha)^+ [m g e3; 0]`.
pub fn hover_input(params: &PlatformParams, layout: &PropellerLayout, alpha: f64, mass: f64) -> Result<InputVector> {
    let a = allocation_matrix(params, layout, alpha);
    let a_dyn = DMatrix::from_column_slice(6, 8, a.as_slice());
    let target = Wrench::new(0.0, 0.0, mass * params.gravity, 0.0, 0.0, 0.0);
    let pinv = pseudo_inverse(&a_dyn, PINV_RCOND);
    let u = pinv * DVector::from_column_slice(target.as_slice());
    let u = InputVector::from_column_slice(u.as_slice());

    let deficit = target - a * u;
    let residual = deficit.norm();
    if residual > HOVER_RESIDUAL_TOL * (1.0 + target.norm()) {
        return Err(Error::HoverInfeasible {
            alpha,
            residual,
            deficit,
        });
    }
    Ok(u)
}

/// `P = c_tau * sum |u_i|^{3/2}`, in W.
pub fn motor_power(params: &PlatformParams, u_w: &InputVector) -> f64 {
    params.drag_coeff * u_w.iter().map(|u| u.abs().powf(1.5)).sum::<f64>()
}

fn power_sum(u: &InputVector) -> f64 {
    u.iter().map(|v| v.abs().powf(1.5)).sum()
}

/// Largest tilting-mechanism mass fraction for which the morphing platform
/// (hovering at `alpha = 0`) still uses less power than a fixed-tilt platform
/// at `alpha_f`. Hover inputs are linear in the mass, so the fraction has the
/// closed form `(P(alpha_f) / P(0))^{2/3} - 1`, independent of `c_f`, `c_tau`
/// and the base mass.
pub fn delta_m_bar(params: &PlatformParams, layout: &PropellerLayout, alpha_f: f64) -> Result<f64> {
    let fixed = power_sum(&hover_input(params, layout, alpha_f, 1.0)?);
    let flat = power_sum(&hover_input(params, layout, 0.0, 1.0)?);
    Ok((fixed / flat).powf(2.0 / 3.0) - 1.0)
}

/// Running energy totals for one simulation trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyAccount {
    /// Integral of the drag (shaft) power, J.
    pub drag_energy: f64,
    /// Sum of positive propeller kinetic-energy increments, J.
    pub prop_accel_energy: f64,
    /// Drag power held over each accounted interval, W.
    pub per_step_power: Vec<f64>,
}

/// Adds one interval of length `dt` during which `u_w_cur` is applied after
/// `u_w_prev`. Only kinetic-energy increases count; motors do not
/// regenerate.
pub fn accumulate_energy(
    account: &mut EnergyAccount,
    params: &PlatformParams,
    u_w_prev: &InputVector,
    u_w_cur: &InputVector,
    dt: f64,
) {
    debug_assert!(dt > 0.0);
    let power = motor_power(params, u_w_cur);
    account.drag_energy += power * dt;
    account.per_step_power.push(power);
    // w^2 = |u| for the signed speed w = sign(u) sqrt|u|
    account.prop_accel_energy += u_w_prev
        .iter()
        .zip(u_w_cur.iter())
        .map(|(p, c)| (0.5 * params.prop_inertia * (c.abs() - p.abs())).max(0.0))
        .sum::<f64>();
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
    fn hover_at_zero_tilt_is_symmetric() {
        let (p, l) = setup();
        let u = hover_input(&p, &l, 0.0, p.mass).unwrap();
        let expected = p.mass * p.gravity / (8.0 * p.thrust_coeff);
        for v in u.iter() {
            assert_relative_eq!(*v, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn hover_is_linear_in_mass() {
        let (p, l) = setup();
        let a = 45f64.to_radians();
        let u1 = hover_input(&p, &l, a, 1.0).unwrap();
        let u2 = hover_input(&p, &l, a, 2.0).unwrap();
        assert_relative_eq!(u2, u1 * 2.0, max_relative = 1e-12);
    }

    #[test]
    fn hover_fails_with_all_thrust_horizontal() {
        let (p, l) = setup();
        match hover_input(&p, &l, std::f64::consts::FRAC_PI_2, p.mass) {
            Err(Error::HoverInfeasible { deficit, .. }) => {
                assert_relative_eq!(deficit[2], p.weight(), max_relative = 1e-9)
            }
            other => panic!("expected infeasible hover, got {other:?}"),
        }
    }

    #[test]
    fn power_formula() {
        let mut p = PlatformParams::default();
        assert_eq!(motor_power(&p, &InputVector::zeros()), 0.0);
        p.drag_coeff = 1.0;
        let mut u = InputVector::zeros();
        u[3] = 4.0;
        assert_relative_eq!(motor_power(&p, &u), 8.0);
        u[3] = -4.0;
        assert_relative_eq!(motor_power(&p, &u), 8.0);
    }

    #[test]
    fn tilted_hover_costs_more() {
        let (p, l) = setup();
        let p0 = motor_power(&p, &hover_input(&p, &l, 0.0, p.mass).unwrap());
        let p50 = motor_power(&p, &hover_input(&p, &l, 50f64.to_radians(), p.mass).unwrap());
        assert!(p50 > p0);
    }

    #[test]
    fn break_even_is_zero_without_tilt() {
        let (p, l) = setup();
        assert_eq!(delta_m_bar(&p, &l, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn kinetic_energy_bookkeeping() {
        let p = PlatformParams {
            prop_inertia: 1e-5,
            ..Default::default()
        };
        let mut acc = EnergyAccount::default();
        let u = InputVector::from_element(3.0e4);
        accumulate_energy(&mut acc, &p, &u, &u, 0.01);
        assert_eq!(acc.prop_accel_energy, 0.0);

        let mut acc = EnergyAccount::default();
        let mut spun = InputVector::zeros();
        spun[0] = -100.0 * 100.0; // reversed direction, |w| = 100 rad/s
        accumulate_energy(&mut acc, &p, &InputVector::zeros(), &spun, 0.01);
        assert_relative_eq!(acc.prop_accel_energy, 0.05, max_relative = 1e-12);

        let before = acc.prop_accel_energy;
        accumulate_energy(&mut acc, &p, &spun, &InputVector::zeros(), 0.01);
        assert_eq!(acc.prop_accel_energy, before);
        assert_eq!(acc.per_step_power.len(), 2);
    }
}
