//! Feasible-force sets under the propeller speed bounds.
//!
//! The support value along a direction is obtained from a small LP over the
//! eight inputs. Omnidirectionality is judged on the zero-torque force set:
//! hovering in an arbitrary orientation needs the wrench `(f, 0)`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{allocation_matrix, InputVector, PlatformParams, PropellerLayout, N_PROPS};
use crate::optimizer::{solve_lp, BoundedLP, LpOutcome, OptimizerError};

pub const DEFAULT_DIRECTIONS: usize = 400;
pub const MIN_DIRECTIONS: usize = 50;

#[derive(Debug, Clone)]
pub struct ForceSetQuery {
    pub alpha: f64,
    pub zero_torque: bool,
    pub directions: Vec<Vector3<f64>>,
}

impl ForceSetQuery {
    pub fn fibonacci(alpha: f64, zero_torque: bool, n_dirs: usize) -> Self {
        Self {
            alpha,
            zero_torque,
            directions: fibonacci_sphere(n_dirs),
        }
    }

    pub fn evaluate(&self, params: &PlatformParams, layout: &PropellerLayout) -> Result<Vec<f64>> {
        self.directions
            .iter()
            .map(|d| support_force(params, layout, self.alpha, d, self.zero_torque))
            .collect()
    }
}

/// `n` nearly uniform unit vectors on the sphere (golden-angle spiral).
pub fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden = PI * (1.0 + 5f64.sqrt());
    (0..n)
        .map(|i| {
            let k = i as f64 + 0.5;
            let polar = (1.0 - 2.0 * k / n as f64).acos();
            let azimuth = golden * k;
            Vector3::new(azimuth.cos() * polar.sin(), azimuth.sin() * polar.sin(), polar.cos())
        })
        .collect()
}

/// Largest `lambda >= 0` such that the body force `lambda * dir` is
/// achievable with `|u_i| <= u_max` (and zero torque, if requested).
pub fn support_force(
    params: &PlatformParams,
    layout: &PropellerLayout,
    alpha: f64,
    dir: &Vector3<f64>,
    zero_torque: bool,
) -> Result<f64> {
    support_force_with_input(params, layout, alpha, dir, zero_torque).map(|(v, _)| v)
}

/// As [`support_force`], also returning the maximizing input.
pub fn support_force_with_input(
    params: &PlatformParams,
    layout: &PropellerLayout,
    alpha: f64,
    dir: &Vector3<f64>,
    zero_torque: bool,
) -> Result<(f64, InputVector)> {
    if (dir.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(
            "dir",
            format!("must be a unit vector, norm is {}", dir.norm()),
        ));
    }
    let u_max = params.u_w_max;
    // Inputs are normalized to [-1, 1] so the tableau entries are O(newtons).
    let a = allocation_matrix(params, layout, alpha) * u_max;
    let rows = if zero_torque { 6 } else { 3 };
    let n = N_PROPS + 1;
    let lambda_max = N_PROPS as f64 * params.max_prop_thrust();

    let mut a_eq = DMatrix::zeros(rows, n);
    for r in 0..rows {
        for c in 0..N_PROPS {
            a_eq[(r, c)] = a[(r, c)];
        }
        if r < 3 {
            a_eq[(r, N_PROPS)] = -dir[r];
        }
    }
    let mut objective = DVector::zeros(n);
    objective[N_PROPS] = 1.0;
    let mut lower = DVector::from_element(n, -1.0);
    let mut upper = DVector::from_element(n, 1.0);
    lower[N_PROPS] = 0.0;
    upper[N_PROPS] = lambda_max;

    let lp = BoundedLP {
        objective,
        a_eq,
        b_eq: DVector::zeros(rows),
        lower,
        upper,
    };
    match solve_lp(&lp)? {
        LpOutcome::Optimal(sol) => {
            let u = InputVector::from_iterator(sol.x.iter().take(N_PROPS).map(|x| x * u_max));
            Ok((sol.x[N_PROPS], u))
        }
        LpOutcome::Infeasible | LpOutcome::Unbounded => Err(Error::Optimizer(OptimizerError::InvalidProblem(
            "support LP has no optimum although u = 0 is feasible".into(),
        ))),
    }
}

/// Radius of the largest origin-centred ball inside the zero-torque force
/// set, estimated as the minimum support value over `n_dirs` sampled
/// directions. The sampled minimum bounds the true radius from above.
pub fn inscribed_force_radius(
    params: &PlatformParams,
    layout: &PropellerLayout,
    alpha: f64,
    n_dirs: usize,
) -> Result<f64> {
    if n_dirs < MIN_DIRECTIONS {
        return Err(Error::invalid(
            "n_dirs",
            format!("need at least {MIN_DIRECTIONS} directions"),
        ));
    }
    let mut radius = f64::INFINITY;
    for d in fibonacci_sphere(n_dirs) {
        radius = radius.min(support_force(params, layout, alpha, &d, true)?);
    }
    Ok(radius)
}

/// Whether the platform can hold its weight with every thrust axis at full
/// speed when tilted by `alpha` and level.
pub fn sustains_vertical_hover(params: &PlatformParams, alpha: f64) -> bool {
    let vertical = N_PROPS as f64 * params.max_prop_thrust() * alpha.cos();
    vertical >= params.weight() * (1.0 - 1e-12)
}

/// Tilt grid over `[0, pi/2]` with spacing `step`.
pub fn alpha_grid(step: f64) -> Vec<f64> {
    let n = (FRAC_PI_2 / step + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

/// Smallest and largest grid angles at which the platform is
/// omnidirectional (inscribed radius at least `m g`) and can still hover
/// level. `None` if no grid angle qualifies.
pub fn omni_alpha_interval(
    params: &PlatformParams,
    layout: &PropellerLayout,
    grid_step: f64,
    n_dirs: usize,
) -> Result<Option<(f64, f64)>> {
    if !(grid_step > 0.0 && grid_step <= 1f64.to_radians() * (1.0 + 1e-12)) {
        return Err(Error::invalid("grid_step", "must be in (0, 1 deg]"));
    }
    let weight = params.weight();
    let mut interval: Option<(f64, f64)> = None;
    for alpha in alpha_grid(grid_step) {
        if !sustains_vertical_hover(params, alpha) {
            continue;
        }
        if inscribed_force_radius(params, layout, alpha, n_dirs)? >= weight {
            interval = Some(match interval {
                None => (alpha, alpha),
                Some((lo, _)) => (lo, alpha),
            });
        }
    }
    Ok(interval)
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
    fn fibonacci_directions_are_unit() {
        let d = fibonacci_sphere(400);
        assert_eq!(d.len(), 400);
        for v in &d {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        let mean: Vector3<f64> = d.iter().sum::<Vector3<f64>>() / 400.0;
        assert!(mean.norm() < 1e-2);
    }

    #[test]
    fn vertical_support_at_zero_tilt() {
        let (p, l) = setup();
        let up = support_force(&p, &l, 0.0, &Vector3::z(), true).unwrap();
        assert_relative_eq!(up, 8.0 * p.max_prop_thrust(), max_relative = 1e-9);
        let side = support_force(&p, &l, 0.0, &Vector3::x(), true).unwrap();
        assert!(side.abs() < 1e-9);
        assert!(inscribed_force_radius(&p, &l, 0.0, 60).unwrap().abs() < 1e-9);
    }

    #[test]
    fn pure_force_set_is_symmetric_in_x_and_y() {
        let (p, l) = setup();
        let a = 45f64.to_radians();
        let fx = support_force(&p, &l, a, &Vector3::x(), false).unwrap();
        let fy = support_force(&p, &l, a, &Vector3::y(), false).unwrap();
        assert!((fx - fy).abs() < 1e-9, "{fx} vs {fy}");
        // drag torques break the symmetry once torque must vanish
        let tx = support_force(&p, &l, a, &Vector3::x(), true).unwrap();
        let tx_neg = support_force(&p, &l, a, &-Vector3::x(), true).unwrap();
        assert!(tx <= fx + 1e-9);
        assert!((tx - tx_neg).abs() < 1e-9);
    }

    #[test]
    fn maximizing_input_respects_box_and_torque() {
        let (p, l) = setup();
        let dir = Vector3::new(0.3, -0.5, 0.8).normalize();
        let (lambda, u) = support_force_with_input(&p, &l, 0.6, &dir, true).unwrap();
        for v in u.iter() {
            assert!(v.abs() <= p.u_w_max * (1.0 + 1e-9));
        }
        let w = allocation_matrix(&p, &l, 0.6) * u;
        assert!((w.fixed_rows::<3>(0) - dir * lambda).norm() < 1e-8);
        assert!(w.fixed_rows::<3>(3).norm() < 1e-8);
    }

    #[test]
    fn rejects_bad_arguments() {
        let (p, l) = setup();
        assert!(support_force(&p, &l, 0.1, &Vector3::new(1.0, 1.0, 0.0), true).is_err());
        assert!(inscribed_force_radius(&p, &l, 0.1, 10).is_err());
        assert!(omni_alpha_interval(&p, &l, 2f64.to_radians(), 100).is_err());
    }

    #[test]
    fn heavy_platform_is_never_omnidirectional() {
        let (mut p, l) = setup();
        p.mass *= 10.0;
        assert_eq!(omni_alpha_interval(&p, &l, 1f64.to_radians(), 60).unwrap(), None);
    }

    #[test]
    fn grid_covers_quarter_turn() {
        let g = alpha_grid(1f64.to_radians());
        assert_eq!(g.len(), 91);
        assert_relative_eq!(*g.last().unwrap(), FRAC_PI_2, epsilon = 1e-12);
    }
}
