//! Piecewise minimum-jerk references in position and attitude.
//!
//! Every segment uses the quintic `s(tau) = 10 tau^3 - 15 tau^4 + 6 tau^5`,
//! which has zero velocity and acceleration at both ends, so consecutive
//! segments join with continuous position, velocity and acceleration.
//! Attitude segments rotate about a fixed world axis.

use nalgebra::{Matrix3, Vector3};

use crate::controller::FlatReference;
use crate::error::{Error, Result};
use crate::linalg::axis_angle;

#[derive(Debug, Clone, PartialEq)]
pub enum Segment {
    Hold {
        duration: f64,
    },
    /// Move to an absolute position, attitude unchanged.
    LineTo {
        target: Vector3<f64>,
        duration: f64,
    },
    /// Rotate in place by `angle` about the world axis `axis`.
    AttitudeRotate {
        axis: Vector3<f64>,
        angle: f64,
        duration: f64,
    },
    /// Both at once, sharing the time profile.
    Combined {
        target: Vector3<f64>,
        axis: Vector3<f64>,
        angle: f64,
        duration: f64,
    },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Hold { duration }
            | Segment::LineTo { duration, .. }
            | Segment::AttitudeRotate { duration, .. }
            | Segment::Combined { duration, .. } => duration,
        }
    }

    fn target(&self) -> Option<Vector3<f64>> {
        match self {
            Segment::LineTo { target, .. } | Segment::Combined { target, .. } => Some(*target),
            _ => None,
        }
    }

    fn rotation(&self) -> Option<(Vector3<f64>, f64)> {
        match self {
            Segment::AttitudeRotate { axis, angle, .. } | Segment::Combined { axis, angle, .. } => {
                Some((*axis, *angle))
            }
            _ => None,
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        let d = self.duration();
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::Config(format!("segment {index}: duration must be > 0, got {d}")));
        }
        if let Some(t) = self.target() {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("segment {index}: non-finite target")));
            }
        }
        if let Some((axis, angle)) = self.rotation() {
            if (axis.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "segment {index}: rotation axis must be unit length, norm is {}",
                    axis.norm()
                )));
            }
            if !angle.is_finite() {
                return Err(Error::Config(format!("segment {index}: non-finite angle")));
            }
        }
        Ok(())
    }
}

/// Quintic blend value and its first two derivatives in `tau`.
pub fn min_jerk(tau: f64) -> (f64, f64, f64) {
    let t = tau.clamp(0.0, 1.0);
    let (t2, t3) = (t * t, t * t * t);
    (
        t3 * (10.0 - 15.0 * t + 6.0 * t2),
        30.0 * t2 * (1.0 - 2.0 * t + t2),
        60.0 * t * (1.0 - 3.0 * t + 2.0 * t2),
    )
}

#[derive(Debug, Clone)]
struct Leg {
    segment: Segment,
    t0: f64,
    p0: Vector3<f64>,
    r0: Matrix3<f64>,
}

#[derive(Debug, Clone)]
pub struct Mission {
    pub start: Vector3<f64>,
    pub start_attitude: Matrix3<f64>,
    legs: Vec<Leg>,
    span: f64,
}

impl Mission {
    pub fn new(start: Vector3<f64>, start_attitude: Matrix3<f64>, segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Config("mission needs at least one segment".into()));
        }
        let mut legs = Vec::with_capacity(segments.len());
        let (mut t, mut p, mut r) = (0.0, start, start_attitude);
        for (i, segment) in segments.into_iter().enumerate() {
            segment.validate(i)?;
            legs.push(Leg {
                segment: segment.clone(),
                t0: t,
                p0: p,
                r0: r,
            });
            t += segment.duration();
            if let Some(target) = segment.target() {
                p = target;
            }
            if let Some((axis, angle)) = segment.rotation() {
                r = axis_angle(&axis, angle) * r;
            }
        }
        Ok(Self {
            start,
            start_attitude,
            legs,
            span: t,
        })
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn segments(&self) -> impl Iterator<Item = (f64, &Segment)> {
        self.legs.iter().map(|l| (l.t0, &l.segment))
    }

    /// Reference at time `t`, clamped to the mission span.
    pub fn sample(&self, t: f64) -> FlatReference {
        let t = t.clamp(0.0, self.span);
        let idx = self.legs.iter().rposition(|l| l.t0 <= t).unwrap_or(0);
        let leg = &self.legs[idx];
        let d = leg.segment.duration();
        let (s, ds, dds) = min_jerk((t - leg.t0) / d);
        let (ds, dds) = (ds / d, dds / (d * d));

        let mut out = FlatReference::hold(leg.p0, leg.r0);
        if let Some(target) = leg.segment.target() {
            let delta = target - leg.p0;
            out.p_d = leg.p0 + delta * s;
            out.v_d = delta * ds;
            out.a_d = delta * dds;
        }
        if let Some((axis, angle)) = leg.segment.rotation() {
            out.r_d = axis_angle(&axis, angle * s) * leg.r0;
            // body-frame axis is constant: R_d^T axis = R0^T axis
            let body_axis = leg.r0.transpose() * axis;
            out.w_d = body_axis * (angle * ds);
            out.dw_d = body_axis * (angle * dds);
        }
        out
    }
}

/// Tunable amplitudes of the built-in demonstration mission.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkMissionParams {
    pub climb: f64,
    pub climb_time: f64,
    pub hold_time: f64,
    pub lateral: f64,
    pub tilt: f64,
    pub lateral_time: f64,
    pub spin_angle: f64,
    pub spin_time: f64,
    pub descend_time: f64,
}

impl Default for BenchmarkMissionParams {
    fn default() -> Self {
        Self {
            climb: 1.0,
            climb_time: 3.0,
            hold_time: 1.0,
            lateral: 1.0,
            tilt: 25f64.to_radians(),
            lateral_time: 4.0,
            spin_angle: 2.0 * std::f64::consts::PI,
            spin_time: 6.0,
            descend_time: 3.0,
        }
    }
}

/// Vertical climb, hold, tilted sideways excursion and return, a full turn
/// about the world x axis on the spot, and a descent to the start.
pub fn benchmark_mission() -> Mission {
    benchmark_mission_with(&BenchmarkMissionParams::default()).expect("default mission is valid")
}

pub fn benchmark_mission_with(m: &BenchmarkMissionParams) -> Result<Mission> {
    let top = Vector3::new(0.0, 0.0, m.climb);
    let side = top + Vector3::new(m.lateral, 0.0, 0.0);
    let x = Vector3::x();
    Mission::new(
        Vector3::zeros(),
        Matrix3::identity(),
        vec![
            Segment::LineTo {
                target: top,
                duration: m.climb_time,
            },
            Segment::Hold { duration: m.hold_time },
            Segment::Combined {
                target: side,
                axis: x,
                angle: m.tilt,
                duration: m.lateral_time,
            },
            Segment::Combined {
                target: top,
                axis: x,
                angle: -m.tilt,
                duration: m.lateral_time,
            },
            Segment::AttitudeRotate {
                axis: x,
                angle: m.spin_angle,
                duration: m.spin_time,
            },
            Segment::LineTo {
                target: Vector3::zeros(),
                duration: m.descend_time,
            },
        ],
    )
}

/// Hover in place for `duration` seconds.
pub fn hover_mission(at: Vector3<f64>, duration: f64) -> Result<Mission> {
    Mission::new(at, Matrix3::identity(), vec![Segment::Hold { duration }])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rot_x, vee};
    use approx::assert_relative_eq;

    #[test]
    fn quintic_boundary_values() {
        assert_eq!(min_jerk(0.0), (0.0, 0.0, 0.0));
        let (s, ds, dds) = min_jerk(1.0);
        assert_relative_eq!(s, 1.0);
        assert_relative_eq!(ds, 0.0);
        assert_relative_eq!(dds, 0.0, epsilon = 1e-12);
        assert_relative_eq!(min_jerk(0.5).1, 15.0 / 8.0);
    }

    #[test]
    fn line_midpoint_velocity() {
        let m = Mission::new(
            Vector3::zeros(),
            Matrix3::identity(),
            vec![Segment::LineTo {
                target: Vector3::z(),
                duration: 2.0,
            }],
        )
        .unwrap();
        let r = m.sample(1.0);
        assert_relative_eq!(r.v_d, Vector3::new(0.0, 0.0, 0.9375), epsilon = 1e-14);
        assert_relative_eq!(r.p_d.z, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn hold_has_no_motion() {
        let m = hover_mission(Vector3::new(1.0, 2.0, 3.0), 2.0).unwrap();
        let r = m.sample(0.7);
        assert_eq!(r.p_d, Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(
            (r.v_d, r.a_d, r.w_d, r.dw_d),
            (Vector3::zeros(), Vector3::zeros(), Vector3::zeros(), Vector3::zeros())
        );
    }

    #[test]
    fn full_turn_closes() {
        let m = benchmark_mission();
        let (t0, seg) = m.segments().nth(4).unwrap();
        let end = t0 + seg.duration();
        assert_relative_eq!(m.sample(t0).r_d, m.sample(end).r_d, epsilon = 1e-12);
        let n = 6000;
        let dt = seg.duration() / n as f64;
        let turned: f64 = (0..n).map(|k| m.sample(t0 + (k as f64 + 0.5) * dt).w_d.x * dt).sum();
        assert_relative_eq!(turned, 2.0 * std::f64::consts::PI, max_relative = 1e-6);
    }

    #[test]
    fn mission_shape() {
        let m = benchmark_mission();
        assert_relative_eq!(m.span(), 21.0);
        assert_eq!(m.sample(0.0).p_d, Vector3::zeros());
        assert_relative_eq!(m.sample(21.0).p_d, Vector3::zeros(), epsilon = 1e-14);
        assert_relative_eq!(m.sample(21.0).r_d, Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(m.sample(8.0).r_d, rot_x(25f64.to_radians()), epsilon = 1e-12);
        assert_relative_eq!(m.sample(8.0).p_d, Vector3::new(1.0, 0.0, 1.0), epsilon = 1e-14);
    }

    #[test]
    fn angular_velocity_matches_finite_difference() {
        let m = benchmark_mission();
        let h = 1e-3;
        for t in [5.0, 6.3, 9.1, 14.0, 15.5, 17.2] {
            let r0 = m.sample(t - h / 2.0).r_d;
            let r1 = m.sample(t + h / 2.0).r_d;
            let mid = m.sample(t);
            let w_fd = vee(&(mid.r_d.transpose() * (r1 - r0))) / h;
            assert!((w_fd - mid.w_d).norm() < 1e-4, "t = {t}: {w_fd} vs {}", mid.w_d);
            assert_relative_eq!(mid.w_d.norm(), mid.w_d.x.abs(), epsilon = 1e-12);
        }
    }

    #[test]
    fn continuity_at_joints() {
        let m = benchmark_mission();
        let joints: Vec<f64> = m.segments().skip(1).map(|(t, _)| t).collect();
        for t in joints {
            let a = m.sample(t - 1e-9);
            let b = m.sample(t + 1e-9);
            assert!((a.p_d - b.p_d).norm() < 1e-8);
            assert!((a.v_d - b.v_d).norm() < 1e-7);
            assert!((a.r_d - b.r_d).norm() < 1e-8);
        }
    }

    #[test]
    fn invalid_segments_rejected() {
        assert!(Mission::new(Vector3::zeros(), Matrix3::identity(), vec![]).is_err());
        assert!(hover_mission(Vector3::zeros(), 0.0).is_err());
        let bad_axis = Segment::AttitudeRotate {
            axis: Vector3::new(1.0, 1.0, 0.0),
            angle: 1.0,
            duration: 1.0,
        };
        assert!(Mission::new(Vector3::zeros(), Matrix3::identity(), vec![bad_axis]).is_err());
    }
}
