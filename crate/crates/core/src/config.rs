//! TOML scenario files.
//!
//! Every section is optional; omitted values fall back to the calibrated
//! platform, the `case-a` preset and the built-in demonstration mission.
//! Angles are given in degrees in fields ending in `_deg`.
//!
//! ```toml
//! [controller]
//! preset = "case-b"
//! w3 = 1e-4
//!
//! [plant]
//! cf_scale = 0.7
//!
//! [mission]
//! builtin = "benchmark"
//! ```

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::Deserialize;

use crate::controller::{ControlGains, ControlOptions, InputWeight, OptWeights};
use crate::dynamics::{PlantConfig, Scenario, DEFAULT_DIVERGENCE_RADIUS};
use crate::error::{Error, Result};
use crate::geometry::{calibrated_u_w_max, rod_inertia, PlatformParams, HOVER_LIMIT_ALPHA, N_PROPS};
use crate::trajectory::{benchmark_mission_with, hover_mission, BenchmarkMissionParams, Mission, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    CaseA,
    CaseB,
}

impl Preset {
    pub fn weights(self) -> OptWeights {
        match self {
            Preset::CaseA => OptWeights::case_a(),
            Preset::CaseB => OptWeights::case_b(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::CaseA => "case-a",
            Preset::CaseB => "case-b",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "case-a" => Ok(Preset::CaseA),
            "case-b" => Ok(Preset::CaseB),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (expected case-a or case-b)"
            ))),
        }
    }
}

/// A weight given either as one number (times identity) or a diagonal.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Diagonal {
    Scalar(f64),
    List(Vec<f64>),
}

impl Diagonal {
    fn entries(&self, field: &str, n: usize) -> Result<Vec<f64>> {
        match self {
            Diagonal::Scalar(v) => Ok(vec![*v; n]),
            Diagonal::List(v) if v.len() == n => Ok(v.clone()),
            Diagonal::List(v) => Err(Error::Config(format!(
                "field `{field}`: expected {n} diagonal entries, got {}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformSection {
    pub mass: Option<f64>,
    pub inertia_diag: Option<[f64; 3]>,
    pub cube_half_diag: Option<f64>,
    pub thrust_coeff: Option<f64>,
    /// `c_tau / c_f`, m
    pub drag_to_thrust: Option<f64>,
    /// Explicit bound; otherwise calibrated from `hover_limit_deg`.
    pub u_w_max: Option<f64>,
    pub hover_limit_deg: Option<f64>,
    pub alpha_min_deg: Option<f64>,
    pub alpha_max_deg: Option<f64>,
    pub alpha_rate_deg: Option<f64>,
    pub control_period: Option<f64>,
    pub prop_mass: Option<f64>,
    pub prop_radius: Option<f64>,
    pub gravity: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub preset: Option<Preset>,
    pub kp1: Option<Diagonal>,
    pub kp2: Option<Diagonal>,
    pub kw1: Option<Diagonal>,
    pub kw2: Option<Diagonal>,
    pub w1: Option<Diagonal>,
    pub w2: Option<Diagonal>,
    pub w3: Option<Diagonal>,
    pub fixed_alpha_deg: Option<f64>,
    pub initial_alpha_deg: Option<f64>,
    pub qp_tol: Option<f64>,
    pub qp_max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub cf_scale: Option<f64>,
    pub dt_sim: Option<f64>,
    pub steps_per_ctrl: Option<usize>,
    pub divergence_radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase", tag = "kind")]
pub enum SegmentSpec {
    Hold {
        duration: f64,
    },
    Line {
        target: [f64; 3],
        duration: f64,
    },
    Rotate {
        axis: [f64; 3],
        angle_deg: f64,
        duration: f64,
    },
    Combined {
        target: [f64; 3],
        axis: [f64; 3],
        angle_deg: f64,
        duration: f64,
    },
}

impl SegmentSpec {
    fn to_segment(&self) -> Segment {
        let v = |a: &[f64; 3]| Vector3::from_column_slice(a);
        // Axes are normalized here so hand-written files need not be exact.
        let unit = |a: &[f64; 3]| {
            let x = v(a);
            if x.norm() > 0.0 {
                x.normalize()
            } else {
                x
            }
        };
        match self {
            SegmentSpec::Hold { duration } => Segment::Hold { duration: *duration },
            SegmentSpec::Line { target, duration } => Segment::LineTo {
                target: v(target),
                duration: *duration,
            },
            SegmentSpec::Rotate {
                axis,
                angle_deg,
                duration,
            } => Segment::AttitudeRotate {
                axis: unit(axis),
                angle: angle_deg.to_radians(),
                duration: *duration,
            },
            SegmentSpec::Combined {
                target,
                axis,
                angle_deg,
                duration,
            } => Segment::Combined {
                target: v(target),
                axis: unit(axis),
                angle: angle_deg.to_radians(),
                duration: *duration,
            },
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionSection {
    /// `"benchmark"` (default) or `"hover"`; ignored when segments are given.
    pub builtin: Option<String>,
    pub duration: Option<f64>,
    pub start: Option<[f64; 3]>,
    pub climb: Option<f64>,
    pub climb_time: Option<f64>,
    pub hold_time: Option<f64>,
    pub lateral: Option<f64>,
    pub tilt_deg: Option<f64>,
    pub lateral_time: Option<f64>,
    pub spin_deg: Option<f64>,
    pub spin_time: Option<f64>,
    pub descend_time: Option<f64>,
    #[serde(default, rename = "segment")]
    pub segments: Vec<SegmentSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub name: Option<String>,
    #[serde(default)]
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub platform: PlatformSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub plant: PlantSection,
    #[serde(default)]
    pub mission: MissionSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// A fully resolved scenario plus where its results go.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub name: String,
    pub scenario: Scenario,
    pub output_dir: Option<PathBuf>,
    pub columns: Vec<String>,
}

fn diag3(d: &Option<Diagonal>, field: &str, default: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    match d {
        None => Ok(*default),
        Some(d) => Ok(Matrix3::from_diagonal(&Vector3::from_vec(d.entries(field, 3)?))),
    }
}

fn diag8(d: &Option<Diagonal>, field: &str, default: &InputWeight) -> Result<InputWeight> {
    match d {
        None => Ok(*default),
        Some(d) => Ok(InputWeight::from_diagonal(
            &nalgebra::SVector::<f64, N_PROPS>::from_vec(d.entries(field, N_PROPS)?),
        )),
    }
}

fn field_err(e: Error, section: &str) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::Config(format!("[{section}] {name}: {reason}")),
        other => other,
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// A configuration equivalent to choosing `preset` on the default
    /// mission.
    pub fn preset(preset: Preset) -> Self {
        let mut c = Self::default();
        c.controller.preset = Some(preset);
        c
    }

    pub fn platform_params(&self) -> Result<PlatformParams> {
        let s = &self.platform;
        let d = PlatformParams::default();
        let mass = s.mass.unwrap_or(d.mass);
        let gravity = s.gravity.unwrap_or(d.gravity);
        let thrust_coeff = s.thrust_coeff.unwrap_or(d.thrust_coeff);
        let ratio = s.drag_to_thrust.unwrap_or(d.drag_to_thrust());
        let hover_limit = s.hover_limit_deg.map_or(HOVER_LIMIT_ALPHA, f64::to_radians);
        if !(hover_limit > 0.0 && hover_limit < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config("[platform] hover_limit_deg: must be in (0, 90)".into()));
        }
        let prop_inertia = match (s.prop_mass, s.prop_radius) {
            (None, None) => d.prop_inertia,
            (m, r) => rod_inertia(m.unwrap_or(0.01), r.unwrap_or(0.0635)),
        };
        let p = PlatformParams {
            mass,
            inertia: s
                .inertia_diag
                .map_or(d.inertia, |j| Matrix3::from_diagonal(&Vector3::from_column_slice(&j))),
            cube_half_diag: s.cube_half_diag.unwrap_or(d.cube_half_diag),
            thrust_coeff,
            drag_coeff: ratio * thrust_coeff,
            u_w_max: s
                .u_w_max
                .unwrap_or_else(|| calibrated_u_w_max(mass, gravity, thrust_coeff, hover_limit)),
            alpha_min: s.alpha_min_deg.map_or(d.alpha_min, f64::to_radians),
            alpha_max: s.alpha_max_deg.map_or(d.alpha_max, f64::to_radians),
            alpha_rate: s.alpha_rate_deg.map_or(d.alpha_rate, f64::to_radians),
            control_period: s.control_period.unwrap_or(d.control_period),
            prop_inertia,
            gravity,
        };
        p.validate().map_err(|e| field_err(e, "platform"))?;
        Ok(p)
    }

    pub fn mission(&self) -> Result<Mission> {
        let m = &self.mission;
        if !m.segments.is_empty() {
            let start = m.start.map_or(Vector3::zeros(), |s| Vector3::from_column_slice(&s));
            let segs = m.segments.iter().map(SegmentSpec::to_segment).collect();
            return Mission::new(start, Matrix3::identity(), segs).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("[mission] {msg}")),
                other => other,
            });
        }
        match m.builtin.as_deref().unwrap_or("benchmark") {
            "benchmark" => {
                let d = BenchmarkMissionParams::default();
                benchmark_mission_with(&BenchmarkMissionParams {
                    climb: m.climb.unwrap_or(d.climb),
                    climb_time: m.climb_time.unwrap_or(d.climb_time),
                    hold_time: m.hold_time.unwrap_or(d.hold_time),
                    lateral: m.lateral.unwrap_or(d.lateral),
                    tilt: m.tilt_deg.map_or(d.tilt, f64::to_radians),
                    lateral_time: m.lateral_time.unwrap_or(d.lateral_time),
                    spin_angle: m.spin_deg.map_or(d.spin_angle, f64::to_radians),
                    spin_time: m.spin_time.unwrap_or(d.spin_time),
                    descend_time: m.descend_time.unwrap_or(d.descend_time),
                })
                .map_err(|e| field_err(e, "mission"))
            }
            "hover" => {
                let start = m.start.map_or(Vector3::zeros(), |s| Vector3::from_column_slice(&s));
                hover_mission(start, m.duration.unwrap_or(5.0))
            }
            other => Err(Error::Config(format!(
                "[mission] builtin: unknown mission `{other}` (expected benchmark or hover)"
            ))),
        }
    }

    pub fn resolve(&self) -> Result<ResolvedScenario> {
        let params = self.platform_params()?;
        let c = &self.controller;
        let preset = c.preset.unwrap_or(Preset::CaseA);
        let base_gains = ControlGains::preset();
        let gains = ControlGains {
            kp1: diag3(&c.kp1, "kp1", &base_gains.kp1)?,
            kp2: diag3(&c.kp2, "kp2", &base_gains.kp2)?,
            kw1: diag3(&c.kw1, "kw1", &base_gains.kw1)?,
            kw2: diag3(&c.kw2, "kw2", &base_gains.kw2)?,
        };
        let base = preset.weights();
        let weights = OptWeights {
            w1: diag8(&c.w1, "w1", &base.w1)?,
            w2: match &c.w2 {
                None => base.w2,
                Some(d) => Matrix6::from_diagonal(&Vector6::from_vec(d.entries("w2", 6)?)),
            },
            w3: diag8(&c.w3, "w3", &base.w3)?,
        };

        let mut options = ControlOptions {
            fixed_alpha: c.fixed_alpha_deg.map(f64::to_radians),
            ..Default::default()
        };
        if let Some(tol) = c.qp_tol {
            options.qp.tol = tol;
        }
        if let Some(n) = c.qp_max_iterations {
            options.qp.max_iterations = n;
        }

        let d = PlantConfig::default();
        let p = &self.plant;
        let steps_per_ctrl = p.steps_per_ctrl.unwrap_or(d.steps_per_ctrl);
        let plant = PlantConfig {
            cf_scale: p.cf_scale.unwrap_or(d.cf_scale),
            dt_sim: p.dt_sim.unwrap_or(params.control_period / steps_per_ctrl as f64),
            steps_per_ctrl,
        };

        let mission = self.mission()?;
        let mut scenario = Scenario::new(params, gains, weights, mission);
        scenario.options = options;
        scenario.plant = plant;
        scenario.duration = self.mission.duration;
        scenario.divergence_radius = p.divergence_radius.unwrap_or(DEFAULT_DIVERGENCE_RADIUS);
        if let Some(a) = c.initial_alpha_deg {
            scenario.initial_alpha = a.to_radians();
        }
        scenario.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => {
                let section = match name {
                    "kp1" | "kp2" | "kw1" | "kw2" | "w1" | "w2" | "w3" | "fixed_alpha" | "initial_alpha" => {
                        "controller"
                    }
                    "cf_scale" | "dt_sim" | "steps_per_ctrl" | "divergence_radius" => "plant",
                    "duration" => "mission",
                    _ => "platform",
                };
                Error::Config(format!("[{section}] {name}: {reason}"))
            }
            other => other,
        })?;

        for col in &self.output.columns {
            if !crate::trace::COLUMNS.contains(&col.as_str()) {
                return Err(Error::Config(format!("[output] columns: unknown column `{col}`")));
            }
        }
        Ok(ResolvedScenario {
            name: self.output.name.clone().unwrap_or_else(|| preset.name().to_string()),
            scenario,
            output_dir: self.output.dir.clone(),
            columns: self.output.columns.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_case_a_on_benchmark_mission() {
        let r = ScenarioConfig::from_toml("").unwrap().resolve().unwrap();
        assert_eq!(r.name, "case-a");
        assert_eq!(r.scenario.weights, OptWeights::case_a());
        assert_eq!(r.scenario.params, PlatformParams::default());
        assert!((r.scenario.mission.span() - 21.0).abs() < 1e-12);
    }

    #[test]
    fn overrides_apply() {
        let text = r#"
            [controller]
            preset = "case-b"
            w3 = 1e-4
            fixed_alpha_deg = 45

            [plant]
            cf_scale = 0.7

            [mission]
            builtin = "hover"
            duration = 2.0
        "#;
        let r = ScenarioConfig::from_toml(text).unwrap().resolve().unwrap();
        assert_eq!(r.scenario.weights.w1, OptWeights::case_b().w1);
        assert_eq!(r.scenario.weights.w3, InputWeight::identity() * 1e-4);
        assert!((r.scenario.options.fixed_alpha.unwrap() - 45f64.to_radians()).abs() < 1e-15);
        assert_eq!(r.scenario.plant.cf_scale, 0.7);
        assert_eq!(r.scenario.duration(), 2.0);
    }

    #[test]
    fn segment_list() {
        let text = r#"
            [[mission.segment]]
            kind = "line"
            target = [0.0, 0.0, 1.0]
            duration = 2.0

            [[mission.segment]]
            kind = "rotate"
            axis = [0.0, 2.0, 0.0]
            angle_deg = 90
            duration = 3.0
        "#;
        let m = ScenarioConfig::from_toml(text).unwrap().mission().unwrap();
        assert!((m.span() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_name_line_and_field() {
        let err = ScenarioConfig::from_toml("[plant]\ncf_scale = \"high\"\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = ScenarioConfig::from_toml("[plant]\ncf_scael = 0.5\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("cf_scael"), "{err}");
        let err = ScenarioConfig::from_toml("[plant]\ncf_scale = 1.5\n")
            .unwrap()
            .resolve()
            .unwrap_err()
            .to_string();
        assert!(err.contains("[plant] cf_scale"), "{err}");
        let err = ScenarioConfig::from_toml("[platform]\nmass = -1\n")
            .unwrap()
            .resolve()
            .unwrap_err()
            .to_string();
        assert!(err.contains("[platform] mass"), "{err}");
        let err = ScenarioConfig::from_toml("[controller]\nw2 = [1, 2]\n")
            .unwrap()
            .resolve()
            .unwrap_err()
            .to_string();
        assert!(err.contains("w2"), "{err}");
        let err = ScenarioConfig::from_toml("[controller]\npreset = \"case-c\"\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("case-c"), "{err}");
    }
}
