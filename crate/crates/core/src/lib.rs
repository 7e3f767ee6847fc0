//! Modelling, analysis and control of a tilt-morphing octorotor whose eight
//! propellers are tilted together by a single shared angle.

pub mod actuation;
pub mod config;
pub mod controller;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod optimizer;
pub mod trace;
pub mod trajectory;
pub mod wrench_sets;

pub use nalgebra;

pub use actuation::{classify_actuation, full_allocation, ActuationClass, ActuationTag};
pub use controller::{
    control_step, ControlGains, ControlOptions, ControlSolution, ControllerState, FlatReference, OptWeights,
};
pub use dynamics::{
    run_scenario, simulate, PlantConfig, RigidBodyState, Scenario, SimRun, SimTrace, TraceRow, TraceSummary,
};
pub use energy::{accumulate_energy, delta_m_bar, hover_input, motor_power, EnergyAccount};
pub use error::{Error, Result};
pub use geometry::{
    allocation_matrix, propeller_rotation, AllocationMatrix, InputVector, PlatformParams, PropellerLayout, Wrench,
    N_PROPS,
};
pub use trajectory::{benchmark_mission, Mission, Segment};
pub use wrench_sets::{inscribed_force_radius, omni_alpha_interval, support_force};
