//! Scripted manipulation: per-action phase machines chained into tasks.

mod articulate;
mod controller;
mod fsm;
mod keypoint;

pub use articulate::{articulate, joint_steps, ArticulationTrajectory};
pub use controller::{run_task, FaultInjection, FaultKind, StageOutcome, TaskController};
pub use fsm::{fsm_tick, phases, AtomicActionFSM, DoneRule, GripperRule, Motion, PhaseSpec};
pub use keypoint::keypoint_for;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::WorldError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManipError {
    #[error("{action} phase {phase} ({label}) exceeded {budget} ticks")]
    PhaseTimeout { action: ActionKind, phase: usize, label: String, budget: u32 },
    #[error("target `{0}` is gone")]
    TargetLost(String),
    #[error("not holding `{0}`")]
    NotHolding(String),
    #[error("`{0}` is not a {1}")]
    WrongJoint(String, &'static str),
    #[error("no route: {0}")]
    Unreachable(String),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Tunables shared by every phase machine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManipConfig {
    /// Proportional servo gain, 1/s.
    pub gain_per_s: f64,
    pub pos_tol_m: f64,
    pub ori_tol_rad: f64,
    pub phase_budget_ticks: u32,
    pub nav_budget_ticks: u32,
    pub settle_ticks: u32,
    pub approach_height_m: f64,
    pub pregrasp_height_m: f64,
    pub lift_height_m: f64,
    /// Gap between a poured container's base and the target rim.
    pub pour_clearance_m: f64,
    pub pour_tilt_rad: f64,
    pub tilt_ticks: u32,
    pub place_clearance_m: f64,
    pub shake_angle_rad: f64,
    pub shake_half_cycle_ticks: u32,
    pub stir_depth_frac: f64,
    pub stir_radius_frac: f64,
    pub stir_revolutions: f64,
    pub stir_rev_per_s: f64,
    pub press_offset_m: f64,
    pub press_depth_m: f64,
    pub hinge_rate_rad_s: f64,
    pub slide_rate_m_s: f64,
    /// Joint convergence tolerance, rad or m.
    pub joint_tol: f64,
}

impl Default for ManipConfig {
    fn default() -> Self {
        ManipConfig {
            gain_per_s: 4.0,
            pos_tol_m: 0.01,
            ori_tol_rad: 5f64.to_radians(),
            phase_budget_ticks: 600,
            nav_budget_ticks: 3600,
            settle_ticks: 10,
            approach_height_m: 0.15,
            pregrasp_height_m: 0.05,
            lift_height_m: 0.25,
            pour_clearance_m: 0.03,
            pour_tilt_rad: std::f64::consts::FRAC_PI_2,
            tilt_ticks: 60,
            place_clearance_m: 0.002,
            shake_angle_rad: 25f64.to_radians(),
            shake_half_cycle_ticks: 30,
            stir_depth_frac: 0.6,
            stir_radius_frac: 0.5,
            stir_revolutions: 2.0,
            stir_rev_per_s: 1.0,
            press_offset_m: 0.05,
            press_depth_m: 0.01,
            hinge_rate_rad_s: 0.75,
            slide_rate_m_s: 0.2,
            joint_tol: 0.005,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Pick,
    Pour,
    Place,
    Press,
    Shake,
    Stir,
    OpenDoor,
    CloseDoor,
    OpenDrawer,
    CloseDrawer,
    Navigate,
    Orient,
}

impl std::fmt::Display for ActionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

/// One step of a task script.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ActionSpec {
    Pick { object: String },
    Pour { source: String, target: String },
    /// Set the held object down upright with its centre over `at`.
    Place { object: String, at: [f64; 2] },
    Press { button: String },
    Shake { object: String },
    Stir { rod: String, container: String },
    OpenDoor { joint: String, angle_rad: f64 },
    CloseDoor { joint: String },
    OpenDrawer { joint: String, distance_m: f64 },
    CloseDrawer { joint: String },
    /// Drive the base to a floor point.
    Navigate { goal: [f64; 2] },
    /// Turn the base in place to face an object.
    Orient { toward: String },
}

impl ActionSpec {
    pub fn kind(&self) -> ActionKind {
        match self {
            ActionSpec::Pick { .. } => ActionKind::Pick,
            ActionSpec::Pour { .. } => ActionKind::Pour,
            ActionSpec::Place { .. } => ActionKind::Place,
            ActionSpec::Press { .. } => ActionKind::Press,
            ActionSpec::Shake { .. } => ActionKind::Shake,
            ActionSpec::Stir { .. } => ActionKind::Stir,
            ActionSpec::OpenDoor { .. } => ActionKind::OpenDoor,
            ActionSpec::CloseDoor { .. } => ActionKind::CloseDoor,
            ActionSpec::OpenDrawer { .. } => ActionKind::OpenDrawer,
            ActionSpec::CloseDrawer { .. } => ActionKind::CloseDrawer,
            ActionSpec::Navigate { .. } => ActionKind::Navigate,
            ActionSpec::Orient { .. } => ActionKind::Orient,
        }
    }

    /// Objects and joints the action needs to exist.
    pub fn targets(&self) -> Vec<&str> {
        match self {
            ActionSpec::Pick { object } | ActionSpec::Place { object, .. } | ActionSpec::Shake { object } => vec![object],
            ActionSpec::Pour { source, target } => vec![source, target],
            ActionSpec::Stir { rod, container } => vec![rod, container],
            ActionSpec::Press { button: j }
            | ActionSpec::OpenDoor { joint: j, .. }
            | ActionSpec::CloseDoor { joint: j }
            | ActionSpec::OpenDrawer { joint: j, .. }
            | ActionSpec::CloseDrawer { joint: j } => vec![j],
            ActionSpec::Orient { toward } => vec![toward],
            ActionSpec::Navigate { .. } => vec![],
        }
    }
}

#[cfg(test)]
mod tests;
