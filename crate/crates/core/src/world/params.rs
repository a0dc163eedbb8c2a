//! Fixed physical and protocol constants of the symbolic world.

use std::f64::consts::PI;

pub const SCHEMA_VERSION: u32 = 1;

pub const TICK_RATE_HZ: u32 = 60;
pub const DT_S: f64 = 1.0 / TICK_RATE_HZ as f64;

pub const MAX_EE_SPEED_MPS: f64 = 0.5;
pub const MAX_EE_ANGULAR_SPEED: f64 = PI;
pub const MAX_BASE_SPEED_MPS: f64 = 0.5;
pub const MAX_BASE_TURN_RATE: f64 = 1.0;
pub const BASE_RADIUS_M: f64 = 0.2;

pub const MAX_GRIPPER_APERTURE_M: f64 = 0.08;
/// Aperture at or below which the fingers hold an object.
pub const GRASP_APERTURE_M: f64 = 0.04;
pub const GRIPPER_SPEED_MPS: f64 = 0.2;

pub const GRASP_TOLERANCE_M: f64 = 0.02;
pub const GRASP_TOLERANCE_DEG: f64 = 15.0;

/// Tilt from vertical at which liquid starts to leave a container.
pub const POUR_ONSET_RAD: f64 = PI / 4.0;
/// Flow at full (horizontal) tilt.
pub const POUR_RATE_ML_PER_S: f64 = 50.0;

pub const UPRIGHT_TOLERANCE_DEG: f64 = 10.0;
/// Release heights above rest beyond this count as a drop.
pub const DROP_THRESHOLD_M: f64 = 0.03;

/// Tilt past which a held object counts as leaning to one side.
pub const SIDE_TILT_RAD: f64 = 15.0 * PI / 180.0;

/// Penetration below which touching boxes are not a collision.
pub const CONTACT_EPS_M: f64 = 1e-4;
