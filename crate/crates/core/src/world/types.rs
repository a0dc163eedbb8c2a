use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::chem::{MaterialProps, Mixture, SubstanceDatabase};
use crate::geom::{wrap_angle, Pose, Quat, Rect2, Vec3};

use super::params::*;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub id: String,
    pub category: String,
    /// Pose of the object's centre, which is also its grasp point.
    pub pose: Pose,
    pub aabb_half_extents: Vec3,
    pub graspable: bool,
    #[serde(default)]
    pub held_by_agent: bool,
    pub upright_tolerance_deg: f64,
    /// Shape/appearance variant tag used by generalisation splits.
    #[serde(default)]
    pub variant: Option<String>,
    #[serde(default)]
    pub toppled: bool,
}

impl ObjectState {
    pub fn new(id: &str, category: &str, position: Vec3, half_extents: Vec3) -> Self {
        ObjectState {
            id: id.to_string(),
            category: category.to_string(),
            pose: Pose::from_position(position),
            aabb_half_extents: half_extents,
            graspable: true,
            held_by_agent: false,
            upright_tolerance_deg: UPRIGHT_TOLERANCE_DEG,
            variant: None,
            toppled: false,
        }
    }

    pub fn fixed(mut self) -> Self {
        self.graspable = false;
        self
    }

    pub fn with_yaw(mut self, yaw: f64) -> Self {
        self.pose.orientation = Quat::from_yaw(yaw);
        self
    }

    pub fn with_variant(mut self, tag: &str) -> Self {
        self.variant = Some(tag.to_string());
        self
    }

    /// Floor-plane footprint.
    pub fn footprint(&self) -> Rect2 {
        let p = self.pose.position;
        let h = self.aabb_half_extents;
        if self.toppled {
            return Rect2::new([p.x, p.y], [h.x.max(h.z), h.y.max(h.z)], self.pose.orientation.yaw());
        }
        Rect2::new([p.x, p.y], [h.x, h.y], self.pose.orientation.yaw())
    }

    /// World-frame axis-aligned box as `(min, max)`.
    pub fn world_aabb(&self) -> (Vec3, Vec3) {
        let q = self.pose.orientation;
        let h = self.aabb_half_extents;
        let ext = q.rotate(Vec3::X * h.x).abs() + q.rotate(Vec3::Y * h.y).abs() + q.rotate(Vec3::Z * h.z).abs();
        (self.pose.position - ext, self.pose.position + ext)
    }

    /// Lowest point along the body z-axis (e.g. a stirring rod's tip).
    pub fn tip(&self) -> Vec3 {
        self.pose.position - self.pose.orientation.rotate(Vec3::Z) * self.aabb_half_extents.z
    }

    pub fn is_upright(&self) -> bool {
        !self.toppled && self.pose.orientation.tilt() <= self.upright_tolerance_deg.to_radians()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainerState {
    /// Id of the [`ObjectState`] this container is.
    pub object_id: String,
    pub capacity_ml: f64,
    pub contents: Mixture,
    pub mouth_radius_m: f64,
    pub rim_height_m: f64,
    #[serde(default)]
    pub color_rgba: [f64; 4],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum JointGeometry {
    /// Vertical hinge. The handle sits `radius_m` from the pivot at angle
    /// `closed_angle + opening_sign * value`.
    Hinge { pivot: [f64; 2], closed_angle: f64, radius_m: f64, opening_sign: f64, handle_height_m: f64 },
    /// Handle at `origin + axis * value`.
    Slide { origin: Vec3, axis: Vec3 },
    /// Push button depressed along `-normal` by the end-effector tip.
    Button { rest: Vec3, normal: Vec3, radius_m: f64, activation_m: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub id: String,
    pub kind: JointKind,
    pub value: f64,
    pub range: [f64; 2],
    pub attached_object_id: String,
    pub geometry: JointGeometry,
    /// Latched once a button passes its activation depth.
    #[serde(default)]
    pub activated: bool,
}

impl JointState {
    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.range[0], self.range[1])
    }

    /// Pose of the attached object at joint value `v`.
    pub fn handle_pose(&self, v: f64) -> Pose {
        match &self.geometry {
            JointGeometry::Hinge { pivot, closed_angle, radius_m, opening_sign, handle_height_m } => {
                let a = closed_angle + opening_sign * v;
                Pose::new(
                    Vec3::new(pivot[0] + radius_m * a.cos(), pivot[1] + radius_m * a.sin(), *handle_height_m),
                    Quat::from_yaw(a),
                )
            }
            JointGeometry::Slide { origin, axis } => {
                Pose::new(*origin + *axis * v, Quat::from_yaw(axis.y.atan2(axis.x)))
            }
            JointGeometry::Button { rest, normal, .. } => Pose::from_position(*rest - *normal * v),
        }
    }

    /// Joint value whose handle lies closest to `p`, clamped to range.
    pub fn value_toward(&self, p: Vec3) -> f64 {
        let raw = match &self.geometry {
            JointGeometry::Hinge { pivot, closed_angle, opening_sign, .. } => {
                let a = (p.y - pivot[1]).atan2(p.x - pivot[0]);
                opening_sign * wrap_angle(a - closed_angle)
            }
            JointGeometry::Slide { origin, axis } => (p - *origin).dot(*axis),
            JointGeometry::Button { rest, normal, .. } => -(p - *rest).dot(*normal),
        };
        self.clamp(raw)
    }

    pub fn is_button(&self) -> bool {
        matches!(self.geometry, JointGeometry::Button { .. })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BasePose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseLimits {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Default for BaseLimits {
    fn default() -> Self {
        BaseLimits { vx: MAX_BASE_SPEED_MPS, vy: MAX_BASE_SPEED_MPS, omega: MAX_BASE_TURN_RATE }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub ee_pose: Pose,
    pub gripper_aperture_m: f64,
    pub gripper_target_m: f64,
    pub held_object_id: Option<String>,
    /// Held object's pose in the end-effector frame, frozen at grasp.
    pub grasp_offset: Option<Pose>,
    pub base_pose: Option<BasePose>,
    pub max_ee_speed_mps: f64,
    pub max_ee_angular_speed: f64,
    pub max_base_speed: BaseLimits,
    /// Horizontal reach from the base centre, for mobile embodiments.
    pub reach_m: Option<f64>,
    pub base_radius_m: f64,
}

impl Default for AgentState {
    fn default() -> Self {
        AgentState {
            ee_pose: Pose::new(Vec3::new(0.0, 0.0, 1.2), Quat::DOWN),
            gripper_aperture_m: MAX_GRIPPER_APERTURE_M,
            gripper_target_m: MAX_GRIPPER_APERTURE_M,
            held_object_id: None,
            grasp_offset: None,
            base_pose: None,
            max_ee_speed_mps: MAX_EE_SPEED_MPS,
            max_ee_angular_speed: MAX_EE_ANGULAR_SPEED,
            max_base_speed: BaseLimits::default(),
            reach_m: None,
            base_radius_m: BASE_RADIUS_M,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperCommand {
    Open,
    Close,
    Set(f64),
}

/// One tick of commanded velocities. Linear and angular end-effector
/// velocities and base velocities are all world-frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentAction {
    pub ee_linear: Vec3,
    pub ee_angular: Vec3,
    #[serde(default)]
    pub gripper: Option<GripperCommand>,
    /// `(vx, vy, ω)`.
    #[serde(default)]
    pub base: [f64; 3],
}

impl AgentAction {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_finite(&self) -> bool {
        let grip_ok = match self.gripper {
            Some(GripperCommand::Set(a)) => a.is_finite(),
            _ => true,
        };
        self.ee_linear.is_finite() && self.ee_angular.is_finite() && self.base.iter().all(|v| v.is_finite()) && grip_ok
    }

    pub fn is_zero(&self) -> bool {
        self.ee_linear == Vec3::ZERO && self.ee_angular == Vec3::ZERO && self.base == [0.0; 3]
    }
}

/// Horizontal support surface (bench top, shelf, hot plate).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub id: String,
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub top_z: f64,
}

impl Surface {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiltSide {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum EventKind {
    Grasped { object: String },
    GraspMissed,
    Released { object: String },
    Dropped { object: String, fall_m: f64 },
    Toppled { object: String },
    LiquidTransferred { source: String, target: String, ml: f64 },
    Spill { source: String, ml: f64 },
    Overflow { target: String, ml: f64 },
    ButtonActivated { joint: String },
    Tilted { object: String, side: TiltSide },
    StirRevolution { object: String, container: String, count: u32 },
    Collision { held: String, other: String },
    BaseCollision { object: String },
    Reaction { container: String, rule: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldEvent {
    pub tick: u64,
    pub kind: EventKind,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StirTrack {
    pub last_angle: Option<f64>,
    pub total_rad: f64,
    pub revolutions: u32,
}

/// Edge-triggered sensing memory carried between ticks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sensing {
    pub grasp_attempted: bool,
    pub tilt_side: BTreeMap<String, TiltSide>,
    /// Keyed `"<tool>|<container>"`.
    pub stir: BTreeMap<String, StirTrack>,
    /// Keyed `"<held>|<other>"`.
    pub contacts: BTreeSet<String>,
    pub base_contacts: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub schema_version: u32,
    pub tick: u64,
    pub dt_s: f64,
    pub rng_seed: u64,
    pub objects: BTreeMap<String, ObjectState>,
    pub containers: BTreeMap<String, ContainerState>,
    pub joints: BTreeMap<String, JointState>,
    pub surfaces: Vec<Surface>,
    /// Navigable floor, for mobile scenes.
    pub floor: Option<Rect2>,
    pub agent: AgentState,
    pub materials: BTreeMap<String, MaterialProps>,
    pub spilled_ml: f64,
    pub sensing: Sensing,
    pub event_log: Vec<WorldEvent>,
}

impl WorldState {
    pub fn new(rng_seed: u64) -> Self {
        WorldState {
            schema_version: SCHEMA_VERSION,
            tick: 0,
            dt_s: DT_S,
            rng_seed,
            objects: BTreeMap::new(),
            containers: BTreeMap::new(),
            joints: BTreeMap::new(),
            surfaces: Vec::new(),
            floor: None,
            agent: AgentState::default(),
            materials: BTreeMap::new(),
            spilled_ml: 0.0,
            sensing: Sensing::default(),
            event_log: Vec::new(),
        }
    }

    /// Copies every substance's mixture-relevant properties into the world.
    pub fn with_materials(mut self, db: &SubstanceDatabase) -> Self {
        for (id, rec) in &db.records {
            self.materials.insert(id.clone(), rec.props());
        }
        self
    }

    pub fn add_object(&mut self, obj: ObjectState) {
        self.objects.insert(obj.id.clone(), obj);
    }

    /// Adds an object and registers it as a container.
    pub fn add_container(&mut self, obj: ObjectState, capacity_ml: f64, mouth_radius_m: f64, contents: Mixture) {
        let rim = 2.0 * obj.aabb_half_extents.z;
        let id = obj.id.clone();
        self.add_object(obj);
        let color = crate::chem::mixture_color(&contents, &self.materials).unwrap_or([0.0; 4]);
        self.containers.insert(
            id.clone(),
            ContainerState { object_id: id, capacity_ml, contents, mouth_radius_m, rim_height_m: rim, color_rgba: color },
        );
    }

    pub fn add_joint(&mut self, joint: JointState) {
        self.joints.insert(joint.id.clone(), joint);
    }

    pub fn simulated_time_s(&self) -> f64 {
        self.tick as f64 * self.dt_s
    }

    pub fn object(&self, id: &str) -> Option<&ObjectState> {
        self.objects.get(id)
    }

    pub fn support_height(&self, x: f64, y: f64) -> f64 {
        self.surfaces.iter().filter(|s| s.contains(x, y)).map(|s| s.top_z).fold(0.0, f64::max)
    }

    /// Centre height an upright object would rest at where it stands now.
    pub fn rest_height(&self, id: &str) -> Option<f64> {
        let o = self.objects.get(id)?;
        Some(self.support_height(o.pose.position.x, o.pose.position.y) + o.aabb_half_extents.z)
    }

    pub fn container_volume_ml(&self, id: &str) -> f64 {
        self.containers.get(id).and_then(|c| c.contents.volume_ml(&self.materials).ok()).unwrap_or(0.0)
    }

    /// Total fluid volume in all containers.
    pub fn total_liquid_ml(&self) -> f64 {
        self.containers.keys().map(|id| self.container_volume_ml(id)).sum()
    }

    pub fn joint_for_object(&self, object_id: &str) -> Option<&JointState> {
        self.joints.values().find(|j| j.attached_object_id == object_id)
    }

    pub fn events_since(&self, tick: u64) -> impl Iterator<Item = &EventKind> {
        self.event_log.iter().filter(move |e| e.tick >= tick).map(|e| &e.kind)
    }

    /// Centre of a container's mouth in world coordinates.
    pub fn mouth_center(&self, id: &str) -> Option<Vec3> {
        let c = self.containers.get(id)?;
        let o = self.objects.get(id)?;
        let up = o.pose.orientation.rotate(Vec3::Z);
        Some(o.pose.position + up * (c.rim_height_m - o.aabb_half_extents.z))
    }
}
