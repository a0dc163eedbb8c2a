//! Symbolic tabletop/room world advanced in fixed ticks.
//!
//! The state is plain data (see [`WorldState`]) and [`WorldState::step`] is
//! a deterministic function of the state and one [`AgentAction`].

pub mod params;
mod pour;
mod snapshot;
mod types;

pub use params::*;
pub use snapshot::{snapshot_from_json, snapshot_to_json};
pub use types::*;

use thiserror::Error;

use crate::chem::ChemError;
use crate::geom::{Pose, Quat, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("`{0}` is not graspable")]
    NotGraspable(String),
    #[error("already holding `{0}`")]
    AlreadyHolding(String),
    #[error("`{object}` out of grasp tolerance: {reason}")]
    OutOfTolerance { object: String, reason: String },
    #[error("`{0}` is not a container")]
    NotAContainer(String),
    #[error("`{0}` is not held")]
    NotHeld(String),
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error("snapshot: {0}")]
    Snapshot(String),
}

impl WorldState {
    pub(crate) fn emit(&mut self, tick: u64, kind: EventKind) {
        self.event_log.push(WorldEvent { tick, kind });
    }

    /// Advances the world by one tick.
    pub fn step(&mut self, action: &AgentAction) -> Result<(), WorldError> {
        if !action.is_finite() {
            return Err(WorldError::InvalidAction("non-finite component".into()));
        }
        if action.base != [0.0; 3] && self.agent.base_pose.is_none() {
            return Err(WorldError::InvalidAction("base command for a fixed-base agent".into()));
        }
        let now = self.tick + 1;
        let dt = self.dt_s;

        self.update_gripper(action.gripper, dt);
        self.resolve_grasp(now);

        let before = self.agent.ee_pose;
        if action.base != [0.0; 3] {
            self.move_base(action.base, dt);
        }
        if action.ee_linear != Vec3::ZERO || action.ee_angular != Vec3::ZERO {
            self.move_ee(action, dt);
        }
        self.clamp_reach();
        if self.agent.ee_pose != before {
            self.carry_held();
        }
        self.update_buttons(now);
        if let Some(h) = self.agent.held_object_id.clone() {
            if self.containers.contains_key(&h) {
                self.pour_from(&h, dt, now)?;
            }
        }
        self.sense(now);
        self.tick = now;
        Ok(())
    }

    fn update_gripper(&mut self, cmd: Option<GripperCommand>, dt: f64) {
        if let Some(cmd) = cmd {
            self.agent.gripper_target_m = match cmd {
                GripperCommand::Open => MAX_GRIPPER_APERTURE_M,
                GripperCommand::Close => 0.0,
                GripperCommand::Set(a) => a.clamp(0.0, MAX_GRIPPER_APERTURE_M),
            };
        }
        let a = self.agent.gripper_aperture_m;
        let t = self.agent.gripper_target_m;
        let max = GRIPPER_SPEED_MPS * dt;
        self.agent.gripper_aperture_m = a + (t - a).clamp(-max, max);
    }

    fn resolve_grasp(&mut self, now: u64) {
        let closed = self.agent.gripper_aperture_m <= GRASP_APERTURE_M;
        if let Some(h) = self.agent.held_object_id.clone() {
            if !closed {
                self.release_at(&h, now);
            }
            return;
        }
        if !closed {
            self.sensing.grasp_attempted = false;
            return;
        }
        if self.sensing.grasp_attempted {
            return;
        }
        self.sensing.grasp_attempted = true;
        match self.grasp_candidate() {
            Some(id) => {
                self.bind(&id);
                self.emit(now, EventKind::Grasped { object: id });
            }
            None => self.emit(now, EventKind::GraspMissed),
        }
    }

    fn grasp_candidate(&self) -> Option<String> {
        let ee = self.agent.ee_pose;
        self.objects
            .values()
            .filter(|o| o.graspable && !o.held_by_agent && !o.toppled)
            .filter(|o| self.grasp_check(o, &ee).is_ok())
            .min_by(|a, b| {
                let da = (a.pose.position - ee.position).norm();
                let db = (b.pose.position - ee.position).norm();
                da.total_cmp(&db)
            })
            .map(|o| o.id.clone())
    }

    fn grasp_check(&self, o: &ObjectState, ee: &Pose) -> Result<(), WorldError> {
        let d = (o.pose.position - ee.position).norm();
        if d > GRASP_TOLERANCE_M {
            return Err(WorldError::OutOfTolerance { object: o.id.clone(), reason: format!("distance {d:.4} m") });
        }
        let tool = ee.orientation.rotate(Vec3::Z);
        let down = -o.pose.orientation.rotate(Vec3::Z);
        let ang = tool.dot(down).clamp(-1.0, 1.0).acos();
        if ang > GRASP_TOLERANCE_DEG.to_radians() {
            return Err(WorldError::OutOfTolerance {
                object: o.id.clone(),
                reason: format!("approach angle {:.1} deg", ang.to_degrees()),
            });
        }
        Ok(())
    }

    fn bind(&mut self, id: &str) {
        let ee = self.agent.ee_pose;
        let o = self.objects.get_mut(id).expect("candidate exists");
        o.held_by_agent = true;
        self.agent.grasp_offset = Some(ee.inverse().compose(&o.pose));
        self.agent.held_object_id = Some(id.to_string());
        self.sensing.tilt_side.remove(id);
    }

    /// Rigidly attaches an object to the end-effector, closing the gripper.
    pub fn attach(&mut self, object_id: &str) -> Result<(), WorldError> {
        if let Some(h) = &self.agent.held_object_id {
            return Err(WorldError::AlreadyHolding(h.clone()));
        }
        let o = self.objects.get(object_id).ok_or_else(|| WorldError::UnknownObject(object_id.into()))?;
        if !o.graspable {
            return Err(WorldError::NotGraspable(object_id.into()));
        }
        self.grasp_check(o, &self.agent.ee_pose)?;
        self.bind(object_id);
        self.agent.gripper_target_m = 0.0;
        self.agent.gripper_aperture_m = self.agent.gripper_aperture_m.min(GRASP_APERTURE_M);
        self.sensing.grasp_attempted = true;
        let t = self.tick;
        self.emit(t, EventKind::Grasped { object: object_id.into() });
        Ok(())
    }

    /// Opens the gripper and lets the held object settle.
    pub fn release(&mut self) -> Result<(), WorldError> {
        let h = self.agent.held_object_id.clone().ok_or_else(|| WorldError::NotHeld("<gripper>".into()))?;
        self.agent.gripper_target_m = MAX_GRIPPER_APERTURE_M;
        self.agent.gripper_aperture_m = self.agent.gripper_aperture_m.max(GRASP_APERTURE_M + 1e-9);
        let t = self.tick;
        self.release_at(&h, t);
        Ok(())
    }

    fn release_at(&mut self, id: &str, now: u64) {
        self.agent.held_object_id = None;
        self.agent.grasp_offset = None;
        if let Some(o) = self.objects.get_mut(id) {
            o.held_by_agent = false;
        }
        self.emit(now, EventKind::Released { object: id.into() });
        if self.joint_for_object(id).is_none() {
            self.settle(id, now);
        }
    }

    /// Drops a free object onto whatever supports it.
    fn settle(&mut self, id: &str, now: u64) {
        let Some(o) = self.objects.get(id).cloned() else { return };
        let p = o.pose.position;
        let support = self.support_height(p.x, p.y);
        let yaw = o.pose.orientation.yaw();
        let tilted = o.pose.orientation.tilt() > o.upright_tolerance_deg.to_radians();
        let mut spilled = None;
        {
            let obj = self.objects.get_mut(id).unwrap();
            if tilted {
                obj.toppled = true;
                obj.pose.orientation = Quat::from_yaw(yaw) * Quat::from_axis_angle(Vec3::X, std::f64::consts::FRAC_PI_2);
                obj.pose.position.z = support + obj.aabb_half_extents.y;
            } else {
                obj.pose.orientation = Quat::from_yaw(yaw);
                let rest = support + obj.aabb_half_extents.z;
                let fall = p.z - rest;
                obj.pose.position.z = rest;
                if fall > DROP_THRESHOLD_M {
                    self.event_log.push(WorldEvent { tick: now, kind: EventKind::Dropped { object: id.into(), fall_m: fall } });
                }
            }
        }
        if tilted {
            self.emit(now, EventKind::Toppled { object: id.into() });
            if let Some(c) = self.containers.get_mut(id) {
                let all = c.contents.take_fraction(1.0);
                spilled = Some(all.volume_ml(&self.materials).unwrap_or(0.0));
            }
        }
        if let Some(ml) = spilled {
            self.spilled_ml += ml;
            if ml > 0.0 {
                self.emit(now, EventKind::Spill { source: id.into(), ml });
            }
        }
        let fp = self.objects[id].footprint();
        let (lo, hi) = self.objects[id].world_aabb();
        let hits: Vec<String> = self
            .objects
            .values()
            .filter(|other| other.id != id && self.joint_for_object(&other.id).is_none())
            .filter(|other| {
                let (olo, ohi) = other.world_aabb();
                lo.z < ohi.z - CONTACT_EPS_M && olo.z < hi.z - CONTACT_EPS_M && fp.overlaps(&other.footprint(), CONTACT_EPS_M)
            })
            .map(|other| other.id.clone())
            .collect();
        for other in hits {
            self.emit(now, EventKind::Collision { held: id.into(), other });
        }
    }

    fn move_base(&mut self, cmd: [f64; 3], dt: f64) {
        let lim = self.agent.max_base_speed;
        let vx = cmd[0].clamp(-lim.vx, lim.vx);
        let vy = cmd[1].clamp(-lim.vy, lim.vy);
        let w = cmd[2].clamp(-lim.omega, lim.omega);
        let base = self.agent.base_pose.as_mut().expect("checked in step");
        let old = Vec3::new(base.x, base.y, 0.0);
        base.x += vx * dt;
        base.y += vy * dt;
        let dyaw = w * dt;
        base.yaw = crate::geom::wrap_angle(base.yaw + dyaw);
        let spin = Quat::from_yaw(dyaw);
        let ee = &mut self.agent.ee_pose;
        let rel = ee.position - old;
        let moved = spin.rotate(Vec3::new(rel.x, rel.y, 0.0));
        ee.position = Vec3::new(old.x + moved.x + vx * dt, old.y + moved.y + vy * dt, ee.position.z);
        if dyaw != 0.0 {
            ee.orientation = (spin * ee.orientation).normalized();
        }
    }

    fn move_ee(&mut self, action: &AgentAction, dt: f64) {
        let lin = action.ee_linear.clamp_norm(self.agent.max_ee_speed_mps);
        let ang = action.ee_angular.clamp_norm(self.agent.max_ee_angular_speed);
        let ee = &mut self.agent.ee_pose;
        ee.position += lin * dt;
        if ang != Vec3::ZERO {
            ee.orientation = (Quat::from_rotation_vector(ang * dt) * ee.orientation).normalized();
        }
    }

    fn clamp_reach(&mut self) {
        let (Some(base), Some(reach)) = (self.agent.base_pose, self.agent.reach_m) else { return };
        let ee = &mut self.agent.ee_pose.position;
        let dx = ee.x - base.x;
        let dy = ee.y - base.y;
        let d = dx.hypot(dy);
        if d > reach {
            ee.x = base.x + dx * reach / d;
            ee.y = base.y + dy * reach / d;
        }
    }

    /// Moves the held object with the hand, or drives its joint.
    fn carry_held(&mut self) {
        let (Some(id), Some(offset)) = (self.agent.held_object_id.clone(), self.agent.grasp_offset) else { return };
        let desired = self.agent.ee_pose.compose(&offset);
        let joint_id = self.joint_for_object(&id).map(|j| j.id.clone());
        match joint_id {
            None => self.objects.get_mut(&id).unwrap().pose = desired,
            Some(jid) => {
                let j = self.joints.get_mut(&jid).unwrap();
                let v = j.value_toward(desired.position);
                j.value = v;
                let handle = j.handle_pose(v);
                self.objects.get_mut(&id).unwrap().pose = handle;
                self.agent.ee_pose = handle.compose(&offset.inverse());
            }
        }
    }

    fn update_buttons(&mut self, now: u64) {
        let tip = self.agent.ee_pose.position;
        let holding = self.agent.held_object_id.is_some();
        let mut fired = Vec::new();
        for j in self.joints.values_mut() {
            let JointGeometry::Button { rest, normal, radius_m, activation_m } = j.geometry.clone() else { continue };
            let d = tip - rest;
            let along = d.dot(normal);
            let lateral = (d - normal * along).norm();
            let depth = if !holding && lateral <= radius_m { j.clamp(-along) } else { j.range[0] };
            if depth != j.value {
                j.value = depth;
                if let Some(o) = self.objects.get_mut(&j.attached_object_id) {
                    o.pose.position = rest - normal * depth;
                }
            }
            if !j.activated && depth >= activation_m {
                j.activated = true;
                fired.push(j.id.clone());
            }
        }
        for id in fired {
            self.emit(now, EventKind::ButtonActivated { joint: id });
        }
    }

    fn sense(&mut self, now: u64) {
        let Some(h) = self.agent.held_object_id.clone() else {
            self.sensing.contacts.clear();
            self.sense_base(now);
            return;
        };
        let held = self.objects[&h].clone();

        let lean = held.pose.orientation.rotate(Vec3::Z).x;
        let side = if lean <= -SIDE_TILT_RAD.sin() {
            Some(TiltSide::Left)
        } else if lean >= SIDE_TILT_RAD.sin() {
            Some(TiltSide::Right)
        } else {
            None
        };
        if let Some(s) = side {
            if self.sensing.tilt_side.get(&h) != Some(&s) {
                self.sensing.tilt_side.insert(h.clone(), s);
                self.emit(now, EventKind::Tilted { object: h.clone(), side: s });
            }
        }

        let tip = held.tip();
        let mut stir_events = Vec::new();
        if !self.containers.contains_key(&h) {
            for (cid, c) in &self.containers {
                let o = &self.objects[cid];
                let base_z = o.pose.position.z - o.aabb_half_extents.z;
                let inside = tip.planar_distance(o.pose.position) < c.mouth_radius_m
                    && tip.z < base_z + c.rim_height_m
                    && tip.z >= base_z - 1e-9;
                let key = format!("{h}|{cid}");
                let track = self.sensing.stir.entry(key).or_default();
                if !inside {
                    track.last_angle = None;
                    continue;
                }
                let a = (tip.y - o.pose.position.y).atan2(tip.x - o.pose.position.x);
                if let Some(last) = track.last_angle {
                    track.total_rad += crate::geom::wrap_angle(a - last);
                }
                track.last_angle = Some(a);
                while track.total_rad.abs() >= (track.revolutions + 1) as f64 * std::f64::consts::TAU {
                    track.revolutions += 1;
                    stir_events.push(EventKind::StirRevolution {
                        object: h.clone(),
                        container: cid.clone(),
                        count: track.revolutions,
                    });
                }
            }
        }
        for e in stir_events {
            self.emit(now, e);
        }

        let (lo, hi) = held.world_aabb();
        let mut touching = Vec::new();
        for o in self.objects.values() {
            if o.id == h || self.joint_for_object(&o.id).is_some() {
                continue;
            }
            if let Some(c) = self.containers.get(&o.id) {
                if tip.planar_distance(o.pose.position) < c.mouth_radius_m {
                    continue;
                }
            }
            let (olo, ohi) = o.world_aabb();
            let overlap = (0..3).all(|k| {
                let (a0, a1, b0, b1) = match k {
                    0 => (lo.x, hi.x, olo.x, ohi.x),
                    1 => (lo.y, hi.y, olo.y, ohi.y),
                    _ => (lo.z, hi.z, olo.z, ohi.z),
                };
                a1.min(b1) - a0.max(b0) > CONTACT_EPS_M
            });
            if overlap {
                touching.push(o.id.clone());
            }
        }
        let prefix = format!("{h}|");
        self.sensing.contacts.retain(|k| k.starts_with(&prefix) && touching.iter().any(|t| k[prefix.len()..] == **t));
        for other in touching {
            if self.sensing.contacts.insert(format!("{h}|{other}")) {
                self.emit(now, EventKind::Collision { held: h.clone(), other });
            }
        }
        self.sense_base(now);
    }

    fn sense_base(&mut self, now: u64) {
        let Some(base) = self.agent.base_pose else { return };
        let r = self.agent.base_radius_m;
        let held = self.agent.held_object_id.clone();
        let hits: Vec<String> = self
            .objects
            .values()
            .filter(|o| Some(&o.id) != held.as_ref() && o.pose.position.z - o.aabb_half_extents.z < 1.6)
            .filter(|o| o.footprint().point_distance([base.x, base.y]) < r)
            .map(|o| o.id.clone())
            .collect();
        self.sensing.base_contacts.retain(|k| hits.contains(k));
        for id in hits {
            if self.sensing.base_contacts.insert(id.clone()) {
                self.emit(now, EventKind::BaseCollision { object: id });
            }
        }
    }
}
