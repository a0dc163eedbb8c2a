use crate::geom::{Pose, Quat, Vec3};
use crate::world::{
    AgentAction, GripperCommand, JointGeometry, WorldState, DT_S, MAX_EE_ANGULAR_SPEED, MAX_EE_SPEED_MPS,
    MAX_GRIPPER_APERTURE_M,
};

use super::articulate::{articulate, joint_steps, ArticulationTrajectory};
use super::keypoint::{held_object, joint, keypoint_for, STIR_OVERSHOOT_REV};
use super::{ActionKind, ActionSpec, ManipConfig, ManipError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Motion {
    /// Proportional servo toward a fixed keypoint.
    Servo,
    /// Servo toward a keypoint that advances along a path each tick.
    Path,
    /// No arm motion.
    Still,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GripperRule {
    Keep,
    Open,
    Close,
    Set(f64),
    /// Open until the keypoint is reached, then close.
    CloseOnArrival,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DoneRule {
    Pose,
    Dwell,
    /// Aperture has reached this phase's commanded value.
    Gripper,
    PathPose,
    Holding,
    Pressed,
    JointAt,
    SourceEmpty,
    Always,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseSpec {
    pub index: usize,
    pub label: &'static str,
    pub motion: Motion,
    pub gripper: GripperRule,
    pub done: DoneRule,
}

const fn p(index: usize, label: &'static str, motion: Motion, gripper: GripperRule, done: DoneRule) -> PhaseSpec {
    PhaseSpec { index, label, motion, gripper, done }
}

use DoneRule as D;
use GripperRule as G;
use Motion as M;

const PICK: [PhaseSpec; 7] = [
    p(0, "above", M::Servo, G::Open, D::Pose),
    p(1, "lower", M::Servo, G::Open, D::Pose),
    p(2, "align", M::Servo, G::Open, D::Pose),
    p(3, "settle", M::Still, G::Open, D::Dwell),
    p(4, "close", M::Still, G::Close, D::Gripper),
    p(5, "lift", M::Servo, G::Close, D::Pose),
    p(6, "done", M::Still, G::Close, D::Always),
];

const POUR: [PhaseSpec; 6] = [
    p(0, "start", M::Servo, G::Close, D::Pose),
    p(1, "ready", M::Servo, G::Close, D::Pose),
    p(2, "tilt", M::Path, G::Close, D::PathPose),
    p(3, "pause", M::Servo, G::Close, D::SourceEmpty),
    p(4, "untilt", M::Path, G::Close, D::PathPose),
    p(5, "done", M::Still, G::Close, D::Always),
];

const PLACE: [PhaseSpec; 7] = [
    p(0, "above", M::Servo, G::Close, D::Pose),
    p(1, "lower", M::Servo, G::Close, D::Pose),
    p(2, "align", M::Servo, G::Close, D::Pose),
    p(3, "settle", M::Still, G::Close, D::Dwell),
    p(4, "release", M::Still, G::Open, D::Gripper),
    p(5, "retract", M::Servo, G::Open, D::Pose),
    p(6, "done", M::Still, G::Open, D::Always),
];

const PRESS: [PhaseSpec; 4] = [
    p(0, "above", M::Servo, G::Keep, D::Pose),
    p(1, "spacing", M::Still, G::Set(0.0), D::Gripper),
    p(2, "press", M::Servo, G::Set(0.0), D::Pressed),
    p(3, "done", M::Still, G::Keep, D::Always),
];

const SHAKE: [PhaseSpec; 11] = [
    p(0, "initial", M::Servo, G::Close, D::Pose),
    p(1, "stabilize", M::Still, G::Close, D::Dwell),
    p(2, "left", M::Path, G::Close, D::PathPose),
    p(3, "right", M::Path, G::Close, D::PathPose),
    p(4, "left", M::Path, G::Close, D::PathPose),
    p(5, "right", M::Path, G::Close, D::PathPose),
    p(6, "left", M::Path, G::Close, D::PathPose),
    p(7, "right", M::Path, G::Close, D::PathPose),
    p(8, "return", M::Servo, G::Close, D::Pose),
    p(9, "stabilize", M::Still, G::Close, D::Dwell),
    p(10, "done", M::Still, G::Close, D::Always),
];

const STIR: [PhaseSpec; 6] = [
    p(0, "lift", M::Servo, G::Close, D::Pose),
    p(1, "above", M::Servo, G::Close, D::Pose),
    p(2, "insert", M::Servo, G::Close, D::Pose),
    p(3, "stir", M::Path, G::Close, D::PathPose),
    p(4, "retract", M::Servo, G::Close, D::Pose),
    p(5, "done", M::Still, G::Close, D::Always),
];

const OPEN: [PhaseSpec; 6] = [
    p(0, "approach", M::Servo, G::Open, D::Pose),
    p(1, "grip", M::Still, G::Close, D::Gripper),
    p(2, "pull", M::Path, G::Close, D::PathPose),
    p(3, "check", M::Servo, G::Close, D::JointAt),
    p(4, "pause", M::Still, G::Close, D::Dwell),
    p(5, "release", M::Still, G::Open, D::Gripper),
];

const CLOSE: [PhaseSpec; 3] = [
    p(0, "approach", M::Servo, G::CloseOnArrival, D::Holding),
    p(1, "push", M::Path, G::Close, D::JointAt),
    p(2, "done", M::Still, G::Close, D::Always),
];

/// Phase table of an action. Base motions have none.
pub fn phases(kind: ActionKind) -> &'static [PhaseSpec] {
    match kind {
        ActionKind::Pick => &PICK,
        ActionKind::Pour => &POUR,
        ActionKind::Place => &PLACE,
        ActionKind::Press => &PRESS,
        ActionKind::Shake => &SHAKE,
        ActionKind::Stir => &STIR,
        ActionKind::OpenDoor | ActionKind::OpenDrawer => &OPEN,
        ActionKind::CloseDoor | ActionKind::CloseDrawer => &CLOSE,
        ActionKind::Navigate | ActionKind::Orient => &[],
    }
}

/// Values captured when the action or a phase starts.
#[derive(Clone, Debug, Default)]
pub(crate) struct Ctx {
    pub started: bool,
    pub entered: bool,
    pub upright: Quat,
    pub dir: Vec3,
    pub anchor: Vec3,
    pub rest_z: f64,
    pub travel_z: f64,
    pub joint_target: f64,
    pub phase_start_ee: Pose,
    pub path_ticks: u32,
    pub art: Option<ArticulationTrajectory>,
}

#[derive(Clone, Debug)]
pub struct AtomicActionFSM {
    pub spec: ActionSpec,
    pub phase: usize,
    pub phase_ticks: u32,
    pub complete: bool,
    pub(crate) ctx: Ctx,
}

impl AtomicActionFSM {
    pub fn new(spec: ActionSpec) -> Self {
        AtomicActionFSM { spec, phase: 0, phase_ticks: 0, complete: false, ctx: Ctx::default() }
    }

    pub fn kind(&self) -> ActionKind {
        self.spec.kind()
    }

    pub fn phase_spec(&self) -> &'static PhaseSpec {
        let table = phases(self.kind());
        &table[self.phase.min(table.len() - 1)]
    }

    /// `kind:index:label` of the current phase.
    pub fn phase_label(&self) -> String {
        let ps = self.phase_spec();
        format!("{}:{}:{}", self.kind(), ps.index, ps.label)
    }

    /// Ticks the current path phase takes, once entered.
    pub fn path_ticks(&self) -> u32 {
        self.ctx.path_ticks
    }

    pub fn trajectory(&self) -> Option<&ArticulationTrajectory> {
        self.ctx.art.as_ref()
    }
}

pub(crate) fn servo(ee: &Pose, kp: &Pose, cfg: &ManipConfig) -> (Vec3, Vec3) {
    let lin = ((kp.position - ee.position) * cfg.gain_per_s).clamp_norm(MAX_EE_SPEED_MPS);
    let mut q = (kp.orientation * ee.orientation.conj()).normalized();
    if q.w < 0.0 {
        q = -q;
    }
    let ang = (q.to_rotation_vector() * cfg.gain_per_s).clamp_norm(MAX_EE_ANGULAR_SPEED);
    (lin, ang)
}

pub(crate) fn within(ee: &Pose, kp: &Pose, cfg: &ManipConfig) -> bool {
    (ee.position - kp.position).norm() <= cfg.pos_tol_m && ee.orientation.angle_to(kp.orientation) <= cfg.ori_tol_rad
}

fn aperture_for(rule: GripperRule) -> Option<f64> {
    match rule {
        G::Open => Some(MAX_GRIPPER_APERTURE_M),
        G::Close => Some(0.0),
        G::Set(a) => Some(a.clamp(0.0, MAX_GRIPPER_APERTURE_M)),
        G::Keep | G::CloseOnArrival => None,
    }
}

fn enter_action(fsm: &mut AtomicActionFSM, world: &WorldState, cfg: &ManipConfig) -> Result<(), ManipError> {
    let ctx = &mut fsm.ctx;
    match &fsm.spec {
        ActionSpec::Pour { source, target } => {
            let s = held_object(world, source)?;
            let t = world.object(target).ok_or_else(|| ManipError::TargetLost(target.clone()))?;
            ctx.upright = Quat::from_yaw(s.pose.orientation.yaw());
            let d = t.pose.position - s.pose.position;
            let d = Vec3::new(d.x, d.y, 0.0);
            ctx.dir = if d.norm() < 1e-9 { Vec3::X } else { d.normalized() };
        }
        ActionSpec::Place { object, at } => {
            let o = held_object(world, object)?;
            ctx.upright = Quat::from_yaw(o.pose.orientation.yaw());
            ctx.rest_z = world.support_height(at[0], at[1]) + o.aabb_half_extents.z;
            ctx.travel_z = o.pose.position.z.max(ctx.rest_z + cfg.approach_height_m);
        }
        ActionSpec::Shake { object } => {
            let o = held_object(world, object)?;
            ctx.upright = Quat::from_yaw(o.pose.orientation.yaw());
            ctx.anchor = o.pose.position + Vec3::Z * cfg.pregrasp_height_m;
        }
        ActionSpec::Stir { rod, container } => {
            let o = held_object(world, rod)?;
            if !world.containers.contains_key(container) {
                return Err(ManipError::TargetLost(container.clone()));
            }
            ctx.upright = Quat::from_yaw(o.pose.orientation.yaw());
            ctx.anchor = o.pose.position;
        }
        ActionSpec::Press { button } => {
            if !joint(world, button)?.is_button() {
                return Err(ManipError::WrongJoint(button.clone(), "button"));
            }
            ctx.upright = Quat::from_yaw(world.agent.ee_pose.orientation.yaw()) * Quat::DOWN;
        }
        ActionSpec::OpenDoor { joint: id, angle_rad: v } | ActionSpec::OpenDrawer { joint: id, distance_m: v } => {
            let j = joint(world, id)?;
            check_articulated(fsm.spec.kind(), id, &j.geometry)?;
            ctx.joint_target = j.clamp(*v);
        }
        ActionSpec::CloseDoor { joint: id } | ActionSpec::CloseDrawer { joint: id } => {
            let j = joint(world, id)?;
            check_articulated(fsm.spec.kind(), id, &j.geometry)?;
            ctx.joint_target = j.range[0];
        }
        ActionSpec::Pick { object } => {
            world.object(object).ok_or_else(|| ManipError::TargetLost(object.clone()))?;
        }
        ActionSpec::Navigate { .. } | ActionSpec::Orient { .. } => {}
    }
    ctx.started = true;
    Ok(())
}

fn check_articulated(kind: ActionKind, id: &str, g: &JointGeometry) -> Result<(), ManipError> {
    match (kind, g) {
        (ActionKind::OpenDoor | ActionKind::CloseDoor, JointGeometry::Hinge { .. }) => Ok(()),
        (ActionKind::OpenDrawer | ActionKind::CloseDrawer, JointGeometry::Slide { .. }) => Ok(()),
        (ActionKind::OpenDoor | ActionKind::CloseDoor, _) => Err(ManipError::WrongJoint(id.into(), "hinge")),
        _ => Err(ManipError::WrongJoint(id.into(), "slide")),
    }
}

fn enter_phase(fsm: &mut AtomicActionFSM, world: &WorldState, cfg: &ManipConfig) -> Result<(), ManipError> {
    fsm.ctx.phase_start_ee = world.agent.ee_pose;
    fsm.ctx.path_ticks = 0;
    let kind = fsm.kind();
    let ps = fsm.phase_spec();
    if ps.motion == Motion::Path {
        fsm.ctx.path_ticks = match kind {
            ActionKind::Pour => cfg.tilt_ticks,
            ActionKind::Shake => cfg.shake_half_cycle_ticks,
            ActionKind::Stir => {
                let revs = cfg.stir_revolutions + STIR_OVERSHOOT_REV;
                (revs / cfg.stir_rev_per_s / DT_S).ceil() as u32
            }
            _ => {
                let id = fsm.spec.targets()[0].to_string();
                let j = joint(world, &id)?;
                let steps = joint_steps(j, fsm.ctx.joint_target, cfg);
                let art = articulate(world, &id, fsm.ctx.joint_target, steps)?;
                let n = art.steps;
                fsm.ctx.art = Some(art);
                n
            }
        };
    }
    fsm.ctx.entered = true;
    Ok(())
}

fn is_done(fsm: &AtomicActionFSM, world: &WorldState, kp: Option<&Pose>, cfg: &ManipConfig) -> Result<bool, ManipError> {
    let ps = fsm.phase_spec();
    let ee = &world.agent.ee_pose;
    let at_kp = kp.is_some_and(|k| within(ee, k, cfg));
    let path_done = fsm.phase_ticks >= fsm.ctx.path_ticks;
    Ok(match ps.done {
        D::Pose => at_kp,
        D::Dwell => fsm.phase_ticks >= cfg.settle_ticks,
        D::Gripper => {
            let want = aperture_for(ps.gripper).unwrap_or(world.agent.gripper_target_m);
            world.agent.gripper_target_m == want && world.agent.gripper_aperture_m == want
        }
        D::PathPose => path_done && at_kp,
        D::Holding => {
            let h = &joint(world, fsm.spec.targets()[0])?.attached_object_id;
            world.agent.held_object_id.as_ref() == Some(h)
        }
        D::Pressed => joint(world, fsm.spec.targets()[0])?.activated && at_kp,
        D::JointAt => {
            let j = joint(world, fsm.spec.targets()[0])?;
            path_done && (j.value - fsm.ctx.joint_target).abs() <= cfg.joint_tol
        }
        D::SourceEmpty => fsm.phase_ticks >= cfg.settle_ticks && world.container_volume_ml(fsm.spec.targets()[0]) <= 1e-9,
        D::Always => true,
    })
}

/// Advances a phase machine by one tick and returns the action to apply.
///
/// A tick on which the current phase is already satisfied moves to the
/// next phase and emits a zero action.
pub fn fsm_tick(fsm: &mut AtomicActionFSM, world: &WorldState, cfg: &ManipConfig) -> Result<AgentAction, ManipError> {
    if fsm.complete {
        return Ok(AgentAction::zero());
    }
    if phases(fsm.kind()).is_empty() {
        return Err(ManipError::WrongJoint(fsm.kind().to_string(), "manipulation action"));
    }
    if !fsm.ctx.started {
        enter_action(fsm, world, cfg)?;
    }
    if !fsm.ctx.entered {
        enter_phase(fsm, world, cfg)?;
    }
    let kp = keypoint_for(fsm, world, cfg)?;
    if is_done(fsm, world, kp.as_ref(), cfg)? {
        fsm.phase += 1;
        fsm.phase_ticks = 0;
        fsm.ctx.entered = false;
        if fsm.phase >= phases(fsm.kind()).len() {
            fsm.phase = phases(fsm.kind()).len() - 1;
            fsm.complete = true;
        }
        return Ok(AgentAction::zero());
    }
    let ps = fsm.phase_spec();
    if fsm.phase_ticks >= cfg.phase_budget_ticks {
        return Err(ManipError::PhaseTimeout {
            action: fsm.kind(),
            phase: ps.index,
            label: ps.label.into(),
            budget: cfg.phase_budget_ticks,
        });
    }
    fsm.phase_ticks += 1;

    let ee = world.agent.ee_pose;
    let mut action = AgentAction::zero();
    if let (Some(k), false) = (&kp, ps.motion == Motion::Still) {
        let (lin, ang) = servo(&ee, k, cfg);
        action.ee_linear = lin;
        action.ee_angular = ang;
    }
    action.gripper = match ps.gripper {
        G::Keep => None,
        G::Open => Some(GripperCommand::Open),
        G::Close => Some(GripperCommand::Close),
        G::Set(a) => Some(GripperCommand::Set(a)),
        G::CloseOnArrival => {
            if kp.is_some_and(|k| within(&ee, &k, cfg)) {
                Some(GripperCommand::Close)
            } else {
                Some(GripperCommand::Open)
            }
        }
    };
    Ok(action)
}
