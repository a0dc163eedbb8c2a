use std::f64::consts::TAU;

use crate::geom::{Pose, Quat, Vec3};
use crate::world::{JointState, ObjectState, WorldState};

use super::fsm::{AtomicActionFSM, Motion};
use super::{ActionSpec, ManipConfig, ManipError};

/// Extra stirring past the requested revolutions, so a lagging tip still
/// completes the last one.
pub(crate) const STIR_OVERSHOOT_REV: f64 = 0.1;

pub(crate) fn object<'a>(world: &'a WorldState, id: &str) -> Result<&'a ObjectState, ManipError> {
    world.object(id).ok_or_else(|| ManipError::TargetLost(id.into()))
}

pub(crate) fn joint<'a>(world: &'a WorldState, id: &str) -> Result<&'a JointState, ManipError> {
    world.joints.get(id).ok_or_else(|| ManipError::TargetLost(id.into()))
}

pub(crate) fn held_object<'a>(world: &'a WorldState, id: &str) -> Result<&'a ObjectState, ManipError> {
    let o = object(world, id)?;
    if world.agent.held_object_id.as_deref() != Some(id) {
        return Err(ManipError::NotHolding(id.into()));
    }
    Ok(o)
}

/// End-effector pose that puts the held object at `obj`.
fn ee_for(world: &WorldState, id: &str, obj: Pose) -> Result<Pose, ManipError> {
    held_object(world, id)?;
    let off = world.agent.grasp_offset.ok_or_else(|| ManipError::NotHolding(id.into()))?;
    Ok(obj.compose(&off.inverse()))
}

fn top_down(yaw: f64) -> Quat {
    Quat::from_yaw(yaw) * Quat::DOWN
}

/// Pose of a container tilted by `theta` toward `dir` about its lip, with
/// the lip at `lip`.
fn pour_pose(world: &WorldState, src: &str, upright: Quat, dir: Vec3, lip: Vec3, theta: f64) -> Result<Pose, ManipError> {
    let o = object(world, src)?;
    let c = world.containers.get(src).ok_or_else(|| ManipError::TargetLost(src.into()))?;
    let rot = Quat::from_axis_angle(Vec3::Z.cross(dir), theta);
    let lip_body = Vec3::Z * (c.rim_height_m - o.aabb_half_extents.z) + dir * c.mouth_radius_m;
    Ok(Pose::new(lip - rot.rotate(lip_body), (rot * upright).normalized()))
}

/// Target end-effector pose for the current phase, or `None` when the
/// phase does not move the arm.
/// Rod tip on the stirring circle at angle `phi` from +x.
pub(crate) fn stir_point(insert: Vec3, radius: f64, phi: f64) -> Vec3 {
    insert + Vec3::new(phi.cos(), phi.sin(), 0.0) * radius
}

pub fn keypoint_for(fsm: &AtomicActionFSM, world: &WorldState, cfg: &ManipConfig) -> Result<Option<Pose>, ManipError> {
    let ps = fsm.phase_spec();
    if ps.motion == Motion::Still {
        return Ok(None);
    }
    let ctx = &fsm.ctx;
    let phase = fsm.phase;
    // Path progress in [0, 1] for the tick about to be taken.
    let s = if ctx.path_ticks == 0 { 1.0 } else { ((fsm.phase_ticks + 1) as f64 / ctx.path_ticks as f64).min(1.0) };
    let start = ctx.phase_start_ee;

    let kp = match &fsm.spec {
        ActionSpec::Pick { object: id } => {
            let o = object(world, id)?;
            let q = top_down(o.pose.orientation.yaw());
            let g = o.pose.position;
            match phase {
                0 => Pose::new(g + Vec3::Z * cfg.approach_height_m, q),
                1 => Pose::new(g + Vec3::Z * cfg.pregrasp_height_m, q),
                2 => Pose::new(g, q),
                _ => Pose::new(start.position + Vec3::Z * cfg.lift_height_m, start.orientation),
            }
        }
        ActionSpec::Pour { source, target } => {
            let mouth = world.mouth_center(target).ok_or_else(|| ManipError::TargetLost(target.clone()))?;
            let rim = world.containers.get(source).ok_or_else(|| ManipError::TargetLost(source.clone()))?.rim_height_m;
            let ready = mouth + Vec3::Z * (rim + cfg.pour_clearance_m);
            let (lip, theta) = match phase {
                0 => (ready + Vec3::Z * cfg.approach_height_m, 0.0),
                1 => (ready, 0.0),
                2 => (ready, s * cfg.pour_tilt_rad),
                3 => (ready, cfg.pour_tilt_rad),
                _ => (ready, (1.0 - s) * cfg.pour_tilt_rad),
            };
            let obj = pour_pose(world, source, ctx.upright, ctx.dir, lip, theta)?;
            ee_for(world, source, obj)?
        }
        ActionSpec::Place { object: id, at } => {
            let z = match phase {
                0 => ctx.travel_z,
                1 => ctx.rest_z + cfg.pregrasp_height_m,
                2 => ctx.rest_z + cfg.place_clearance_m,
                _ => return Ok(Some(Pose::new(start.position + Vec3::Z * cfg.approach_height_m, start.orientation))),
            };
            ee_for(world, id, Pose::new(Vec3::new(at[0], at[1], z), ctx.upright))?
        }
        ActionSpec::Press { button } => {
            let j = joint(world, button)?;
            let crate::world::JointGeometry::Button { rest, normal, .. } = j.geometry else {
                return Err(ManipError::WrongJoint(button.clone(), "button"));
            };
            let p = if phase == 0 { rest + normal * cfg.press_offset_m } else { rest - normal * cfg.press_depth_m };
            Pose::new(p, ctx.upright)
        }
        ActionSpec::Shake { object: id } => {
            let left = Quat::from_axis_angle(Vec3::Y, -cfg.shake_angle_rad) * ctx.upright;
            let right = Quat::from_axis_angle(Vec3::Y, cfg.shake_angle_rad) * ctx.upright;
            let q = match phase {
                2..=7 => {
                    let to = if phase % 2 == 0 { left } else { right };
                    let from = match phase {
                        2 => ctx.upright,
                        _ if phase % 2 == 0 => right,
                        _ => left,
                    };
                    Quat::slerp(from, to, s)
                }
                _ => ctx.upright,
            };
            ee_for(world, id, Pose::new(ctx.anchor, q))?
        }
        ActionSpec::Stir { rod, container } => {
            let r = object(world, rod)?;
            let c = world.containers.get(container).ok_or_else(|| ManipError::TargetLost(container.clone()))?;
            let co = object(world, container)?;
            let rim_z = co.pose.position.z - co.aabb_half_extents.z + c.rim_height_m;
            let axis = Vec3::new(co.pose.position.x, co.pose.position.y, rim_z);
            let insert = Vec3::new(axis.x, axis.y, rim_z - cfg.stir_depth_frac * c.rim_height_m);
            let radius = cfg.stir_radius_frac * c.mouth_radius_m;
            let tip = match phase {
                0 => {
                    let center = ctx.anchor + Vec3::Z * cfg.pregrasp_height_m;
                    return Ok(Some(ee_for(world, rod, Pose::new(center, ctx.upright))?));
                }
                1 | 4 => axis + Vec3::Z * cfg.pregrasp_height_m,
                2 => insert,
                _ => {
                    stir_point(insert, radius, s * TAU * (cfg.stir_revolutions + STIR_OVERSHOOT_REV))
                }
            };
            let center = tip + Vec3::Z * r.aabb_half_extents.z;
            ee_for(world, rod, Pose::new(center, ctx.upright))?
        }
        ActionSpec::OpenDoor { joint: id, .. }
        | ActionSpec::OpenDrawer { joint: id, .. }
        | ActionSpec::CloseDoor { joint: id }
        | ActionSpec::CloseDrawer { joint: id } => {
            let j = joint(world, id)?;
            let handle = &j.attached_object_id;
            let opening = matches!(fsm.spec, ActionSpec::OpenDoor { .. } | ActionSpec::OpenDrawer { .. });
            match (opening, phase) {
                (_, 0) => {
                    let h = object(world, handle)?.pose;
                    Pose::new(h.position, top_down(h.orientation.yaw()))
                }
                (true, 3) => ee_for(world, handle, j.handle_pose(ctx.joint_target))?,
                _ => {
                    let art = ctx.art.as_ref().ok_or_else(|| ManipError::NotHolding(handle.clone()))?;
                    let k = ((s * art.steps as f64).round() as u32).min(art.steps);
                    ee_for(world, handle, art.handle_pose_at(j, k))?
                }
            }
        }
        ActionSpec::Navigate { .. } | ActionSpec::Orient { .. } => return Ok(None),
    };
    Ok(Some(kp))
}
