use serde::{Deserialize, Serialize};

use crate::geom::{Pose, Quat};
use crate::world::{JointKind, JointState, WorldState, DT_S};

use super::{ManipConfig, ManipError};

/// Straight-line sweep of a joint value with the handle orientation slerped
/// between its endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArticulationTrajectory {
    pub joint_id: String,
    pub start_value: f64,
    pub target_value: f64,
    pub steps: u32,
    pub start_orientation: Quat,
    pub end_orientation: Quat,
}

impl ArticulationTrajectory {
    /// Joint value after `k` steps. The last step lands exactly on target.
    pub fn value_at(&self, k: u32) -> f64 {
        if k >= self.steps {
            return self.target_value;
        }
        self.start_value + (self.target_value - self.start_value) * (k as f64 / self.steps as f64)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.value_at(k)).collect()
    }

    pub fn handle_pose_at(&self, joint: &JointState, k: u32) -> Pose {
        let t = if self.steps == 0 { 1.0 } else { k as f64 / self.steps as f64 };
        Pose::new(
            joint.handle_pose(self.value_at(k)).position,
            Quat::slerp(self.start_orientation, self.end_orientation, t),
        )
    }
}

/// Steps needed to sweep to `target` at the configured joint rate.
pub fn joint_steps(joint: &JointState, target: f64, cfg: &ManipConfig) -> u32 {
    let rate = match joint.kind {
        JointKind::Revolute => cfg.hinge_rate_rad_s,
        JointKind::Prismatic => cfg.slide_rate_m_s,
    };
    ((joint.clamp(target) - joint.value).abs() / (rate * DT_S)).ceil() as u32
}

/// Trajectory for a joint whose handle the agent is holding.
pub fn articulate(world: &WorldState, joint_id: &str, target: f64, steps: u32) -> Result<ArticulationTrajectory, ManipError> {
    let j = world.joints.get(joint_id).ok_or_else(|| ManipError::TargetLost(joint_id.into()))?;
    if world.agent.held_object_id.as_deref() != Some(j.attached_object_id.as_str()) {
        return Err(ManipError::NotHolding(j.attached_object_id.clone()));
    }
    let target = j.clamp(target);
    let steps = if target == j.value { 0 } else { steps.max(1) };
    Ok(ArticulationTrajectory {
        joint_id: joint_id.into(),
        start_value: j.value,
        target_value: target,
        steps,
        start_orientation: j.handle_pose(j.value).orientation,
        end_orientation: j.handle_pose(target).orientation,
    })
}
