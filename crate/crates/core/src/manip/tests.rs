use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;

use super::keypoint::stir_point;
use super::*;
use crate::bench::{builtin_db, TaskRegistry};
use crate::geom::{Pose, Quat, Vec3};
use crate::sim::Simulator;
use crate::world::{AgentAction, EventKind, ObjectState, TiltSide, WorldState};

fn beaker_at(p: Vec3) -> WorldState {
    let mut w = WorldState::new(0);
    w.add_object(ObjectState::new("b", "beaker", p, Vec3::new(0.03, 0.03, 0.05)));
    w
}

fn task_world(id: &str, seed: u64) -> (WorldState, Vec<ActionSpec>) {
    let t = TaskRegistry::builtin().get(id).unwrap().clone();
    let inst = t.instantiate(seed, builtin_db()).unwrap();
    (inst.world, inst.stages.into_iter().map(|s| s.action).collect())
}

/// Runs `ctrl` to completion and returns the final world plus every
/// frame's phase label.
fn drive(ctrl: &mut TaskController, world: WorldState) -> (WorldState, Vec<Option<String>>, Vec<Option<usize>>) {
    let mut sim = Simulator::with_builtin_rules(world);
    let (mut labels, mut stages) = (Vec::new(), Vec::new());
    for _ in 0..20_000 {
        if ctrl.is_complete() {
            break;
        }
        let s = ctrl.step(&sim.world);
        if s.aborted.is_some() {
            break;
        }
        sim.step(&s.action).unwrap();
        labels.push(s.labels.phase);
        stages.push(s.labels.stage);
    }
    (sim.world, labels, stages)
}

#[test]
fn pick_phase0_keypoint_is_above_the_object() {
    let w = beaker_at(Vec3::new(1.0, 2.0, 0.8));
    let fsm = AtomicActionFSM::new(ActionSpec::Pick { object: "b".into() });
    let kp = keypoint_for(&fsm, &w, &ManipConfig::default()).unwrap().unwrap();
    assert!((kp.position - Vec3::new(1.0, 2.0, 0.95)).norm() < 1e-12);
    assert!(kp.orientation.angle_to(Quat::DOWN) < 1e-9);
}

#[test]
fn ee_at_keypoint_advances_with_zero_action() {
    let mut w = beaker_at(Vec3::new(0.5, 0.0, 0.85));
    let cfg = ManipConfig::default();
    let mut fsm = AtomicActionFSM::new(ActionSpec::Pick { object: "b".into() });
    w.agent.ee_pose = keypoint_for(&fsm, &w, &cfg).unwrap().unwrap();
    let a = fsm_tick(&mut fsm, &w, &cfg).unwrap();
    assert_eq!(a, AgentAction::zero());
    assert_eq!(fsm.phase, 1);
}

#[test]
fn press_phase0_is_offset_along_the_normal() {
    let (w, _) = task_world("press", 0);
    let fsm = AtomicActionFSM::new(ActionSpec::Press { button: "heater_btn".into() });
    let kp = keypoint_for(&fsm, &w, &ManipConfig::default()).unwrap().unwrap();
    let crate::world::JointGeometry::Button { rest, normal, .. } = w.joints["heater_btn"].geometry else { panic!() };
    assert!((kp.position - (rest + normal * 0.05)).norm() < 1e-12);
}

#[test]
fn stir_circle_starts_on_the_x_axis() {
    let insert = Vec3::new(0.4, -0.2, 0.83);
    assert_eq!(stir_point(insert, 0.0175, 0.0), insert + Vec3::X * 0.0175);
}

#[test]
fn closed_loop_pick_ends_lifted_in_phase_6() {
    let mut w = beaker_at(Vec3::new(0.5, 0.1, 0.05));
    w.agent.ee_pose = Pose::new(Vec3::new(0.3, 0.0, 0.6), Quat::DOWN);
    let rest = w.object("b").unwrap().pose.position.z;
    let mut ctrl = TaskController::new(vec![ActionSpec::Pick { object: "b".into() }], ManipConfig::default());
    let (w, labels, _) = drive(&mut ctrl, w);
    assert_eq!(ctrl.outcomes().len(), 1);
    assert!(ctrl.outcomes()[0].completed);
    assert_eq!(ctrl.fsm().map(|f| f.phase), None);
    assert_eq!(labels.last().unwrap().as_deref(), Some("pick:6:done"));
    assert_eq!(w.agent.held_object_id.as_deref(), Some("b"));
    assert!(w.object("b").unwrap().pose.position.z - rest > 0.2);
    // Phase indices never decrease.
    let idx: Vec<usize> = labels.iter().map(|l| l.as_ref().unwrap().split(':').nth(1).unwrap().parse().unwrap()).collect();
    assert!(idx.windows(2).all(|p| p[0] <= p[1]));
    assert_eq!(idx.first(), Some(&0));
}

#[test]
fn every_level1_action_completes() {
    for id in ["stir", "pick", "pour", "press", "place", "shake", "open_door", "close_door", "open_drawer", "close_drawer"] {
        for seed in 0..3 {
            let (w, stages) = task_world(id, seed);
            let mut ctrl = TaskController::new(stages, ManipConfig::default());
            drive(&mut ctrl, w);
            assert!(ctrl.outcomes().iter().all(|o| o.completed), "{id} seed {seed}: {:?}", ctrl.outcomes());
        }
    }
}

#[test]
fn shake_makes_three_left_right_cycles() {
    let (w, stages) = task_world("shake", 1);
    let mut ctrl = TaskController::new(stages, ManipConfig::default());
    let (w, _, _) = drive(&mut ctrl, w);
    let sides: Vec<TiltSide> = w
        .event_log
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::Tilted { side, .. } => Some(*side),
            _ => None,
        })
        .collect();
    use TiltSide::{Left, Right};
    assert_eq!(sides, [Left, Right, Left, Right, Left, Right]);
}

#[test]
fn articulation_sweeps() {
    let (w, _) = task_world("open_door", 0);
    let mut w = w;
    let handle = w.joints["door"].attached_object_id.clone();
    w.agent.held_object_id = Some(handle.clone());
    w.objects.get_mut(&handle).unwrap().held_by_agent = true;

    let tr = articulate(&w, "door", FRAC_PI_2, 90).unwrap();
    let v = tr.values();
    assert_eq!(v.len(), 91);
    for (k, x) in v.iter().enumerate() {
        assert!((x - (k as f64).to_radians()).abs() < 1e-12);
    }
    assert!(v.windows(2).all(|p| p[1] > p[0]));
    assert_eq!(*v.last().unwrap(), FRAC_PI_2);

    assert_eq!(articulate(&w, "door", 0.0, 90).unwrap().steps, 0);
    let j = &w.joints["door"];
    assert_eq!(joint_steps(j, j.value, &ManipConfig::default()), 0);
    // 90° at 0.75 rad/s and 60 Hz.
    assert_eq!(joint_steps(j, FRAC_PI_2, &ManipConfig::default()), 126);
}

#[test]
fn drawer_close_lands_on_zero() {
    let (mut w, _) = task_world("close_drawer", 0);
    let handle = w.joints["drawer"].attached_object_id.clone();
    w.agent.held_object_id = Some(handle.clone());
    w.objects.get_mut(&handle).unwrap().held_by_agent = true;
    assert_eq!(w.joints["drawer"].value, 0.3);
    let tr = articulate(&w, "drawer", -0.5, 7).unwrap();
    let v = tr.values();
    assert_eq!(*v.last().unwrap(), 0.0);
    assert!(v.iter().all(|&x| x >= 0.0));
    assert!(v.windows(2).all(|p| p[1] < p[0]));
}

#[test]
fn articulation_needs_the_handle() {
    let (w, _) = task_world("open_door", 0);
    assert!(matches!(articulate(&w, "door", 1.0, 10), Err(ManipError::NotHolding(_))));
    assert!(matches!(articulate(&w, "nope", 1.0, 10), Err(ManipError::TargetLost(_))));
}

#[test]
fn single_pick_stage_reports_success() {
    let (w, stages) = task_world("pick", 2);
    let mut ctrl = TaskController::new(stages, ManipConfig::default());
    let (_, rec, outcomes) = run_task(&mut ctrl, Simulator::with_builtin_rules(w), "pick", 2, 5000).unwrap();
    assert_eq!(outcomes.iter().map(|o| o.completed).collect::<Vec<_>>(), [true]);
    assert!(rec.success());
}

#[test]
fn target_lost_truncates_the_sequence() {
    let (w, stages) = task_world("clean_beaker", 0);
    assert_eq!(
        stages.iter().map(|s| s.kind()).collect::<Vec<_>>(),
        [ActionKind::Pick, ActionKind::Pour, ActionKind::Place, ActionKind::Pick, ActionKind::Shake, ActionKind::Pour, ActionKind::Place]
    );
    let mut ctrl = TaskController::new(stages, ManipConfig::default()).with_fault(FaultInjection { stage: 2, kind: FaultKind::TargetLost });
    let (_, _, stage_idx) = drive(&mut ctrl, w);
    let done: Vec<bool> = ctrl.outcomes().iter().map(|o| o.completed).collect();
    assert_eq!(done, [true, true, false, false, false, false, false]);
    assert!(ctrl.aborted().is_some());
    // Stage k only starts once stage k-1 is finished.
    let idx: Vec<usize> = stage_idx.into_iter().flatten().collect();
    assert!(idx.windows(2).all(|p| p[1] == p[0] || p[1] == p[0] + 1));
}

#[test]
fn navigate_without_mobile_base_fails_cleanly() {
    let w = beaker_at(Vec3::new(0.5, 0.0, 0.05));
    let mut ctrl = TaskController::new(vec![ActionSpec::Navigate { goal: [1.0, 1.0] }], ManipConfig::default());
    let s = ctrl.step(&w);
    assert!(s.aborted.unwrap().contains("fixed base"));
}

fn quat() -> impl Strategy<Value = Quat> {
    (-PI..PI, -1.0..1.0f64, 0.0..PI).prop_map(|(az, z, ang)| {
        let r = (1.0 - z * z).sqrt();
        Quat::from_axis_angle(Vec3::new(r * az.cos(), r * az.sin(), z), ang)
    })
}

proptest! {
    #[test]
    fn slerp_endpoints_and_norm(a in quat(), b in quat(), t in 0.0..1.0f64) {
        let s0 = Quat::slerp(a, b, 0.0);
        let s1 = Quat::slerp(a, b, 1.0);
        prop_assert!((s0.dot(a).abs() - 1.0).abs() < 1e-9);
        prop_assert!((s1.dot(b).abs() - 1.0).abs() < 1e-9);
        prop_assert!((Quat::slerp(a, b, t).norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn servo_never_exceeds_limits(dx in -2.0..2.0f64, dy in -2.0..2.0f64, dz in -2.0..2.0f64, q in quat()) {
        let cfg = ManipConfig::default();
        let ee = Pose::new(Vec3::new(0.5, 0.0, 1.0), Quat::DOWN);
        let kp = Pose::new(ee.position + Vec3::new(dx, dy, dz), q);
        let (lin, ang) = super::fsm::servo(&ee, &kp, &cfg);
        prop_assert!(lin.norm() <= crate::world::MAX_EE_SPEED_MPS + 1e-12);
        prop_assert!(ang.norm() <= PI + 1e-9);
    }
}
