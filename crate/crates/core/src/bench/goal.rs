//! Goal and stage predicates: conjunctions of atomic world conditions.

use serde::{Deserialize, Serialize};

use crate::world::{EventKind, WorldState};

/// Height an object must be raised by to count as picked.
pub const PICK_LIFT_BAR_M: f64 = 0.20;
/// Default continuous-hold duration.
pub const DEFAULT_HOLD_S: f64 = 2.0;

fn upright_default() -> f64 {
    10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cond", rename_all = "snake_case")]
pub enum Condition {
    Held { object: String },
    NotHeld { object: String },
    /// Object centre more than `min_m` above where it would rest.
    Lifted { object: String, min_m: f64 },
    Upright {
        object: String,
        #[serde(default = "upright_default")]
        tol_deg: f64,
    },
    /// Free, upright and sitting on its support.
    Resting { object: String },
    AtXy { object: String, at: [f64; 2], tol_m: f64 },
    /// `target` gained at least `frac` of `source`'s starting volume.
    Received { target: String, source: String, frac: f64 },
    /// At most `max_frac` of the starting volume is left.
    Emptied { container: String, max_frac: f64 },
    NoSpill {
        #[serde(default)]
        max_ml: f64,
    },
    JointAbove { joint: String, min: f64 },
    JointBelow { joint: String, max: f64 },
    ButtonPressed { joint: String },
    TiltCount { object: String, min: usize },
    StirCount { rod: String, container: String, min: u32 },
    /// Lowest point of `object` is above `container`'s rim.
    Above { object: String, container: String },
    HasSubstance { container: String, substance: String, min_mol: f64 },
    Lacks { container: String, substance: String },
    /// Mobile base centre within `tol_m` of `at`.
    BaseAt { at: [f64; 2], tol_m: f64 },
    /// Mobile base heading points at `object` within `tol_deg`.
    BaseFacing { object: String, tol_deg: f64 },
    /// None of these event kinds (by serde tag) ever happened.
    NoEvents { kinds: Vec<String> },
}

fn event_tag(e: &EventKind) -> String {
    serde_json::to_value(e)
        .ok()
        .and_then(|v| v.get("event").and_then(|t| t.as_str()).map(str::to_owned))
        .unwrap_or_default()
}

impl Condition {
    /// Whether the condition holds in `world`; `initial` is the episode's
    /// tick-0 state.
    pub fn holds(&self, world: &WorldState, initial: &WorldState) -> bool {
        let obj = |id: &str| world.object(id);
        match self {
            Condition::Held { object } => world.agent.held_object_id.as_deref() == Some(object.as_str()),
            Condition::NotHeld { object } => {
                world.agent.held_object_id.as_deref() != Some(object.as_str()) && obj(object).is_some()
            }
            Condition::Lifted { object, min_m } => obj(object)
                .zip(world.rest_height(object))
                .is_some_and(|(o, rest)| o.pose.position.z - rest > *min_m),
            Condition::Upright { object, tol_deg } => {
                obj(object).is_some_and(|o| !o.toppled && o.pose.orientation.tilt() <= tol_deg.to_radians())
            }
            Condition::Resting { object } => obj(object).is_some_and(|o| {
                !o.held_by_agent
                    && !o.toppled
                    && world.rest_height(object).is_some_and(|r| (o.pose.position.z - r).abs() <= 1e-9)
            }),
            Condition::AtXy { object, at, tol_m } => obj(object)
                .is_some_and(|o| (o.pose.position.x - at[0]).hypot(o.pose.position.y - at[1]) <= *tol_m),
            Condition::Received { target, source, frac } => {
                let gained = world.container_volume_ml(target) - initial.container_volume_ml(target);
                gained >= frac * initial.container_volume_ml(source) - 1e-9
            }
            Condition::Emptied { container, max_frac } => {
                world.container_volume_ml(container) <= max_frac * initial.container_volume_ml(container) + 1e-9
            }
            Condition::NoSpill { max_ml } => world.spilled_ml <= *max_ml,
            Condition::JointAbove { joint, min } => world.joints.get(joint).is_some_and(|j| j.value >= *min),
            Condition::JointBelow { joint, max } => world.joints.get(joint).is_some_and(|j| j.value <= *max),
            // Buttons latch once pressed past their activation depth.
            Condition::ButtonPressed { joint } => world
                .joints
                .get(joint)
                .is_some_and(|j| matches!(j.geometry, crate::world::JointGeometry::Button { .. }) && j.activated),
            Condition::BaseAt { at, tol_m } => {
                world.agent.base_pose.is_some_and(|b| (b.x - at[0]).hypot(b.y - at[1]) <= *tol_m)
            }
            Condition::BaseFacing { object, tol_deg } => {
                let (Some(b), Some(o)) = (world.agent.base_pose, obj(object)) else { return false };
                let h = (o.pose.position.y - b.y).atan2(o.pose.position.x - b.x);
                crate::geom::wrap_angle(h - b.yaw).abs() <= tol_deg.to_radians()
            }
            Condition::TiltCount { object, min } => {
                world
                    .event_log
                    .iter()
                    .filter(|e| matches!(&e.kind, EventKind::Tilted { object: o, .. } if o == object))
                    .count()
                    >= *min
            }
            Condition::StirCount { rod, container, min } => world.event_log.iter().any(|e| {
                matches!(&e.kind, EventKind::StirRevolution { object, container: c, count }
                    if object == rod && c == container && count >= min)
            }),
            Condition::Above { object, container } => {
                let (Some(o), Some(m)) = (obj(object), world.mouth_center(container)) else { return false };
                let (lo, _) = o.world_aabb();
                lo.z > m.z
            }
            Condition::HasSubstance { container, substance, min_mol } => {
                world.containers.get(container).is_some_and(|c| c.contents.amount(substance) >= *min_mol)
            }
            Condition::Lacks { container, substance } => {
                world.containers.get(container).is_some_and(|c| c.contents.amount(substance) == 0.0)
            }
            Condition::NoEvents { kinds } => !world.event_log.iter().any(|e| kinds.contains(&event_tag(&e.kind))),
        }
    }
}

/// Conjunction of conditions. Pure and linear in the state size.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GoalPredicate {
    pub all: Vec<Condition>,
}

impl GoalPredicate {
    pub fn new(all: Vec<Condition>) -> Self {
        GoalPredicate { all }
    }

    pub fn holds(&self, world: &WorldState, initial: &WorldState) -> bool {
        self.all.iter().all(|c| c.holds(world, initial))
    }

    /// Conditions that do not hold, for failure reports.
    pub fn failing(&self, world: &WorldState, initial: &WorldState) -> Vec<&Condition> {
        self.all.iter().filter(|c| !c.holds(world, initial)).collect()
    }
}

/// Ticks in a hold window of `hold_s` at step `dt_s`.
pub fn hold_ticks(hold_s: f64, dt_s: f64) -> u64 {
    (hold_s / dt_s - 1e-9).ceil() as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HoldStatus {
    Pending,
    Held,
    Broken { tick: u64 },
}

/// Tracks the continuous-hold rule over ticks `[start, start + len)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HoldWindow {
    pub start: u64,
    pub len: u64,
    seen: u64,
    broken: Option<u64>,
}

impl HoldWindow {
    pub fn new(start: u64, len: u64) -> Self {
        HoldWindow { start, len, seen: 0, broken: None }
    }

    /// Feeds the goal value at `tick`. Ticks must arrive in order; ticks
    /// outside the window are ignored.
    pub fn observe(&mut self, tick: u64, ok: bool) -> HoldStatus {
        if self.broken.is_none() && tick >= self.start && tick < self.start + self.len && tick == self.start + self.seen {
            if ok {
                self.seen += 1;
            } else {
                self.broken = Some(tick);
            }
        }
        self.status()
    }

    pub fn status(&self) -> HoldStatus {
        match self.broken {
            Some(tick) => HoldStatus::Broken { tick },
            None if self.seen >= self.len => HoldStatus::Held,
            None => HoldStatus::Pending,
        }
    }
}

/// Hold-rule verdict over a recorded state stream: the goal must hold at
/// every tick of `[done_tick, done_tick + ⌈hold_s/dt⌉)`, and the stream
/// must cover the whole window.
pub fn evaluate_hold<'a>(
    stream: impl IntoIterator<Item = &'a WorldState>,
    goal: &GoalPredicate,
    initial: &WorldState,
    hold_s: f64,
    done_tick: u64,
) -> bool {
    let mut win = HoldWindow::new(done_tick, hold_ticks(hold_s, initial.dt_s));
    for w in stream {
        if let HoldStatus::Broken { .. } = win.observe(w.tick, goal.holds(w, initial)) {
            return false;
        }
    }
    win.status() == HoldStatus::Held
}
