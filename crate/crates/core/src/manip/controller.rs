use serde::{Deserialize, Serialize};

use crate::bench::{Policy, PolicyStep};
use crate::nav::{build_occupancy, plan, Follower, INFLATION_RADIUS_M, NAV_CELL_M};
use crate::sim::Simulator;
use crate::traj::{state_hash, EpisodeFooter, EpisodeHeader, EpisodeRecord, FrameLabels, EPISODE_SCHEMA_VERSION};
use crate::world::{AgentAction, WorldState};

use super::fsm::{fsm_tick, AtomicActionFSM};
use super::keypoint::object;
use super::{ActionKind, ActionSpec, ManipConfig, ManipError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// The stage's target disappears as the stage starts.
    TargetLost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultInjection {
    /// Zero-based stage index.
    pub stage: usize,
    pub kind: FaultKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub action: ActionKind,
    pub completed: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
struct NavRunner {
    follower: Follower,
    ticks: u32,
}

#[derive(Clone, Debug)]
enum Runner {
    Fsm(AtomicActionFSM),
    Nav(NavRunner),
}

/// Runs a list of actions one after another, each to completion.
#[derive(Clone, Debug)]
pub struct TaskController {
    pub stages: Vec<ActionSpec>,
    pub cfg: ManipConfig,
    pub abort_on_failure: bool,
    pub fault: Option<FaultInjection>,
    active: usize,
    runner: Option<Runner>,
    outcomes: Vec<StageOutcome>,
    aborted: Option<String>,
}

impl TaskController {
    pub fn new(stages: Vec<ActionSpec>, cfg: ManipConfig) -> Self {
        TaskController {
            stages,
            cfg,
            abort_on_failure: true,
            fault: None,
            active: 0,
            runner: None,
            outcomes: Vec::new(),
            aborted: None,
        }
    }

    pub fn with_fault(mut self, fault: FaultInjection) -> Self {
        self.fault = Some(fault);
        self
    }

    pub fn active_stage(&self) -> usize {
        self.active
    }

    pub fn is_complete(&self) -> bool {
        self.active >= self.stages.len()
    }

    pub fn aborted(&self) -> Option<&str> {
        self.aborted.as_deref()
    }

    pub fn outcomes(&self) -> &[StageOutcome] {
        &self.outcomes
    }

    /// Current phase of the running manipulation action.
    pub fn fsm(&self) -> Option<&AtomicActionFSM> {
        match &self.runner {
            Some(Runner::Fsm(f)) => Some(f),
            _ => None,
        }
    }

    fn start(&self, world: &WorldState) -> Result<Runner, ManipError> {
        let spec = &self.stages[self.active];
        if let Some(f) = self.fault.filter(|f| f.stage == self.active) {
            match f.kind {
                FaultKind::TargetLost => {
                    let what = spec.targets().first().map(|s| s.to_string()).unwrap_or_else(|| "goal".into());
                    return Err(ManipError::TargetLost(what));
                }
            }
        }
        let base = || world.agent.base_pose.ok_or_else(|| ManipError::Unreachable("agent has a fixed base".into()));
        Ok(match spec {
            ActionSpec::Navigate { goal } => {
                let b = base()?;
                let grid = build_occupancy(world, NAV_CELL_M).map_err(|e| ManipError::Unreachable(e.to_string()))?;
                let path = plan(&grid, [b.x, b.y], *goal, INFLATION_RADIUS_M).map_err(|e| ManipError::Unreachable(e.to_string()))?;
                Runner::Nav(NavRunner { follower: Follower::new(path.waypoints, None), ticks: 0 })
            }
            ActionSpec::Orient { toward } => {
                let b = base()?;
                let p = object(world, toward)?.pose.position;
                let heading = (p.y - b.y).atan2(p.x - b.x);
                Runner::Nav(NavRunner { follower: Follower::new(Vec::new(), Some(heading)), ticks: 0 })
            }
            other => Runner::Fsm(AtomicActionFSM::new(other.clone())),
        })
    }

    fn tick_runner(&mut self, world: &WorldState) -> Result<(AgentAction, bool), ManipError> {
        if self.runner.is_none() {
            self.runner = Some(self.start(world)?);
        }
        match self.runner.as_mut().unwrap() {
            Runner::Fsm(f) => {
                let a = fsm_tick(f, world, &self.cfg)?;
                Ok((a, f.complete))
            }
            Runner::Nav(n) => {
                let base = world.agent.base_pose.ok_or_else(|| ManipError::Unreachable("agent has a fixed base".into()))?;
                let cmd = n.follower.command(&base);
                if n.follower.done(&base) {
                    return Ok((AgentAction::zero(), true));
                }
                if n.ticks >= self.cfg.nav_budget_ticks {
                    return Err(ManipError::PhaseTimeout {
                        action: self.stages[self.active].kind(),
                        phase: 0,
                        label: "drive".into(),
                        budget: self.cfg.nav_budget_ticks,
                    });
                }
                n.ticks += 1;
                Ok((AgentAction { base: cmd, ..AgentAction::zero() }, false))
            }
        }
    }

    fn label(&self) -> Option<String> {
        match &self.runner {
            Some(Runner::Fsm(f)) => Some(f.phase_label()),
            Some(Runner::Nav(_)) => Some(format!("{}:0:drive", self.stages[self.active].kind())),
            None => None,
        }
    }

    /// Produces the next action. Stage `k` starts only once stage `k-1`
    /// has completed or been given up on.
    pub fn step(&mut self, world: &WorldState) -> PolicyStep {
        if let Some(r) = &self.aborted {
            return PolicyStep { aborted: Some(r.clone()), ..PolicyStep::idle() };
        }
        if self.is_complete() {
            let mut s = PolicyStep::idle();
            s.labels.final_stage_done = true;
            s.labels.stage = self.stages.len().checked_sub(1);
            return s;
        }
        let stage = self.active;
        match self.tick_runner(world) {
            Ok((action, done)) => {
                let phase = self.label();
                if done {
                    self.outcomes.push(StageOutcome { action: self.stages[stage].kind(), completed: true, error: None });
                    self.active += 1;
                    self.runner = None;
                }
                PolicyStep {
                    action,
                    labels: FrameLabels { phase, stage: Some(stage), final_stage_done: self.is_complete() },
                    aborted: None,
                }
            }
            Err(e) => {
                let msg = format!("stage {stage} ({}): {e}", self.stages[stage].kind());
                self.outcomes.push(StageOutcome { action: self.stages[stage].kind(), completed: false, error: Some(e.to_string()) });
                self.runner = None;
                if self.abort_on_failure {
                    for s in &self.stages[stage + 1..] {
                        self.outcomes.push(StageOutcome { action: s.kind(), completed: false, error: Some("not started".into()) });
                    }
                    self.active = self.stages.len();
                    self.aborted = Some(msg.clone());
                    return PolicyStep { aborted: Some(msg), ..PolicyStep::idle() };
                }
                self.active += 1;
                let mut s = PolicyStep::idle();
                s.labels.stage = Some(stage);
                s.labels.final_stage_done = self.is_complete();
                s
            }
        }
    }
}

impl Policy for TaskController {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn act(&mut self, world: &WorldState) -> PolicyStep {
        self.step(world)
    }
}

/// Drives `sim` with the controller until every stage is done, it aborts,
/// or `max_ticks` pass. The footer's success flag means "all stages
/// completed"; task goals are judged by the bench harness.
pub fn run_task(
    ctrl: &mut TaskController,
    mut sim: Simulator,
    task_id: &str,
    seed: u64,
    max_ticks: u64,
) -> Result<(WorldState, EpisodeRecord, Vec<StageOutcome>), ManipError> {
    let header = EpisodeHeader {
        schema_version: EPISODE_SCHEMA_VERSION,
        task_id: task_id.into(),
        seed,
        split: None,
        policy: ctrl.name(),
        dt_s: sim.world.dt_s,
        reaction_rules: None,
        scene: sim.world.clone(),
    };
    let mut rec = EpisodeRecord::new(header);
    let mut failure = None;
    for _ in 0..max_ticks {
        if ctrl.is_complete() {
            break;
        }
        let step = ctrl.step(&sim.world);
        if let Some(r) = step.aborted {
            failure = Some(r);
            break;
        }
        let mark = sim.world.event_log.len();
        sim.step(&step.action)?;
        rec.push(&sim.world, step.action, step.labels, mark);
    }
    if failure.is_none() && !ctrl.is_complete() {
        failure = Some(format!("time limit of {max_ticks} ticks"));
    }
    let outcomes = ctrl.outcomes().to_vec();
    rec.finish(EpisodeFooter {
        success: failure.is_none() && outcomes.iter().all(|o| o.completed),
        ticks_used: rec.frames.len() as u64,
        stage_outcomes: outcomes.iter().map(|o| o.completed).collect(),
        failure_reason: failure,
        final_state_sha256: state_hash(&sim.world),
    });
    Ok((sim.world, rec, outcomes))
}
