use crate::traj::{EpisodeRecord, FrameLabels};
use crate::world::{AgentAction, WorldState};

/// What a policy produced for one tick.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolicyStep {
    pub action: AgentAction,
    pub labels: FrameLabels,
    /// Set when the policy gave up; the episode ends as a failure.
    pub aborted: Option<String>,
}

impl PolicyStep {
    pub fn idle() -> Self {
        PolicyStep { action: AgentAction::zero(), ..Default::default() }
    }
}

/// Maps the symbolic world state to an action each tick.
pub trait Policy {
    fn name(&self) -> String;

    fn act(&mut self, world: &WorldState) -> PolicyStep;

    /// Whether the policy announces completion of its final stage. Episodes
    /// of policies that do not start the hold window at the first tick the
    /// goal holds.
    fn announces_completion(&self) -> bool {
        true
    }
}

/// Does nothing, forever.
#[derive(Clone, Debug, Default)]
pub struct NullPolicy;

impl Policy for NullPolicy {
    fn name(&self) -> String {
        "null".into()
    }

    fn act(&mut self, _: &WorldState) -> PolicyStep {
        PolicyStep::idle()
    }

    fn announces_completion(&self) -> bool {
        false
    }
}

/// Plays back the actions and labels of a recorded episode.
#[derive(Clone, Debug)]
pub struct ReplayPolicy {
    record: EpisodeRecord,
    next: usize,
}

impl ReplayPolicy {
    pub fn new(record: EpisodeRecord) -> Self {
        ReplayPolicy { record, next: 0 }
    }
}

impl Policy for ReplayPolicy {
    fn name(&self) -> String {
        format!("replay:{}#{}", self.record.header.task_id, self.record.header.seed)
    }

    fn act(&mut self, _: &WorldState) -> PolicyStep {
        let Some(f) = self.record.frames.get(self.next) else {
            return PolicyStep { aborted: Some("recording exhausted".into()), ..PolicyStep::idle() };
        };
        self.next += 1;
        PolicyStep {
            action: f.action,
            labels: FrameLabels { phase: f.phase.clone(), stage: f.stage, final_stage_done: f.final_stage_done },
            aborted: None,
        }
    }
}
