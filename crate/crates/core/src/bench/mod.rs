//! Task registry, seeded instantiation, hold-rule evaluation and reports.

mod goal;
mod policy;
mod report;
mod run;
mod scenes;
mod task;

pub use goal::{
    evaluate_hold, hold_ticks, Condition, GoalPredicate, HoldStatus, HoldWindow, DEFAULT_HOLD_S, PICK_LIFT_BAR_M,
};
pub use policy::{NullPolicy, Policy, PolicyStep, ReplayPolicy};
pub use report::{aggregate, BenchReport, TaskSummary, STAGE_COLUMNS};
pub use run::{
    builtin_db, builtin_rules, collect_batch, run_batch, run_episode, run_instance, EpisodeResult, EpisodeRun,
    PolicySource, RunOptions,
};
pub use scenes::{
    build_scene, container_variant, variant_tags, ContainerVariant, FillSpec, Item, SceneInstance, SceneRecipe,
    BENCH_MAX, BENCH_MIN, BENCH_TOP_Z, DEFAULT_CONTAINER,
};
pub use task::{Split, Stage, StageTemplate, TaskInstance, TaskRegistry, TaskSpec, TASKS_JSON};

use crate::scene::SceneError;
use crate::traj::TrajError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task `{id}`: {reason}")]
    InvalidTask { id: String, reason: String },
    #[error("tasks file: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Traj(#[from] TrajError),
}
