use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::chem::{ReactionOracle, RuleTable, SubstanceDatabase};
use crate::manip::{FaultInjection, ManipConfig, TaskController};
use crate::sim::Simulator;
use crate::traj::{
    state_hash, write_dataset, DatasetManifest, EpisodeFooter, EpisodeHeader, EpisodeRecord, EPISODE_SCHEMA_VERSION,
};

use super::goal::{hold_ticks, HoldStatus, HoldWindow};
use super::task::{Split, TaskInstance, TaskSpec};
use super::{BenchError, NullPolicy, Policy, ReplayPolicy};

fn builtin_db_arc() -> &'static Arc<SubstanceDatabase> {
    static DB: OnceLock<Arc<SubstanceDatabase>> = OnceLock::new();
    DB.get_or_init(|| Arc::new(SubstanceDatabase::builtin()))
}

pub fn builtin_db() -> &'static SubstanceDatabase {
    builtin_db_arc()
}

pub fn builtin_rules() -> Arc<RuleTable> {
    static RULES: OnceLock<Arc<RuleTable>> = OnceLock::new();
    RULES.get_or_init(|| Arc::new(RuleTable::builtin(builtin_db()))).clone()
}

#[derive(Clone, Debug)]
pub enum PolicySource {
    Scripted,
    Null,
    Replay(Arc<EpisodeRecord>),
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub manip: ManipConfig,
    pub fault: Option<FaultInjection>,
    /// Keep the full episode record.
    pub record: bool,
    pub rules: Arc<RuleTable>,
    /// Substances used to fill task scenes.
    pub db: Arc<SubstanceDatabase>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { manip: ManipConfig::default(), fault: None, record: false, rules: builtin_rules(), db: builtin_db_arc().clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task_id: String,
    pub level: u8,
    pub split: Option<Split>,
    pub seed: u64,
    pub success: bool,
    pub ticks_used: u64,
    /// Whether each stage predicate was satisfied, in order.
    pub stage_outcomes: Vec<bool>,
    pub failure_reason: Option<String>,
    pub final_stage_done_tick: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct EpisodeRun {
    pub result: EpisodeResult,
    pub record: Option<EpisodeRecord>,
}

fn policy_for(source: &PolicySource, inst: &TaskInstance, opts: &RunOptions) -> Box<dyn Policy> {
    match source {
        PolicySource::Scripted => {
            let mut c = TaskController::new(inst.stages.iter().map(|s| s.action.clone()).collect(), opts.manip.clone());
            if let Some(f) = opts.fault {
                c = c.with_fault(f);
            }
            Box::new(c)
        }
        PolicySource::Null => Box::new(NullPolicy),
        PolicySource::Replay(r) => Box::new(ReplayPolicy::new((**r).clone())),
    }
}

/// Instantiates `task` for `seed` and runs one episode.
pub fn run_episode(task: &TaskSpec, seed: u64, source: &PolicySource, opts: &RunOptions) -> Result<EpisodeRun, BenchError> {
    let inst = task.instantiate(seed, &opts.db)?;
    let mut policy = policy_for(source, &inst, opts);
    Ok(run_instance(task, &inst, policy.as_mut(), opts))
}

/// Runs `policy` on a prepared instance.
///
/// Each tick, stage predicates are advanced in order on the current state,
/// then the policy acts. The hold window opens at the tick the policy
/// announces completion (or, for policies that never announce, the first
/// tick the goal holds) and the goal must hold on every state inside it.
pub fn run_instance(task: &TaskSpec, inst: &TaskInstance, policy: &mut dyn Policy, opts: &RunOptions) -> EpisodeRun {
    let initial = inst.world.clone();
    let t_start = initial.tick;
    let mut sim = Simulator::new(initial.clone(), Some(opts.rules.clone() as Arc<dyn ReactionOracle>));
    let hold_len = hold_ticks(task.hold_s, initial.dt_s).max(1);
    let mut rec = opts.record.then(|| {
        EpisodeRecord::new(EpisodeHeader {
            schema_version: EPISODE_SCHEMA_VERSION,
            task_id: task.id.clone(),
            seed: inst.seed,
            split: task.split.map(|s| s.to_string()),
            policy: policy.name(),
            dt_s: initial.dt_s,
            reaction_rules: Some((*opts.rules).clone()),
            scene: initial.clone(),
        })
    });
    let n = inst.stages.len();
    let mut stage_done = vec![false; n];
    let mut next_stage = 0;
    let mut window: Option<HoldWindow> = None;
    let failing = |w: &crate::world::WorldState| {
        inst.goal.failing(w, &initial).iter().map(|c| format!("{c:?}")).collect::<Vec<_>>().join(", ")
    };

    let verdict: Result<(), String> = loop {
        let t = sim.world.tick;
        while next_stage < n && inst.stages[next_stage].check.holds(&sim.world, &initial) {
            stage_done[next_stage] = true;
            next_stage += 1;
        }
        let goal_ok = inst.goal.holds(&sim.world, &initial);
        if window.is_none() && !policy.announces_completion() && goal_ok {
            window = Some(HoldWindow::new(t, hold_len));
        }
        if let Some(w) = window.as_mut() {
            match w.observe(t, goal_ok) {
                HoldStatus::Held => break Ok(()),
                HoldStatus::Broken { tick } => break Err(format!("goal stopped holding at tick {tick}: {}", failing(&sim.world))),
                HoldStatus::Pending => {}
            }
        } else if t - t_start >= task.time_limit_ticks {
            break Err(format!("time limit of {} ticks reached", task.time_limit_ticks));
        }
        let step = policy.act(&sim.world);
        if let Some(r) = step.aborted {
            break Err(r);
        }
        if window.is_none() && step.labels.final_stage_done {
            let mut w = HoldWindow::new(t, hold_len);
            match w.observe(t, goal_ok) {
                HoldStatus::Held => break Ok(()),
                HoldStatus::Broken { .. } => break Err(format!("goal not met at completion: {}", failing(&sim.world))),
                HoldStatus::Pending => window = Some(w),
            }
        }
        let mark = sim.world.event_log.len();
        if let Err(e) = sim.step(&step.action) {
            break Err(format!("simulation error: {e}"));
        }
        if let Some(r) = rec.as_mut() {
            r.push(&sim.world, step.action, step.labels, mark);
        }
    };

    let failure_reason = match verdict {
        Err(r) => Some(r),
        Ok(()) => inst
            .stages
            .iter()
            .zip(&stage_done)
            .find(|(_, d)| !**d)
            .map(|(s, _)| format!("stage `{}` never satisfied", s.label)),
    };
    let success = failure_reason.is_none();
    let ticks_used = sim.world.tick - t_start;
    if let Some(r) = rec.as_mut() {
        r.finish(EpisodeFooter {
            success,
            ticks_used,
            stage_outcomes: stage_done.clone(),
            failure_reason: failure_reason.clone(),
            final_state_sha256: state_hash(&sim.world),
        });
    }
    EpisodeRun {
        result: EpisodeResult {
            task_id: task.id.clone(),
            level: task.level,
            split: task.split,
            seed: inst.seed,
            success,
            ticks_used,
            stage_outcomes: stage_done,
            failure_reason,
            final_stage_done_tick: window.map(|w| w.start),
        },
        record: rec,
    }
}

/// Runs `seeds` on up to `workers` threads. Output order follows `seeds`
/// whatever the worker count.
pub fn run_batch(
    task: &TaskSpec,
    seeds: &[u64],
    source: &PolicySource,
    opts: &RunOptions,
    workers: usize,
) -> Vec<Result<EpisodeRun, BenchError>> {
    let slots: Vec<Mutex<Option<Result<EpisodeRun, BenchError>>>> = seeds.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, seeds.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&seed) = seeds.get(i) else { break };
                let r = run_episode(task, seed, source, opts);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("every slot filled")).collect()
}

/// Runs the scripted policy over `seeds` and writes the episodes and
/// `manifest.json` into `dir`. Seeds whose scene cannot be built count as
/// failures.
pub fn collect_batch(
    task: &TaskSpec,
    seeds: &[u64],
    opts: &RunOptions,
    workers: usize,
    dir: &Path,
    keep_failures: bool,
) -> Result<DatasetManifest, BenchError> {
    let opts = RunOptions { record: true, ..opts.clone() };
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (seed, r) in seeds.iter().zip(run_batch(task, seeds, &PolicySource::Scripted, &opts, workers)) {
        match r {
            Ok(run) => records.extend(run.record),
            Err(e) => errors.push(format!("{} seed {seed}: {e}", task.id)),
        }
    }
    let mut m = write_dataset(dir, &task.id, &records, keep_failures)?;
    if !errors.is_empty() {
        m.attempted += errors.len();
        m.failures += errors.len();
        m.failure_reasons.extend(errors);
        std::fs::write(dir.join("manifest.json"), m.to_json()).map_err(|e| BenchError::Io(e.to_string()))?;
    }
    Ok(m)
}
