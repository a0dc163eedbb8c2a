//! Episode recording, JSON-lines persistence, replay and dataset manifests.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chem::RuleTable;
use crate::geom::Pose;
use crate::sim::Simulator;
use crate::world::{AgentAction, EventKind, WorldError, WorldState};

pub const EPISODE_SCHEMA_VERSION: u32 = 1;
pub const GENERATOR_VERSION: &str = concat!("labsim ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajError {
    #[error("i/o: {0}")]
    Io(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported episode schema {0}")]
    Schema(u32),
    #[error("replay diverged at tick {tick} (frame {frame}): {detail}")]
    ReplayDivergence { frame: usize, tick: u64, detail: String },
    #[error("hash mismatch for {file}")]
    HashMismatch { file: String },
    #[error(transparent)]
    World(#[from] WorldError),
}

impl From<std::io::Error> for TrajError {
    fn from(e: std::io::Error) -> Self {
        TrajError::Io(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub schema_version: u32,
    pub task_id: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    pub policy: String,
    pub dt_s: f64,
    /// Rules the episode's chemistry ran with; `None` means no reactions.
    pub reaction_rules: Option<RuleTable>,
    /// World at tick 0.
    pub scene: WorldState,
}

/// The action applied at `tick` and what the world looked like after it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub tick: u64,
    pub action: AgentAction,
    pub ee_pose: Pose,
    pub gripper_aperture_m: f64,
    pub held: Option<String>,
    pub phase: Option<String>,
    pub stage: Option<usize>,
    pub final_stage_done: bool,
    pub events: Vec<EventKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeFooter {
    pub success: bool,
    pub ticks_used: u64,
    pub stage_outcomes: Vec<bool>,
    pub failure_reason: Option<String>,
    pub final_state_sha256: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub header: EpisodeHeader,
    pub frames: Vec<Frame>,
    pub footer: Option<EpisodeFooter>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(EpisodeHeader),
    Frame(Frame),
    Footer(EpisodeFooter),
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a world's canonical JSON snapshot.
pub fn state_hash(world: &WorldState) -> String {
    sha256_hex(world.to_json().as_bytes())
}

impl EpisodeRecord {
    pub fn new(header: EpisodeHeader) -> Self {
        EpisodeRecord { header, frames: Vec::new(), footer: None }
    }

    /// Appends a frame describing `world` right after `action` was applied.
    /// `event_mark` is the event-log length before the step.
    pub fn push(&mut self, world: &WorldState, action: AgentAction, labels: FrameLabels, event_mark: usize) {
        self.frames.push(Frame {
            tick: world.tick - 1,
            action,
            ee_pose: world.agent.ee_pose,
            gripper_aperture_m: world.agent.gripper_aperture_m,
            held: world.agent.held_object_id.clone(),
            phase: labels.phase,
            stage: labels.stage,
            final_stage_done: labels.final_stage_done,
            events: world.event_log[event_mark..].iter().map(|e| e.kind.clone()).collect(),
        });
    }

    pub fn finish(&mut self, footer: EpisodeFooter) {
        self.footer = Some(footer);
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut line = |l: &Line| {
            out.push_str(&serde_json::to_string(l).expect("episode lines serialize"));
            out.push('\n');
        };
        line(&Line::Header(self.header.clone()));
        for f in &self.frames {
            line(&Line::Frame(f.clone()));
        }
        if let Some(f) = &self.footer {
            line(&Line::Footer(f.clone()));
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TrajError> {
        let mut rec: Option<EpisodeRecord> = None;
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(raw).map_err(|e| TrajError::Parse { line: i + 1, msg: e.to_string() })?;
            let bad = |msg: &str| TrajError::Parse { line: i + 1, msg: msg.into() };
            match (parsed, rec.as_mut()) {
                (Line::Header(h), None) => {
                    if h.schema_version != EPISODE_SCHEMA_VERSION {
                        return Err(TrajError::Schema(h.schema_version));
                    }
                    rec = Some(EpisodeRecord::new(h));
                }
                (Line::Header(_), Some(_)) => return Err(bad("second header")),
                (_, None) => return Err(bad("missing header")),
                (Line::Frame(f), Some(r)) => {
                    if r.footer.is_some() {
                        return Err(bad("frame after footer"));
                    }
                    let want = r.header.scene.tick + r.frames.len() as u64;
                    if f.tick != want {
                        return Err(bad(&format!("frame tick {} breaks contiguity (expected {want})", f.tick)));
                    }
                    r.frames.push(f);
                }
                (Line::Footer(f), Some(r)) => {
                    if r.footer.is_some() {
                        return Err(bad("second footer"));
                    }
                    r.footer = Some(f);
                }
            }
        }
        rec.ok_or(TrajError::Parse { line: 0, msg: "empty episode file".into() })
    }

    pub fn write(&self, path: &Path) -> Result<String, TrajError> {
        let text = self.to_jsonl();
        fs::write(path, &text)?;
        Ok(sha256_hex(text.as_bytes()))
    }

    pub fn read(path: &Path) -> Result<Self, TrajError> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }

    pub fn success(&self) -> bool {
        self.footer.as_ref().is_some_and(|f| f.success)
    }
}

/// Labels a policy attaches to the action it produced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameLabels {
    pub phase: Option<String>,
    pub stage: Option<usize>,
    pub final_stage_done: bool,
}

/// Simulator matching an episode header.
pub fn simulator_for(header: &EpisodeHeader) -> Simulator {
    let oracle = header.reaction_rules.clone().map(|r| Arc::new(r) as Arc<dyn crate::chem::ReactionOracle>);
    Simulator::new(header.scene.clone(), oracle)
}

/// Re-simulates the recorded actions and checks every frame bit for bit.
pub fn replay(record: &EpisodeRecord) -> Result<WorldState, TrajError> {
    let mut sim = simulator_for(&record.header);
    for (i, f) in record.frames.iter().enumerate() {
        let mark = sim.world.event_log.len();
        let tick = sim.world.tick;
        let diverged = |detail: String| TrajError::ReplayDivergence { frame: i, tick, detail };
        if f.tick != tick {
            return Err(diverged(format!("recorded tick {}", f.tick)));
        }
        sim.step(&f.action).map_err(|e| diverged(format!("step failed: {e}")))?;
        let w = &sim.world;
        if w.agent.ee_pose != f.ee_pose {
            return Err(diverged(format!("ee pose {:?} != recorded {:?}", w.agent.ee_pose, f.ee_pose)));
        }
        if w.agent.gripper_aperture_m != f.gripper_aperture_m {
            return Err(diverged("gripper aperture".into()));
        }
        if w.agent.held_object_id != f.held {
            return Err(diverged(format!("held {:?} != recorded {:?}", w.agent.held_object_id, f.held)));
        }
        let events: Vec<&EventKind> = w.event_log[mark..].iter().map(|e| &e.kind).collect();
        if events.len() != f.events.len() || events.iter().zip(&f.events).any(|(a, b)| *a != b) {
            return Err(diverged("event stream".into()));
        }
    }
    if let Some(ft) = &record.footer {
        if !record.frames.is_empty() && state_hash(&sim.world) != ft.final_state_sha256 {
            return Err(TrajError::ReplayDivergence {
                frame: record.frames.len(),
                tick: sim.world.tick,
                detail: "final state hash".into(),
            });
        }
    }
    Ok(sim.world)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub task_id: String,
    pub seed: u64,
    pub success: bool,
    pub frames: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub generator_version: String,
    pub episodes: Vec<ManifestEntry>,
    /// Episodes per task id.
    pub task_counts: std::collections::BTreeMap<String, usize>,
    pub attempted: usize,
    pub failures: usize,
    #[serde(default)]
    pub failure_reasons: Vec<String>,
}

impl DatasetManifest {
    pub fn new(dataset_id: &str) -> Self {
        DatasetManifest {
            dataset_id: dataset_id.into(),
            generator_version: GENERATOR_VERSION.into(),
            episodes: Vec::new(),
            task_counts: Default::default(),
            attempted: 0,
            failures: 0,
            failure_reasons: Vec::new(),
        }
    }

    pub fn add(&mut self, entry: ManifestEntry) {
        *self.task_counts.entry(entry.task_id.clone()).or_default() += 1;
        self.episodes.push(entry);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TrajError> {
        serde_json::from_str(text).map_err(|e| TrajError::Parse { line: 0, msg: e.to_string() })
    }

    /// Re-hashes every listed file under `dir`.
    pub fn verify(&self, dir: &Path) -> Result<(), TrajError> {
        for e in &self.episodes {
            let bytes = fs::read(dir.join(&e.file))?;
            if sha256_hex(&bytes) != e.sha256 {
                return Err(TrajError::HashMismatch { file: e.file.clone() });
            }
        }
        Ok(())
    }
}

/// File name used for an episode in a dataset directory.
pub fn episode_file_name(task_id: &str, seed: u64) -> String {
    format!("{task_id}-{seed:06}.ep.jsonl")
}

/// Writes episodes into `dir` and returns their manifest. Failed episodes
/// are counted but only written when `keep_failures` is set.
pub fn write_dataset(
    dir: &Path,
    dataset_id: &str,
    records: &[EpisodeRecord],
    keep_failures: bool,
) -> Result<DatasetManifest, TrajError> {
    fs::create_dir_all(dir)?;
    let mut m = DatasetManifest::new(dataset_id);
    for r in records {
        m.attempted += 1;
        if !r.success() {
            m.failures += 1;
            let reason = r.footer.as_ref().and_then(|f| f.failure_reason.clone()).unwrap_or_else(|| "incomplete".into());
            m.failure_reasons.push(format!("{} seed {}: {reason}", r.header.task_id, r.header.seed));
            if !keep_failures {
                continue;
            }
        }
        let file = episode_file_name(&r.header.task_id, r.header.seed);
        let sha256 = r.write(&dir.join(&file))?;
        m.add(ManifestEntry {
            file,
            task_id: r.header.task_id.clone(),
            seed: r.header.seed,
            success: r.success(),
            frames: r.frames.len(),
            sha256,
        });
    }
    fs::write(dir.join("manifest.json"), m.to_json())?;
    Ok(m)
}
