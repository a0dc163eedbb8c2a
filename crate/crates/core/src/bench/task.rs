use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chem::SubstanceDatabase;
use crate::manip::ActionSpec;
use crate::world::WorldState;

use super::goal::{Condition, GoalPredicate, DEFAULT_HOLD_S};
use super::scenes::{build_scene, SceneRecipe};
use super::BenchError;

pub const TASKS_JSON: &str = include_str!("../../data/tasks.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Id,
    Ood,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Id => "id",
            Split::Ood => "ood",
        })
    }
}

/// Stage of a task before spot references (`"@name"`) are resolved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTemplate {
    pub label: String,
    pub action: Value,
    #[serde(default)]
    pub check: Value,
}

fn default_hold() -> f64 {
    DEFAULT_HOLD_S
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub level: u8,
    pub name: String,
    #[serde(default)]
    pub split: Option<Split>,
    pub scene: SceneRecipe,
    pub stages: Vec<StageTemplate>,
    pub goal: Value,
    #[serde(default = "default_hold")]
    pub hold_s: f64,
    pub time_limit_ticks: u64,
    /// Conditions described for the task but not encoded in `goal`.
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub label: String,
    pub action: ActionSpec,
    pub check: GoalPredicate,
}

/// A task bound to one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskInstance {
    pub task_id: String,
    pub seed: u64,
    pub world: WorldState,
    pub goal: GoalPredicate,
    pub stages: Vec<Stage>,
    pub spots: BTreeMap<String, [f64; 2]>,
}

fn substitute(v: &Value, spots: &BTreeMap<String, [f64; 2]>) -> Result<Value, String> {
    Ok(match v {
        Value::String(s) if s.starts_with('@') => {
            let p = spots.get(&s[1..]).ok_or_else(|| format!("unknown spot `{s}`"))?;
            serde_json::json!([p[0], p[1]])
        }
        Value::Array(xs) => Value::Array(xs.iter().map(|x| substitute(x, spots)).collect::<Result<_, _>>()?),
        Value::Object(m) => {
            Value::Object(m.iter().map(|(k, x)| Ok((k.clone(), substitute(x, spots)?))).collect::<Result<_, String>>()?)
        }
        other => other.clone(),
    })
}

fn conditions(v: &Value, spots: &BTreeMap<String, [f64; 2]>) -> Result<GoalPredicate, String> {
    if v.is_null() {
        return Ok(GoalPredicate::default());
    }
    let all: Vec<Condition> = serde_json::from_value(substitute(v, spots)?).map_err(|e| e.to_string())?;
    Ok(GoalPredicate::new(all))
}

/// Every `"@name"` string in a JSON tree.
fn spot_refs(v: &Value, out: &mut BTreeSet<String>) {
    match v {
        Value::String(s) if s.starts_with('@') => {
            out.insert(s[1..].to_string());
        }
        Value::Array(xs) => xs.iter().for_each(|x| spot_refs(x, out)),
        Value::Object(m) => m.values().for_each(|x| spot_refs(x, out)),
        _ => {}
    }
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| BenchError::InvalidTask { id: self.id.clone(), reason: m };
        if !(1..=5).contains(&self.level) {
            return Err(bad(format!("level {} outside 1..=5", self.level)));
        }
        if !(self.hold_s > 0.0) {
            return Err(bad("hold_s must be positive".into()));
        }
        if self.stages.is_empty() {
            return Err(bad("no stages".into()));
        }
        let mut labels = BTreeSet::new();
        for s in &self.stages {
            if s.check.as_array().is_none_or(|c| c.is_empty()) {
                return Err(bad(format!("stage `{}` has no check", s.label)));
            }
            if !labels.insert(&s.label) {
                return Err(bad(format!("duplicate stage label `{}`", s.label)));
            }
        }
        // Type-check templates with every spot bound to the origin.
        let mut refs = BTreeSet::new();
        for s in &self.stages {
            spot_refs(&s.action, &mut refs);
            spot_refs(&s.check, &mut refs);
        }
        spot_refs(&self.goal, &mut refs);
        let dummy: BTreeMap<String, [f64; 2]> = refs.into_iter().map(|r| (r, [0.0, 0.0])).collect();
        for s in &self.stages {
            let a = substitute(&s.action, &dummy).map_err(&bad)?;
            serde_json::from_value::<ActionSpec>(a).map_err(|e| bad(format!("stage `{}`: {e}", s.label)))?;
            conditions(&s.check, &dummy).map_err(|e| bad(format!("stage `{}` check: {e}", s.label)))?;
        }
        conditions(&self.goal, &dummy).map_err(|e| bad(format!("goal: {e}")))?;
        Ok(())
    }

    /// Deterministic scene, goal and stage list for `seed`.
    pub fn instantiate(&self, seed: u64, db: &SubstanceDatabase) -> Result<TaskInstance, BenchError> {
        let scene = build_scene(&self.scene, self.split, seed, db)?;
        let bad = |m: String| BenchError::InvalidTask { id: self.id.clone(), reason: m };
        let stages = self
            .stages
            .iter()
            .map(|s| {
                let a = substitute(&s.action, &scene.spots).map_err(&bad)?;
                Ok(Stage {
                    label: s.label.clone(),
                    action: serde_json::from_value(a).map_err(|e| bad(e.to_string()))?,
                    check: conditions(&s.check, &scene.spots).map_err(&bad)?,
                })
            })
            .collect::<Result<Vec<_>, BenchError>>()?;
        Ok(TaskInstance {
            task_id: self.id.clone(),
            seed,
            goal: conditions(&self.goal, &scene.spots).map_err(&bad)?,
            world: scene.world,
            stages,
            spots: scene.spots,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRegistry {
    pub tasks: Vec<TaskSpec>,
}

impl TaskRegistry {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let r: TaskRegistry = serde_json::from_str(text).map_err(|e| BenchError::Parse(e.to_string()))?;
        let mut ids = BTreeSet::new();
        for t in &r.tasks {
            if !ids.insert(&t.id) {
                return Err(BenchError::InvalidTask { id: t.id.clone(), reason: "duplicate task id".into() });
            }
            t.validate()?;
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?)
    }

    pub fn builtin() -> Self {
        Self::from_json(TASKS_JSON).expect("shipped tasks.json is valid")
    }

    pub fn get(&self, id: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.tasks.iter().map(|t| t.id.as_str()).collect()
    }

    pub fn level(&self, level: u8) -> impl Iterator<Item = &TaskSpec> {
        self.tasks.iter().filter(move |t| t.level == level)
    }
}
