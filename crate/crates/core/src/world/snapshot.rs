use super::params::SCHEMA_VERSION;
use super::{WorldError, WorldState};

pub fn snapshot_to_json(world: &WorldState) -> String {
    serde_json::to_string(world).expect("world state serializes")
}

pub fn snapshot_from_json(text: &str) -> Result<WorldState, WorldError> {
    let w: WorldState = serde_json::from_str(text).map_err(|e| WorldError::Snapshot(e.to_string()))?;
    if w.schema_version != SCHEMA_VERSION {
        return Err(WorldError::Snapshot(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            w.schema_version
        )));
    }
    Ok(w)
}

impl WorldState {
    pub fn to_json(&self) -> String {
        snapshot_to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        snapshot_from_json(text)
    }
}
