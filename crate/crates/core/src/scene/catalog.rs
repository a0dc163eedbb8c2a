use serde::{Deserialize, Serialize};

use super::{AssetSpec, RoomSpec, SceneError, SceneLayout};
use crate::chem::SubstanceDatabase;
use crate::geom::{Rect2, Vec3};
use crate::world::{ObjectState, Surface, WorldState};

pub const CATALOG_JSON: &str = include_str!("../../data/assets.json");

/// Contents of an `assets.json` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub room: RoomSpec,
    pub assets: Vec<AssetSpec>,
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let c: Catalog = serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))?;
        c.room.validate()?;
        for a in &c.assets {
            a.validate()?;
        }
        Ok(c)
    }

    pub fn asset(&self, id: &str) -> Option<&AssetSpec> {
        self.assets.iter().find(|a| a.id == id)
    }
}

/// The shipped laboratory catalog.
pub fn default_catalog() -> Catalog {
    Catalog::from_json(CATALOG_JSON).expect("shipped assets.json is valid")
}

pub fn default_room() -> RoomSpec {
    default_catalog().room
}

/// Static world for a layout: one fixed object per asset, work surfaces on
/// assets that have them, and the room as floor.
pub fn layout_to_world(layout: &SceneLayout, assets: &[AssetSpec], db: &SubstanceDatabase, seed: u64) -> WorldState {
    let mut w = WorldState::new(seed).with_materials(db);
    for p in &layout.placements {
        let c = p.center();
        let obj = ObjectState::new(
            &p.asset_id,
            &p.category,
            Vec3::new(c[0], c[1], p.height_m / 2.0),
            Vec3::new(p.half_extents[0], p.half_extents[1], p.height_m / 2.0),
        )
        .fixed()
        .with_yaw(p.yaw);
        w.add_object(obj);
        if assets.iter().any(|a| a.id == p.asset_id && a.support_surface) {
            let (min, max) = p.footprint().bounds();
            w.surfaces.push(Surface { id: p.asset_id.clone(), min, max, top_z: p.height_m });
        }
    }
    w.floor = Some(Rect2::axis_aligned(layout.room.min, layout.room.max));
    w
}
