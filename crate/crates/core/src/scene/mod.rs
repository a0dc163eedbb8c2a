//! Procedural room layout: grid candidates, constraint checks, scoring and
//! a depth-first fallback.

mod catalog;
mod place;
mod score;

pub use catalog::{default_catalog, default_room, layout_to_world, Catalog, CATALOG_JSON};
pub use place::{dfs_place, place_all, sample_candidates, PlaceConfig};
pub use score::{score_layout, score_terms, ScoreConfig, ScoreTerms};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Pose, Quat, Rect2, Vec3};

/// Placement grid pitch, finer than the navigation grid.
pub const PLACEMENT_CELL_M: f64 = 0.25;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("no feasible layout: {0}")]
    Infeasible(String),
    #[error("invalid asset `{id}`: {reason}")]
    InvalidAsset { id: String, reason: String },
    #[error("invalid room: {0}")]
    InvalidRoom(String),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PlacementConstraint {
    /// Footprint and front strip inside the room. Always enforced.
    Boundary,
    /// No footprint overlaps, no footprint in another's front strip. Always enforced.
    Collision,
    MinWallDistance { min_m: f64 },
    /// An already placed asset of `category` within `max_distance_m`.
    RequiredNeighbor { category: String, max_distance_m: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssetSpec {
    pub id: String,
    pub category: String,
    pub footprint_half_extents: [f64; 2],
    pub height_m: f64,
    pub importance_rank: i32,
    pub allowed_yaws: Vec<f64>,
    #[serde(default)]
    pub constraints: Vec<PlacementConstraint>,
    #[serde(default)]
    pub prefers_wall: bool,
    #[serde(default)]
    pub front_clearance_m: f64,
    /// Top face is a work surface objects can rest on.
    #[serde(default)]
    pub support_surface: bool,
}

impl AssetSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |r: &str| Err(SceneError::InvalidAsset { id: self.id.clone(), reason: r.into() });
        if !(self.footprint_half_extents[0] > 0.0 && self.footprint_half_extents[1] > 0.0) {
            return bad("footprint must be positive");
        }
        if self.allowed_yaws.is_empty() {
            return bad("allowed_yaws is empty");
        }
        if !(self.height_m > 0.0) || self.front_clearance_m < 0.0 {
            return bad("height must be positive and clearance non-negative");
        }
        for c in &self.constraints {
            match c {
                PlacementConstraint::MinWallDistance { min_m } if !(*min_m >= 0.0) => return bad("min_wall_distance < 0"),
                PlacementConstraint::RequiredNeighbor { max_distance_m, .. } if !(*max_distance_m >= 0.0) => {
                    return bad("max_neighbor_distance < 0")
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn footprint_area(&self) -> f64 {
        4.0 * self.footprint_half_extents[0] * self.footprint_half_extents[1]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub grid_cell_m: f64,
}

impl RoomSpec {
    pub fn new(width: f64, depth: f64) -> Self {
        RoomSpec { min: [0.0, 0.0], max: [width, depth], grid_cell_m: PLACEMENT_CELL_M }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.grid_cell_m > 0.0) {
            return Err(SceneError::InvalidRoom("grid_cell_m must be positive".into()));
        }
        if !(self.max[0] > self.min[0] && self.max[1] > self.min[1]) {
            return Err(SceneError::InvalidRoom("degenerate bounds".into()));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        ((self.max[1] - self.min[1]) / self.grid_cell_m + EPS).floor() as usize
    }

    pub fn cols(&self) -> usize {
        ((self.max[0] - self.min[0]) / self.grid_cell_m + EPS).floor() as usize
    }

    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.min[0] + (col as f64 + 0.5) * self.grid_cell_m,
            self.min[1] + (row as f64 + 0.5) * self.grid_cell_m,
        ]
    }

    pub fn center(&self) -> [f64; 2] {
        [(self.min[0] + self.max[0]) / 2.0, (self.min[1] + self.max[1]) / 2.0]
    }

    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]) * (self.max[1] - self.min[1])
    }

    pub fn rect(&self) -> Rect2 {
        Rect2::axis_aligned(self.min, self.max)
    }

    /// Smallest gap between a rectangle and any wall (negative if outside).
    pub fn wall_distance(&self, r: &Rect2) -> f64 {
        let (lo, hi) = r.bounds();
        (lo[0] - self.min[0]).min(self.max[0] - hi[0]).min(lo[1] - self.min[1]).min(self.max[1] - hi[1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub asset_id: String,
    pub category: String,
    /// `(row, col)`; rows run along y.
    pub cell: (usize, usize),
    pub yaw: f64,
    pub yaw_index: usize,
    pub half_extents: [f64; 2],
    pub height_m: f64,
    pub front_clearance_m: f64,
    pub world_pose: Pose,
}

impl Placement {
    pub fn new(room: &RoomSpec, asset: &AssetSpec, cell: (usize, usize), yaw_index: usize) -> Self {
        let c = room.cell_center(cell.0, cell.1);
        let yaw = asset.allowed_yaws[yaw_index];
        Placement {
            asset_id: asset.id.clone(),
            category: asset.category.clone(),
            cell,
            yaw,
            yaw_index,
            half_extents: asset.footprint_half_extents,
            height_m: asset.height_m,
            front_clearance_m: asset.front_clearance_m,
            world_pose: Pose::new(Vec3::new(c[0], c[1], asset.height_m / 2.0), Quat::from_yaw(yaw)),
        }
    }

    pub fn center(&self) -> [f64; 2] {
        [self.world_pose.position.x, self.world_pose.position.y]
    }

    pub fn footprint(&self) -> Rect2 {
        Rect2::new(self.center(), self.half_extents, self.yaw)
    }

    /// Unit vector the asset's front faces (body +x).
    pub fn facing(&self) -> [f64; 2] {
        [self.yaw.cos(), self.yaw.sin()]
    }

    /// Keep-out strip in front of the asset, if it has clearance.
    pub fn front_strip(&self) -> Option<Rect2> {
        if self.front_clearance_m <= 0.0 {
            return None;
        }
        let f = self.facing();
        let off = self.half_extents[0] + self.front_clearance_m / 2.0;
        let c = self.center();
        Some(Rect2::new(
            [c[0] + f[0] * off, c[1] + f[1] * off],
            [self.front_clearance_m / 2.0, self.half_extents[1]],
            self.yaw,
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutMethod {
    Sampled,
    DfsFallback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneLayout {
    pub room: RoomSpec,
    pub placements: Vec<Placement>,
    pub score: f64,
    pub generator_seed: u64,
    pub method: LayoutMethod,
}

impl SceneLayout {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    OutOfBounds(String),
    Overlap(String, String),
    WallDistance(String),
    MissingNeighbor(String),
}

fn inside(room: &RoomSpec, r: &Rect2) -> bool {
    room.wall_distance(r) >= -EPS
}

/// Shared constraint check: `cand` against already placed assets.
pub fn check_candidate(room: &RoomSpec, placed: &[Placement], asset: &AssetSpec, cand: &Placement) -> Result<(), Violation> {
    let fp = cand.footprint();
    let strip = cand.front_strip();
    if !inside(room, &fp) || strip.as_ref().is_some_and(|s| !inside(room, s)) {
        return Err(Violation::OutOfBounds(cand.asset_id.clone()));
    }
    for p in placed {
        let other = p.footprint();
        let hit = fp.overlaps(&other, EPS)
            || strip.as_ref().is_some_and(|s| s.overlaps(&other, EPS))
            || p.front_strip().is_some_and(|s| s.overlaps(&fp, EPS));
        if hit {
            return Err(Violation::Overlap(cand.asset_id.clone(), p.asset_id.clone()));
        }
    }
    for c in &asset.constraints {
        match c {
            PlacementConstraint::MinWallDistance { min_m } => {
                if room.wall_distance(&fp) < min_m - EPS {
                    return Err(Violation::WallDistance(cand.asset_id.clone()));
                }
            }
            PlacementConstraint::RequiredNeighbor { category, max_distance_m } => {
                let ok = placed.iter().any(|p| &p.category == category && p.footprint().distance(&fp) <= max_distance_m + EPS);
                if !ok {
                    return Err(Violation::MissingNeighbor(cand.asset_id.clone()));
                }
            }
            PlacementConstraint::Boundary | PlacementConstraint::Collision => {}
        }
    }
    Ok(())
}

/// Every violation in a finished layout.
pub fn validate_layout(layout: &SceneLayout, assets: &[AssetSpec]) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, p) in layout.placements.iter().enumerate() {
        let Some(asset) = assets.iter().find(|a| a.id == p.asset_id) else {
            out.push(Violation::OutOfBounds(p.asset_id.clone()));
            continue;
        };
        let others: Vec<Placement> =
            layout.placements.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| q.clone()).collect();
        if let Err(v) = check_candidate(&layout.room, &others, asset, p) {
            out.push(v);
        }
    }
    out
}
