use serde::{Deserialize, Serialize};

use super::{AssetSpec, Placement, RoomSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub w_edge: f64,
    pub w_dist: f64,
    pub w_orient: f64,
    pub d_wall_max: f64,
    /// Preferred wall distance for assets that do not hug walls.
    pub d_center_pref: f64,
    pub d_sat: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            w_edge: 1.0 / 3.0,
            w_dist: 1.0 / 3.0,
            w_orient: 1.0 / 3.0,
            d_wall_max: 2.0,
            d_center_pref: 1.0,
            d_sat: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreTerms {
    pub edge: f64,
    pub dist: f64,
    pub orient: f64,
}

const ALIGN_EPS: f64 = 1e-6;

pub fn score_terms(room: &RoomSpec, placed: &[Placement], asset: &AssetSpec, cand: &Placement, cfg: &ScoreConfig) -> ScoreTerms {
    let fp = cand.footprint();
    let d_wall = room.wall_distance(&fp).max(0.0);
    let edge = if asset.prefers_wall {
        1.0 - (d_wall / cfg.d_wall_max).min(1.0)
    } else {
        (1.0 - (d_wall - cfg.d_center_pref).abs() / cfg.d_wall_max).clamp(0.0, 1.0)
    };

    let clearance = placed.iter().map(|p| p.footprint().distance(&fp)).fold(f64::INFINITY, f64::min);
    let dist = if clearance.is_infinite() { 1.0 } else { (clearance / cfg.d_sat).min(1.0) };

    let f = cand.facing();
    let c = cand.center();
    let rc = room.center();
    let to_center = [rc[0] - c[0], rc[1] - c[1]];
    let n = to_center[0].hypot(to_center[1]);
    let faces_center = n < 1e-12 || (f[0] * to_center[0] + f[1] * to_center[1]) / n >= std::f64::consts::FRAC_PI_4.cos() - 1e-12;
    let orient = if faces_center || faces_wall_normal(room, cand, f) { 1.0 } else { 0.0 };

    ScoreTerms { edge, dist, orient }
}

/// Facing the inward normal of the nearest wall.
fn faces_wall_normal(room: &RoomSpec, cand: &Placement, f: [f64; 2]) -> bool {
    let (lo, hi) = cand.footprint().bounds();
    let walls = [
        (lo[0] - room.min[0], [1.0, 0.0]),
        (room.max[0] - hi[0], [-1.0, 0.0]),
        (lo[1] - room.min[1], [0.0, 1.0]),
        (room.max[1] - hi[1], [0.0, -1.0]),
    ];
    let best = walls.iter().map(|w| w.0).fold(f64::INFINITY, f64::min);
    walls
        .iter()
        .filter(|w| w.0 <= best + 1e-12)
        .any(|(_, nrm)| (f[0] * nrm[0] + f[1] * nrm[1]) >= 1.0 - ALIGN_EPS)
}

pub fn score_layout(room: &RoomSpec, placed: &[Placement], asset: &AssetSpec, cand: &Placement, cfg: &ScoreConfig) -> f64 {
    let t = score_terms(room, placed, asset, cand, cfg);
    cfg.w_edge * t.edge + cfg.w_dist * t.dist + cfg.w_orient * t.orient
}
