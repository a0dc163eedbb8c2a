use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::score::{score_layout, ScoreConfig};
use super::{check_candidate, AssetSpec, LayoutMethod, Placement, RoomSpec, SceneError, SceneLayout};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaceConfig {
    /// Feasible candidates scored per asset.
    pub k: usize,
    pub score: ScoreConfig,
    /// Cap on (cell, yaw) pairs examined per asset before falling back to
    /// DFS. `None` examines the whole shuffled grid.
    pub eval_budget: Option<usize>,
}

impl Default for PlaceConfig {
    fn default() -> Self {
        PlaceConfig { k: 64, score: ScoreConfig::default(), eval_budget: None }
    }
}

fn all_slots(room: &RoomSpec, asset: &AssetSpec) -> Vec<(usize, usize, usize)> {
    let mut v = Vec::with_capacity(room.rows() * room.cols() * asset.allowed_yaws.len());
    for r in 0..room.rows() {
        for c in 0..room.cols() {
            for y in 0..asset.allowed_yaws.len() {
                v.push((r, c, y));
            }
        }
    }
    v
}

fn sample_budgeted<R: Rng + ?Sized>(
    room: &RoomSpec,
    placed: &[Placement],
    asset: &AssetSpec,
    k: usize,
    budget: Option<usize>,
    rng: &mut R,
) -> Vec<Placement> {
    let mut slots = all_slots(room, asset);
    slots.shuffle(rng);
    let limit = budget.unwrap_or(usize::MAX);
    slots
        .into_iter()
        .take(limit)
        .map(|(r, c, y)| Placement::new(room, asset, (r, c), y))
        .filter(|p| check_candidate(room, placed, asset, p).is_ok())
        .take(k)
        .collect()
}

/// Up to `k` feasible `(cell, yaw)` placements drawn uniformly without
/// replacement.
pub fn sample_candidates<R: Rng + ?Sized>(
    room: &RoomSpec,
    placed: &[Placement],
    asset: &AssetSpec,
    k: usize,
    rng: &mut R,
) -> Vec<Placement> {
    sample_budgeted(room, placed, asset, k.max(1), None, rng)
}

fn slot_key(p: &Placement) -> (usize, usize, usize) {
    (p.cell.0, p.cell.1, p.yaw_index)
}

fn best_candidate(room: &RoomSpec, placed: &[Placement], asset: &AssetSpec, cands: Vec<Placement>, cfg: &ScoreConfig) -> (Placement, f64) {
    let mut best: Option<(Placement, f64)> = None;
    for c in cands {
        let s = score_layout(room, placed, asset, &c, cfg);
        let better = match &best {
            None => true,
            Some((b, bs)) => s > *bs || (s == *bs && slot_key(&c) < slot_key(b)),
        };
        if better {
            best = Some((c, s));
        }
    }
    best.expect("non-empty candidates")
}

fn sorted_assets(assets: &[AssetSpec]) -> Vec<AssetSpec> {
    let mut v = assets.to_vec();
    v.sort_by(|a, b| {
        a.importance_rank
            .cmp(&b.importance_rank)
            .then(b.footprint_area().total_cmp(&a.footprint_area()))
            .then_with(|| a.id.cmp(&b.id))
    });
    v
}

/// Places every asset, best-scoring candidate first, DFS when sampling
/// runs dry.
pub fn place_all(room: &RoomSpec, assets: &[AssetSpec], cfg: &PlaceConfig, seed: u64) -> Result<SceneLayout, SceneError> {
    room.validate()?;
    if assets.is_empty() {
        return Err(SceneError::InvalidAsset { id: String::new(), reason: "empty asset list".into() });
    }
    for a in assets {
        a.validate()?;
    }
    let order = sorted_assets(assets);
    let total: f64 = order.iter().map(|a| a.footprint_area()).sum();
    if total > room.area() + 1e-9 {
        return Err(SceneError::Infeasible(format!("footprints cover {total:.3} m2 > room {:.3} m2", room.area())));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placed: Vec<Placement> = Vec::with_capacity(order.len());
    let mut scores = Vec::with_capacity(order.len());
    for (i, asset) in order.iter().enumerate() {
        let cands = sample_budgeted(room, &placed, asset, cfg.k.max(1), cfg.eval_budget, &mut rng);
        if cands.is_empty() {
            let full = match dfs_place(room, &placed, &order[i..]) {
                Ok(p) => p,
                Err(_) => dfs_place(room, &[], &order)?,
            };
            let score = replay_score(room, &full, &order, &cfg.score);
            return Ok(SceneLayout {
                room: room.clone(),
                placements: full,
                score,
                generator_seed: seed,
                method: LayoutMethod::DfsFallback,
            });
        }
        let (p, s) = best_candidate(room, &placed, asset, cands, &cfg.score);
        placed.push(p);
        scores.push(s);
    }
    let score = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(SceneLayout { room: room.clone(), placements: placed, score, generator_seed: seed, method: LayoutMethod::Sampled })
}

/// Mean per-placement score, each scored against its predecessors.
fn replay_score(room: &RoomSpec, placements: &[Placement], order: &[AssetSpec], cfg: &ScoreConfig) -> f64 {
    let total: f64 = placements
        .iter()
        .enumerate()
        .map(|(i, p)| score_layout(room, &placements[..i], &order[i], p, cfg))
        .sum();
    total / placements.len().max(1) as f64
}

/// Exhaustive depth-first search over `(row, col, yaw)` in lexicographic
/// order for each remaining asset. Returns the first complete assignment.
pub fn dfs_place(room: &RoomSpec, partial: &[Placement], remaining: &[AssetSpec]) -> Result<Vec<Placement>, SceneError> {
    let mut placed = partial.to_vec();
    if dfs(room, &mut placed, remaining) {
        Ok(placed)
    } else {
        Err(SceneError::Infeasible(format!("search exhausted with {} asset(s) left", remaining.len())))
    }
}

fn dfs(room: &RoomSpec, placed: &mut Vec<Placement>, remaining: &[AssetSpec]) -> bool {
    let Some((asset, rest)) = remaining.split_first() else { return true };
    for (r, c, y) in all_slots(room, asset) {
        let p = Placement::new(room, asset, (r, c), y);
        if check_candidate(room, placed, asset, &p).is_ok() {
            placed.push(p);
            if dfs(room, placed, rest) {
                return true;
            }
            placed.pop();
        }
    }
    false
}
