//! Seeded scene recipes for benchmark tasks.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chem::{ChemError, Mixture, SubstanceDatabase};
use crate::geom::{Pose, Quat, Vec3};
use crate::nav::{build_occupancy, inflate, OccupancyGrid, INFLATION_RADIUS_M, NAV_CELL_M};
use crate::scene::{default_catalog, layout_to_world, place_all, PlaceConfig, SceneError};
use crate::world::{BasePose, JointGeometry, JointKind, JointState, ObjectState, Surface, WorldState};

use super::Split;

pub const BENCH_TOP_Z: f64 = 0.8;
/// Bench top extent, `[x_min, y_min]` to `[x_max, y_max]`.
pub const BENCH_MIN: [f64; 2] = [0.2, -0.8];
pub const BENCH_MAX: [f64; 2] = [1.0, 0.8];
const HOME_EE: Vec3 = Vec3::new(0.3, 0.0, 1.2);
const MIN_GAP_M: f64 = 0.06;
const REACH_M: f64 = 1.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FillSpec {
    pub substance: String,
    #[serde(default)]
    pub ml: Option<f64>,
    #[serde(default)]
    pub mol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Item {
    Beaker {
        id: String,
        region: String,
        #[serde(default)]
        fill: Vec<FillSpec>,
        /// Fixed geometry; otherwise drawn from the split's pool.
        #[serde(default)]
        variant: Option<String>,
    },
    Rod { id: String, region: String },
    Heater { id: String, button: String },
    Cabinet { door: String, #[serde(default)] open_rad: f64 },
    Drawer { joint: String, #[serde(default)] open_m: f64 },
    /// A free bench spot, exposed as `@<id>`.
    Spot { id: String, region: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneRecipe {
    /// Fixed-base arm in front of a bench.
    Tabletop {
        items: Vec<Item>,
        /// Item that starts grasped and lifted.
        #[serde(default)]
        held: Option<String>,
    },
    /// Mobile base in a generated room with a beaker on a lab bench.
    Room { beaker: String },
}

/// Container geometry drawn from a variant pool.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContainerVariant {
    pub tag: &'static str,
    pub half: [f64; 3],
    pub mouth_radius_m: f64,
    pub capacity_ml: f64,
}

const fn cv(tag: &'static str, half: [f64; 3], mouth_radius_m: f64, capacity_ml: f64) -> ContainerVariant {
    ContainerVariant { tag, half, mouth_radius_m, capacity_ml }
}

pub const DEFAULT_CONTAINER: ContainerVariant = cv("beaker_250", [0.035, 0.035, 0.05], 0.035, 250.0);
const CONTAINERS_ID: [ContainerVariant; 3] = [
    DEFAULT_CONTAINER,
    cv("beaker_100", [0.025, 0.025, 0.04], 0.025, 100.0),
    cv("flask_250", [0.04, 0.04, 0.065], 0.02, 250.0),
];
const CONTAINERS_OOD: [ContainerVariant; 3] = [
    cv("beaker_600", [0.05, 0.05, 0.065], 0.05, 600.0),
    cv("cylinder_100", [0.02, 0.02, 0.09], 0.02, 100.0),
    cv("flask_500", [0.05, 0.05, 0.085], 0.022, 500.0),
];
const WASTE: ContainerVariant = cv("waste_1000", [0.06, 0.06, 0.07], 0.06, 1000.0);
const SURFACES_ID: [&str; 2] = ["wood", "white_laminate"];
const SURFACES_OOD: [&str; 2] = ["steel", "black_epoxy"];
/// `(tag, radius)` of push buttons.
const BUTTONS_ID: [(&str, f64); 2] = [("round_red", 0.015), ("square_gray", 0.02)];
const BUTTONS_OOD: [(&str, f64); 1] = [("rocker_green", 0.012)];
/// `(tag, door handle radius from the hinge, handle height)`.
const HANDLES_ID: [(&str, f64, f64); 2] = [("bar_short", 0.3, 0.95), ("bar_long", 0.34, 0.95)];
const HANDLES_OOD: [(&str, f64, f64); 1] = [("knob_low", 0.32, 0.9)];

/// Variant tags a split may draw, per pool.
pub fn variant_tags(split: Split) -> BTreeMap<&'static str, Vec<&'static str>> {
    let (c, s, b, h): (&[ContainerVariant], &[&str], &[(&str, f64)], &[(&str, f64, f64)]) = match split {
        Split::Id => (&CONTAINERS_ID, &SURFACES_ID, &BUTTONS_ID, &HANDLES_ID),
        Split::Ood => (&CONTAINERS_OOD, &SURFACES_OOD, &BUTTONS_OOD, &HANDLES_OOD),
    };
    BTreeMap::from([
        ("container", c.iter().map(|v| v.tag).collect()),
        ("surface", s.to_vec()),
        ("button", b.iter().map(|v| v.0).collect()),
        ("handle", h.iter().map(|v| v.0).collect()),
    ])
}

pub fn container_variant(tag: &str) -> Option<ContainerVariant> {
    CONTAINERS_ID.iter().chain(&CONTAINERS_OOD).chain([&WASTE]).find(|v| v.tag == tag).copied()
}

fn region(name: &str) -> Result<([f64; 2], [f64; 2]), SceneError> {
    Ok(match name {
        "left" => ([0.42, 0.12], [0.62, 0.34]),
        "right" => ([0.42, -0.34], [0.62, -0.12]),
        "center" => ([0.42, -0.05], [0.55, 0.05]),
        "back" => ([0.7, -0.15], [0.8, 0.15]),
        "front" => ([0.3, -0.15], [0.36, 0.15]),
        _ => return Err(SceneError::Parse(format!("unknown bench region `{name}`"))),
    })
}

/// Cabinet interior on the bench and its two shelf spots.
const CABINET_MIN: [f64; 2] = [0.72, 0.4];
const CABINET_MAX: [f64; 2] = [0.95, 0.72];
const SHELF_SPOTS: [[f64; 2]; 2] = [[0.82, 0.49], [0.82, 0.63]];
const HEATER_XY: [f64; 2] = [0.55, -0.6];
const BUTTON_XY: [f64; 2] = [0.38, -0.6];

/// A sampled scene: world at tick 0 plus named floor/bench spots.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneInstance {
    pub world: WorldState,
    pub spots: BTreeMap<String, [f64; 2]>,
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, xs: &'a [T]) -> &'a T {
    &xs[rng.random_range(0..xs.len())]
}

fn fill_mixture(fill: &[FillSpec], db: &SubstanceDatabase) -> Result<Mixture, ChemError> {
    let mut m = Mixture::new();
    for f in fill {
        match (f.ml, f.mol) {
            (Some(ml), None) => m.merge(&Mixture::of_volume(&f.substance, ml, db)?),
            (None, Some(mol)) => m.add(&f.substance, mol),
            _ => return Err(ChemError::Parse(format!("fill of `{}` needs exactly one of ml / mol", f.substance))),
        }
    }
    Ok(m)
}

fn top_down(yaw: f64) -> Quat {
    Quat::from_yaw(yaw) * Quat::DOWN
}

/// Builds the scene for `recipe` from `seed`. Same inputs, same world.
pub fn build_scene(recipe: &SceneRecipe, split: Option<Split>, seed: u64, db: &SubstanceDatabase) -> Result<SceneInstance, SceneError> {
    match recipe {
        SceneRecipe::Tabletop { items, held } => tabletop(items, held.as_deref(), split, seed, db),
        SceneRecipe::Room { beaker } => room(beaker, seed, db),
    }
}

fn tabletop(items: &[Item], held: Option<&str>, split: Option<Split>, seed: u64, db: &SubstanceDatabase) -> Result<SceneInstance, SceneError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = WorldState::new(seed).with_materials(db);
    let mut spots = BTreeMap::new();
    let surface_tag = match split {
        Some(Split::Id) => *pick(&mut rng, &SURFACES_ID),
        Some(Split::Ood) => *pick(&mut rng, &SURFACES_OOD),
        None => SURFACES_ID[0],
    };
    let cx = (BENCH_MIN[0] + BENCH_MAX[0]) / 2.0;
    let hx = (BENCH_MAX[0] - BENCH_MIN[0]) / 2.0;
    let hy = (BENCH_MAX[1] - BENCH_MIN[1]) / 2.0;
    w.add_object(
        ObjectState::new("bench", "lab_bench", Vec3::new(cx, 0.0, BENCH_TOP_Z / 2.0), Vec3::new(hx, hy, BENCH_TOP_Z / 2.0))
            .fixed()
            .with_variant(surface_tag),
    );
    w.surfaces.push(Surface { id: "bench".into(), min: BENCH_MIN, max: BENCH_MAX, top_z: BENCH_TOP_Z });
    w.agent.ee_pose = Pose::new(HOME_EE, Quat::DOWN);

    // Footprint discs `(x, y, r)` already on the bench.
    let mut taken: Vec<(f64, f64, f64)> = Vec::new();
    let sample = |rng: &mut ChaCha8Rng, taken: &mut Vec<(f64, f64, f64)>, reg: &str, r: f64| -> Result<[f64; 2], SceneError> {
        let (lo, hi) = region(reg)?;
        for _ in 0..500 {
            let p = [rng.random_range(lo[0]..=hi[0]), rng.random_range(lo[1]..=hi[1])];
            if taken.iter().all(|&(x, y, q)| (p[0] - x).hypot(p[1] - y) >= r + q + MIN_GAP_M) {
                taken.push((p[0], p[1], r));
                return Ok(p);
            }
        }
        Err(SceneError::Infeasible(format!("no free spot in region `{reg}`")))
    };

    for item in items {
        match item {
            Item::Heater { id, button } => {
                let (btag, bradius) = match split {
                    Some(Split::Id) => *pick(&mut rng, &BUTTONS_ID),
                    Some(Split::Ood) => *pick(&mut rng, &BUTTONS_OOD),
                    None => BUTTONS_ID[0],
                };
                w.add_object(
                    ObjectState::new(id, "heater", Vec3::new(HEATER_XY[0], HEATER_XY[1], BENCH_TOP_Z + 0.01), Vec3::new(0.08, 0.08, 0.01))
                        .fixed(),
                );
                w.surfaces.push(Surface {
                    id: id.clone(),
                    min: [HEATER_XY[0] - 0.08, HEATER_XY[1] - 0.08],
                    max: [HEATER_XY[0] + 0.08, HEATER_XY[1] + 0.08],
                    top_z: BENCH_TOP_Z + 0.02,
                });
                taken.push((HEATER_XY[0], HEATER_XY[1], 0.113));
                let obj = format!("{button}_cap");
                let rest = Vec3::new(BUTTON_XY[0], BUTTON_XY[1], BENCH_TOP_Z + 0.01);
                w.add_object(
                    ObjectState::new(&obj, "button", rest - Vec3::Z * 0.005, Vec3::new(bradius, bradius, 0.005))
                        .fixed()
                        .with_variant(btag),
                );
                w.add_joint(JointState {
                    id: button.clone(),
                    kind: JointKind::Prismatic,
                    value: 0.0,
                    range: [0.0, 0.01],
                    attached_object_id: obj,
                    geometry: JointGeometry::Button { rest, normal: Vec3::Z, radius_m: bradius, activation_m: 0.008 },
                    activated: false,
                });
                taken.push((BUTTON_XY[0], BUTTON_XY[1], bradius));
                spots.insert(id.clone(), HEATER_XY);
            }
            Item::Cabinet { door, open_rad } => {
                let (htag, radius, height) = match split {
                    Some(Split::Id) => *pick(&mut rng, &HANDLES_ID),
                    Some(Split::Ood) => *pick(&mut rng, &HANDLES_OOD),
                    None => HANDLES_ID[0],
                };
                let pivot = [CABINET_MIN[0] - 0.04, CABINET_MAX[1] + 0.03];
                let handle = format!("{door}_handle");
                let mut j = JointState {
                    id: door.clone(),
                    kind: JointKind::Revolute,
                    value: 0.0,
                    range: [0.0, FRAC_PI_2 + 0.2],
                    attached_object_id: handle.clone(),
                    geometry: JointGeometry::Hinge {
                        pivot,
                        closed_angle: -FRAC_PI_2,
                        radius_m: radius,
                        opening_sign: -1.0,
                        handle_height_m: height,
                    },
                    activated: false,
                };
                j.value = j.clamp(*open_rad);
                let hp = j.handle_pose(j.value);
                let mut h = ObjectState::new(&handle, "door_handle", hp.position, Vec3::new(0.01, 0.04, 0.01)).with_variant(htag);
                h.pose = hp;
                w.add_object(h);
                w.add_joint(j);
                w.surfaces.push(Surface { id: "cabinet_shelf".into(), min: CABINET_MIN, max: CABINET_MAX, top_z: BENCH_TOP_Z });
                taken.push(((CABINET_MIN[0] + CABINET_MAX[0]) / 2.0, (CABINET_MIN[1] + CABINET_MAX[1]) / 2.0, 0.2));
                spots.insert("shelf1".into(), SHELF_SPOTS[0]);
                spots.insert("shelf2".into(), SHELF_SPOTS[1]);
            }
            Item::Drawer { joint, open_m } => {
                let handle = format!("{joint}_handle");
                let mut j = JointState {
                    id: joint.clone(),
                    kind: JointKind::Prismatic,
                    value: 0.0,
                    range: [0.0, 0.35],
                    attached_object_id: handle.clone(),
                    geometry: JointGeometry::Slide { origin: Vec3::new(0.17, -0.3, 0.72), axis: Vec3::new(-1.0, 0.0, 0.0) },
                    activated: false,
                };
                j.value = j.clamp(*open_m);
                let hp = j.handle_pose(j.value);
                let mut h = ObjectState::new(&handle, "drawer_handle", hp.position, Vec3::new(0.01, 0.05, 0.01));
                h.pose = hp;
                w.add_object(h);
                w.add_joint(j);
            }
            Item::Beaker { id, region, fill, variant } => {
                let v = match (variant, split) {
                    (Some(tag), _) => container_variant(tag).ok_or_else(|| SceneError::Parse(format!("unknown container variant `{tag}`")))?,
                    (None, Some(Split::Id)) => *pick(&mut rng, &CONTAINERS_ID),
                    (None, Some(Split::Ood)) => *pick(&mut rng, &CONTAINERS_OOD),
                    (None, None) => DEFAULT_CONTAINER,
                };
                let r = v.half[0].hypot(v.half[1]);
                let p = sample(&mut rng, &mut taken, region, r)?;
                let yaw = rng.random_range(-PI..PI);
                let half = Vec3::new(v.half[0], v.half[1], v.half[2]);
                let obj = ObjectState::new(id, "beaker", Vec3::new(p[0], p[1], BENCH_TOP_Z + half.z), half)
                    .with_yaw(yaw)
                    .with_variant(v.tag);
                let contents = fill_mixture(fill, db).map_err(|e| SceneError::Parse(e.to_string()))?;
                w.add_container(obj, v.capacity_ml, v.mouth_radius_m, contents);
                spots.insert(format!("home_{id}"), p);
            }
            Item::Rod { id, region } => {
                let p = sample(&mut rng, &mut taken, region, 0.02)?;
                let half = Vec3::new(0.004, 0.004, 0.1);
                w.add_object(ObjectState::new(id, "glass_rod", Vec3::new(p[0], p[1], BENCH_TOP_Z + half.z), half));
                spots.insert(format!("home_{id}"), p);
            }
            Item::Spot { id, region } => {
                let p = sample(&mut rng, &mut taken, region, 0.05)?;
                spots.insert(id.clone(), p);
            }
        }
    }

    if let Some(id) = held {
        let o = w.objects.get_mut(id).ok_or_else(|| SceneError::Parse(format!("held item `{id}` is not in the scene")))?;
        o.pose.position.z += 0.25;
        w.agent.ee_pose = Pose::new(o.pose.position, top_down(o.pose.orientation.yaw()));
        w.attach(id).map_err(|e| SceneError::Parse(e.to_string()))?;
        w.event_log.clear();
    }
    Ok(SceneInstance { world: w, spots })
}

/// Free cells of `grid` reachable from `from` by 8-connected moves that
/// do not cut corners.
fn reachable(grid: &OccupancyGrid, from: (usize, usize)) -> Vec<bool> {
    let (w, h) = (grid.width, grid.height);
    let mut seen = vec![false; w * h];
    let mut stack = vec![from];
    seen[from.0 * w + from.1] = true;
    while let Some((r, c)) = stack.pop() {
        for dr in -1isize..=1 {
            for dc in -1isize..=1 {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if (dr, dc) == (0, 0) || nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                    continue;
                }
                let (nr, nc) = (nr as usize, nc as usize);
                if !grid.is_free(nr, nc) || seen[nr * w + nc] {
                    continue;
                }
                if dr != 0 && dc != 0 && (!grid.is_free(r, nc) || !grid.is_free(nr, c)) {
                    continue;
                }
                seen[nr * w + nc] = true;
                stack.push((nr, nc));
            }
        }
    }
    seen
}

/// Room-scale scene: a generated lab, a beaker near a bench's front edge,
/// a base start and a goal cell in reach of the beaker, joined by a
/// collision-free route.
fn room(beaker: &str, seed: u64, db: &SubstanceDatabase) -> Result<SceneInstance, SceneError> {
    let cat = default_catalog();
    let (room, assets) = (cat.room, cat.assets);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1ab5);
    for attempt in 0..32u64 {
        let layout = place_all(&room, &assets, &PlaceConfig::default(), seed.wrapping_add(attempt * 7919))?;
        let benches: Vec<_> = layout.placements.iter().filter(|p| p.category == "lab_bench").collect();
        if benches.is_empty() {
            continue;
        }
        let bench = *pick(&mut rng, &benches);
        let mut w = layout_to_world(&layout, &assets, db, seed);
        let f = bench.facing();
        let side = [-f[1], f[0]];
        let c = bench.center();
        let lateral = rng.random_range(-0.6..0.6) * (bench.half_extents[1] - 0.1) / bench.half_extents[1];
        let inset = bench.half_extents[0] - 0.12;
        let bxy = [c[0] + f[0] * inset + side[0] * lateral, c[1] + f[1] * inset + side[1] * lateral];
        let v = DEFAULT_CONTAINER;
        let half = Vec3::new(v.half[0], v.half[1], v.half[2]);
        let top = w.support_height(bxy[0], bxy[1]);
        let obj = ObjectState::new(beaker, "beaker", Vec3::new(bxy[0], bxy[1], top + half.z), half)
            .with_yaw(rng.random_range(-PI..PI))
            .with_variant(v.tag);
        w.add_container(obj, v.capacity_ml, v.mouth_radius_m, Mixture::new());

        let grid = inflate(&build_occupancy(&w, NAV_CELL_M).map_err(|e| SceneError::Parse(e.to_string()))?, INFLATION_RADIUS_M);
        let mut goals: Vec<((usize, usize), f64)> = Vec::new();
        for r in 0..grid.height {
            for col in 0..grid.width {
                if !grid.is_free(r, col) {
                    continue;
                }
                let p = grid.cell_center(r, col);
                let d = (p[0] - bxy[0]).hypot(p[1] - bxy[1]);
                if d <= 1.3 {
                    goals.push(((r, col), d));
                }
            }
        }
        goals.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let Some(&(goal, _)) = goals.first() else { continue };
        let seen = reachable(&grid, goal);
        let gxy = grid.cell_center(goal.0, goal.1);
        let starts: Vec<(usize, usize)> = (0..grid.height)
            .flat_map(|r| (0..grid.width).map(move |c| (r, c)))
            .filter(|&(r, c)| seen[r * grid.width + c])
            .filter(|&(r, c)| {
                let p = grid.cell_center(r, c);
                (p[0] - gxy[0]).hypot(p[1] - gxy[1]) >= 2.0
            })
            .collect();
        if starts.is_empty() {
            continue;
        }
        let s = *pick(&mut rng, &starts);
        let sxy = grid.cell_center(s.0, s.1);
        let yaw = rng.random_range(-PI..PI);
        w.agent.base_pose = Some(BasePose { x: sxy[0], y: sxy[1], yaw });
        w.agent.reach_m = Some(REACH_M);
        w.agent.ee_pose = Pose::new(Vec3::new(sxy[0] + 0.3 * yaw.cos(), sxy[1] + 0.3 * yaw.sin(), 1.3), top_down(yaw));
        let mut spots = BTreeMap::new();
        spots.insert("goal".into(), gxy);
        spots.insert("start".into(), sxy);
        spots.insert(format!("home_{beaker}"), bxy);
        return Ok(SceneInstance { world: w, spots });
    }
    Err(SceneError::Infeasible(format!("no solvable navigation instance for seed {seed}")))
}
