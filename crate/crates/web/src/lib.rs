//! WebAssembly bindings for the browser demo: generate a lab layout, plan a
//! route across it, and mix chemicals.

use labsim::chem::{mixture_color, mixture_ph, resolve_reactions, Mixture, RuleTable, SubstanceDatabase};
use labsim::nav::{build_occupancy_from_layout, plan, Cell, INFLATION_RADIUS_M, NAV_CELL_M};
use labsim::scene::{default_catalog, place_all, validate_layout, PlaceConfig, RoomSpec, SceneLayout};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct SceneView {
    layout: SceneLayout,
    /// Occupancy codes row by row, lowest y first.
    grid: Vec<Vec<u8>>,
    grid_origin: [f64; 2],
    cell_m: f64,
    valid: bool,
}

/// Lays out the default catalog in a `width` x `depth` room.
pub fn scene_json(seed: u32, width: f64, depth: f64) -> Result<String, String> {
    let cat = default_catalog();
    let room = RoomSpec { max: [cat.room.min[0] + width, cat.room.min[1] + depth], ..cat.room.clone() };
    room.validate().map_err(|e| e.to_string())?;
    let layout = place_all(&room, &cat.assets, &PlaceConfig::default(), seed as u64).map_err(|e| e.to_string())?;
    let g = build_occupancy_from_layout(&layout, NAV_CELL_M);
    let grid = (0..g.height).map(|r| (0..g.width).map(|c| g.get(r, c).code()).collect()).collect();
    let valid = validate_layout(&layout, &cat.assets).is_empty();
    let view = SceneView { grid_origin: g.origin, cell_m: g.cell_m, grid, valid, layout };
    Ok(serde_json::to_string(&view).expect("view serializes"))
}

/// Shortest safe route between two floor points of a layout from [`scene_json`].
pub fn route_json(layout: &str, from: [f64; 2], to: [f64; 2]) -> Result<String, String> {
    let layout = SceneLayout::from_json(layout).map_err(|e| e.to_string())?;
    let g = build_occupancy_from_layout(&layout, NAV_CELL_M);
    let inflated = labsim::nav::inflate(&g, INFLATION_RADIUS_M);
    let blocked: Vec<Vec<bool>> =
        (0..g.height).map(|r| (0..g.width).map(|c| inflated.get(r, c) != Cell::Free).collect()).collect();
    let p = plan(&g, from, to, INFLATION_RADIUS_M).map_err(|e| e.to_string())?;
    Ok(json!({
        "waypoints": p.waypoints,
        "cost_m": p.cost * g.cell_m,
        "straight_steps": p.straight_steps,
        "diagonal_steps": p.diagonal_steps,
        "inflated": blocked,
    })
    .to_string())
}

/// Mixes `{"id": mol, ...}` and reacts it to completion.
pub fn mix_json(components: &str) -> Result<String, String> {
    let db = SubstanceDatabase::builtin();
    let rules = RuleTable::builtin(&db);
    let input: std::collections::BTreeMap<String, f64> = serde_json::from_str(components).map_err(|e| e.to_string())?;
    let mut mix = Mixture::new();
    for (id, mol) in input {
        db.get(&id).map_err(|e| e.to_string())?;
        if !(mol > 0.0 && mol.is_finite()) {
            return Err(format!("{id}: amount must be positive"));
        }
        mix.add(&id, mol);
    }
    let (after, outcomes) = resolve_reactions(&mix, &rules, &db).map_err(|e| e.to_string())?;
    let err = |e: labsim::chem::ChemError| e.to_string();
    Ok(json!({
        "reactions": outcomes.iter().map(|o| &o.rule).collect::<Vec<_>>(),
        "result": after.components.iter().map(|c| json!({"id": c.substance_id, "mol": c.amount_mol})).collect::<Vec<_>>(),
        "mass_g": [mix.mass_g(&db).map_err(err)?, after.mass_g(&db).map_err(err)?],
        "volume_ml": after.volume_ml(&db).map_err(err)?,
        "ph": mixture_ph(&after, &db),
        "color_rgba": mixture_color(&after, &db).ok(),
    })
    .to_string())
}

/// Substance ids and display names, for the mixing form.
pub fn substances_json() -> String {
    let db = SubstanceDatabase::builtin();
    let list: Vec<_> = db.records.values().map(|r| json!({"id": r.id, "name": r.name, "formula": r.formula})).collect();
    serde_json::to_string(&list).expect("list serializes")
}

#[wasm_bindgen]
pub fn generate_scene(seed: u32, width: f64, depth: f64) -> Result<String, JsError> {
    scene_json(seed, width, depth).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn plan_route(layout: &str, from_x: f64, from_y: f64, to_x: f64, to_y: f64) -> Result<String, JsError> {
    route_json(layout, [from_x, from_y], [to_x, to_y]).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn mix(components: &str) -> Result<String, JsError> {
    mix_json(components).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn substances() -> String {
    substances_json()
}
