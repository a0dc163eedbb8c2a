use std::path::Path;
use std::process::{Command, Output};

use labsim::scene::{default_catalog, validate_layout, SceneLayout};
use labsim::traj::{DatasetManifest, EpisodeRecord};
use labsim::world::snapshot_from_json;
use serde_json::Value;

fn labsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labsim"))
        .args(args)
        .env_remove("LABSIM_ORACLE_URL")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("stdout is not one JSON document: {e}\n{}", stdout(o)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn scene_gen_writes_a_valid_deterministic_scene() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = labsim(&["scene", "gen", "--seed", "1", "--out", p(d)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let layout = SceneLayout::from_json(&std::fs::read_to_string(a.join("layout.json")).unwrap()).unwrap();
    let cat = default_catalog();
    assert!(validate_layout(&layout, &cat.assets).is_empty());
    assert_eq!(layout.placements.len(), cat.assets.len());
    let scene = std::fs::read_to_string(a.join("scene.json")).unwrap();
    let world = snapshot_from_json(&scene).unwrap();
    assert_eq!(world.objects.len(), cat.assets.len());
    for f in ["scene.json", "layout.json", "scene.occ.pgm", "scene.occ.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn scene_gen_into_unwritable_dir_is_an_environment_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "").unwrap();
    let o = labsim(&["scene", "gen", "--out", p(&file.join("sub"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("io failure"), "{}", stderr(&o));
}

#[test]
fn overpacked_room_fails_scene_gen() {
    let dir = tempfile::tempdir().unwrap();
    let o = labsim(&["scene", "gen", "--room", "1,1", "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no feasible layout"), "{}", stderr(&o));
}

#[test]
fn collect_writes_a_verified_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = labsim(&["collect", "--task", "pick", "-n", "5", "--seed", "10", "--out", p(dir.path()), "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&o)["entries"], 5);
    let m = DatasetManifest::from_json(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.episodes.len(), 5);
    assert_eq!(m.failures, 0);
    let seeds: Vec<u64> = m.episodes.iter().map(|e| e.seed).collect();
    assert_eq!(seeds, [10, 11, 12, 13, 14]);
    m.verify(dir.path()).unwrap();
}

#[test]
fn collect_is_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    labsim(&["collect", "--task", "stir", "-n", "4", "--seed", "3", "--workers", "1", "--out", p(&a)]);
    labsim(&["collect", "--task", "stir", "-n", "4", "--seed", "3", "--workers", "4", "--out", p(&b)]);
    let read = |d: &Path| std::fs::read_to_string(d.join("manifest.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn collect_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = labsim(&["collect", "--task", "nope", "-n", "2", "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("available tasks") && stderr(&o).contains("clean_beaker"));
    let o = labsim(&["collect", "--task", "pick", "-n", "0", "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
    let o = labsim(&["collect", "--task", "pick", "--out", p(dir.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn scripted_eval_on_level_one_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let o = labsim(&["eval", "--level", "1", "-n", "10", "--out", p(dir.path()), "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    let tasks = v["report"]["tasks"].as_array().unwrap();
    assert_eq!(tasks.len(), 10);
    assert!(tasks.iter().all(|t| t["success_rate"] == 1.0 && t["episodes"] == 10));
    let table = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(table.starts_with("task"));
    assert!(table.contains("SP") && table.contains("A7"));
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(saved, v["report"]);
}

#[test]
fn eval_threshold_sets_exit_code() {
    let o = labsim(&["eval", "--task", "pick", "--policy", "null", "-n", "2"]);
    assert_eq!(code(&o), 0);
    let o = labsim(&["eval", "--task", "pick", "--policy", "null", "-n", "2", "--min-success", "0.5"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("pick 0.0%"));
}

#[test]
fn eval_replay_matches_the_recording() {
    let dir = tempfile::tempdir().unwrap();
    labsim(&["collect", "--task", "pour", "-n", "1", "--seed", "4", "--out", p(dir.path())]);
    let ep = dir.path().join("pour-000004.ep.jsonl");
    let recorded = EpisodeRecord::read(&ep).unwrap().success();
    let o = labsim(&["eval", "--policy", &format!("replay:{}", p(&ep)), "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["recorded_success"], recorded);
    assert_eq!(v["report"]["tasks"][0]["success_rate"], if recorded { 1.0 } else { 0.0 });
}

#[test]
fn eval_environment_and_usage_errors() {
    let o = labsim(&["eval", "--task", "pick", "--tasks", "/nonexistent/tasks.json"]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&labsim(&["eval"])), 2);
    assert_eq!(code(&labsim(&["eval", "--task", "pick", "--policy", "magic"])), 2);
    assert_eq!(code(&labsim(&["eval", "--level", "9"])), 2);
}

#[test]
fn nav_plan_on_demo_map_corner_to_corner() {
    let o = labsim(&["nav", "plan", "--map", "demo", "--from", "0.25,0.25", "--to", "9.75,9.75", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["straight_steps"], 0);
    assert_eq!(v["diagonal_steps"], 19);
    assert!((v["cost_cells"].as_f64().unwrap() - 19.0 * 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(v["waypoints"].as_array().unwrap().len(), 20);
    let text = stdout(&labsim(&["nav", "plan", "--from", "0.25,0.25", "--to", "9.75,9.75"]));
    assert!(text.contains("0 + 19·√2"), "{text}");
}

#[test]
fn nav_plan_reads_map_files_and_reports_unreachable() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("wall.pgm");
    // A full wall across row 2 of a 5x5 map.
    let mut pgm = String::from("P2\n5 5\n2\n");
    for r in 0..5 {
        pgm.push_str(if r == 2 { "1 1 1 1 1\n" } else { "0 0 0 0 0\n" });
    }
    std::fs::write(&map, pgm).unwrap();
    std::fs::write(
        dir.path().join("wall.json"),
        r#"{"origin":[0,0],"cell_m":0.5,"width":5,"height":5,"row_order":"y_ascending"}"#,
    )
    .unwrap();
    let o = labsim(&["nav", "plan", "--map", p(&map), "--from", "0.25,0.25", "--to", "2.25,0.25", "--radius", "0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("cost 4 cells"));
    let o = labsim(&["nav", "plan", "--map", p(&map), "--from", "0.25,0.25", "--to", "0.25,2.25", "--radius", "0"]);
    assert_eq!(code(&o), 1);
    let o = labsim(&["nav", "plan", "--map", p(&dir.path().join("missing.pgm")), "--from", "0,0", "--to", "1,1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn chem_mix_neutralizes_equimolar_acid_and_base() {
    let o = labsim(&["chem", "mix", "HCl=1", "NaOH=1", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["oracle"], "rule_table");
    let result: Vec<(String, f64)> = v["result"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (c["id"].as_str().unwrap().to_string(), c["mol"].as_f64().unwrap()))
        .collect();
    assert_eq!(result, [("nacl".to_string(), 1.0), ("water".to_string(), 1.0)]);
    assert!((v["mass_g"]["before"].as_f64().unwrap() - v["mass_g"]["after"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn chem_mix_falls_back_when_the_external_oracle_is_down() {
    let o = Command::new(env!("CARGO_BIN_EXE_labsim"))
        .args(["chem", "mix", "hcl=1", "naoh=1", "--json"])
        .env("LABSIM_ORACLE_URL", "http://127.0.0.1:9/react")
        .env("LABSIM_ORACLE_TIMEOUT_MS", "300")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert!(v["oracle"].as_str().unwrap().starts_with("external"));
    assert!(!v["fallbacks"].as_array().unwrap().is_empty());
    assert_eq!(v["result"][0]["id"], "nacl");
}

#[test]
fn chem_mix_rejects_bad_components() {
    assert_eq!(code(&labsim(&["chem", "mix", "unobtainium=1"])), 2);
    assert_eq!(code(&labsim(&["chem", "mix", "hcl"])), 2);
    assert_eq!(code(&labsim(&["chem", "mix", "hcl=-1"])), 2);
}

#[test]
fn replay_of_demo_episode_has_no_divergence() {
    let o = labsim(&["replay", "demo"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("no divergence"));
}

#[test]
fn replay_detects_a_tampered_episode() {
    let dir = tempfile::tempdir().unwrap();
    labsim(&["collect", "--task", "pick", "-n", "1", "--out", p(dir.path())]);
    let ep = dir.path().join("pick-000000.ep.jsonl");
    let mut rec = EpisodeRecord::read(&ep).unwrap();
    rec.frames[40].action.ee_linear.z += 0.01;
    rec.write(&ep).unwrap();
    let o = labsim(&["replay", p(&ep), "--json"]);
    assert_eq!(code(&o), 1);
    let v = json(&o);
    assert_eq!(v["diverged"], true);
    assert!(v["frame"].as_u64().unwrap() <= 40);
}

#[test]
fn every_command_emits_one_json_document() {
    let dir = tempfile::tempdir().unwrap();
    let (s, c, e) = (dir.path().join("s"), dir.path().join("c"), dir.path().join("e"));
    let runs: Vec<Vec<&str>> = vec![
        vec!["scene", "gen", "--out", p(&s)],
        vec!["collect", "--task", "press", "-n", "1", "--out", p(&c)],
        vec!["eval", "--task", "press", "-n", "1", "--out", p(&e)],
        vec!["nav", "plan", "--from", "1,1", "--to", "2,3"],
        vec!["chem", "mix", "water=2"],
        vec!["replay", "demo"],
        vec!["collect", "--task", "nope", "-n", "1", "--out", p(&c)],
    ];
    for mut args in runs {
        args.push("--json");
        json(&labsim(&args));
    }
}

#[test]
fn seed_gives_end_to_end_determinism() {
    let run = |seed: &str| stdout(&labsim(&["eval", "--task", "transport_beaker", "-n", "3", "--seed", seed, "--json"]));
    assert_eq!(run("7"), run("7"));
    let dir = tempfile::tempdir().unwrap();
    let gen = |seed: &str, d: &str| {
        labsim(&["scene", "gen", "--seed", seed, "--out", p(&dir.path().join(d))]);
        std::fs::read(dir.path().join(d).join("layout.json")).unwrap()
    };
    assert_eq!(gen("5", "a"), gen("5", "b"));
    assert_ne!(gen("5", "a"), gen("6", "c"));
}

#[test]
fn config_file_supplies_defaults_and_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"seed": 21, "episodes": 2, "out": "ds"}"#).unwrap();
    let o = labsim(&["--config", p(&cfg), "collect", "--task", "pick", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&o)["seeds"], serde_json::json!([21, 22]));
    assert!(dir.path().join("ds/manifest.json").is_file());
    std::fs::write(&cfg, r#"{"seed": 21, "speed": 3}"#).unwrap();
    assert_eq!(code(&labsim(&["--config", p(&cfg), "chem", "mix", "water=1"])), 2);
    assert_eq!(code(&labsim(&["--config", p(&dir.path().join("none.json")), "replay", "demo"])), 2);
}
