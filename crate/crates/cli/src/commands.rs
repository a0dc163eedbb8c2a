use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use labsim::bench::{
    aggregate, collect_batch, run_batch, run_episode, EpisodeResult, PolicySource, RunOptions, TaskRegistry, TaskSpec,
};
use labsim::chem::{
    mixture_color, mixture_ph, resolve_reactions, ExternalOracle, FallbackOracle, Mixture, OracleClientConfig,
    ReactionOracle, RuleTable, SubstanceDatabase, ENDPOINT_ENV,
};
use labsim::nav::{build_occupancy_from_layout, plan, MapHeader, NavError, OccupancyGrid, INFLATION_RADIUS_M, NAV_CELL_M};
use labsim::scene::{
    default_catalog, layout_to_world, place_all, validate_layout, Catalog, PlaceConfig, RoomSpec, SceneError,
};
use labsim::traj::{replay, EpisodeRecord, TrajError};
use labsim::world::snapshot_to_json;
use serde_json::json;

use crate::config::{require_file, RunConfig};
use crate::{ChemCmd, Cli, CliError, CollectArgs, Command, EvalArgs, NavCmd, Outcome, ReplayArgs, SceneCmd, SceneGenArgs};

const DEMO_MAP_PGM: &str = include_str!("../data/demo.occ.pgm");
const DEMO_MAP_HEADER: &str = include_str!("../data/demo.occ.json");
const DEMO_EPISODE: &str = include_str!("../data/demo_pick.ep.jsonl");
const DEFAULT_EVAL_EPISODES: u64 = 60;

pub fn run(cli: &Cli, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ctx = Ctx {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        workers: cli
            .workers
            .or(cfg.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1),
        cfg,
    };
    match &cli.command {
        Command::Scene(SceneCmd::Gen(a)) => scene_gen(&ctx, a),
        Command::Collect(a) => collect(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Nav(NavCmd::Plan(a)) => nav_plan(&ctx, a),
        Command::Chem(ChemCmd::Mix(a)) => chem_mix(&ctx, a),
        Command::Replay(a) => replay_cmd(a),
    }
}

struct Ctx<'a> {
    seed: u64,
    workers: usize,
    cfg: &'a RunConfig,
}

impl Ctx<'_> {
    fn pick(&self, flag: &Option<PathBuf>, from_cfg: &Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
        let p = flag.clone().or_else(|| from_cfg.clone());
        if let Some(p) = &p {
            require_file(p)?;
        }
        Ok(p)
    }

    fn substances(&self, flag: &Option<PathBuf>) -> Result<SubstanceDatabase, CliError> {
        match self.pick(flag, &self.cfg.substances)? {
            Some(p) => SubstanceDatabase::load(&p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
            None => Ok(SubstanceDatabase::builtin()),
        }
    }

    fn rules(&self, flag: &Option<PathBuf>, db: &SubstanceDatabase) -> Result<RuleTable, CliError> {
        match self.pick(flag, &self.cfg.reactions)? {
            Some(p) => RuleTable::load(&p, db).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
            None => Ok(RuleTable::builtin(db)),
        }
    }

    fn registry(&self, flag: &Option<PathBuf>) -> Result<TaskRegistry, CliError> {
        match self.pick(flag, &self.cfg.tasks)? {
            Some(p) => TaskRegistry::load(&p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
            None => Ok(TaskRegistry::builtin()),
        }
    }

    fn run_options(&self, subs: &Option<PathBuf>, reactions: &Option<PathBuf>) -> Result<RunOptions, CliError> {
        let db = self.substances(subs)?;
        let rules = self.rules(reactions, &db)?;
        Ok(RunOptions { rules: Arc::new(rules), db: Arc::new(db), ..Default::default() })
    }

    fn seeds(&self, n: u64) -> Vec<u64> {
        (0..n).map(|i| self.seed.wrapping_add(i)).collect()
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Env(format!("io failure: {}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn make_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn find_task<'a>(reg: &'a TaskRegistry, id: &str) -> Result<&'a TaskSpec, CliError> {
    reg.get(id)
        .ok_or_else(|| CliError::Usage(format!("unknown task `{id}`; available tasks: {}", reg.ids().join(", "))))
}

fn scene_gen(ctx: &Ctx, a: &SceneGenArgs) -> Result<Outcome, CliError> {
    let out = a.out.clone().or_else(|| ctx.cfg.out.clone()).ok_or_else(|| CliError::Usage("missing --out".into()))?;
    let catalog = match ctx.pick(&a.assets, &ctx.cfg.assets)? {
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(|e| io_failure(&p, e))?;
            Catalog::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => default_catalog(),
    };
    let db = ctx.substances(&a.substances)?;
    let room = match a.room.or(ctx.cfg.room) {
        Some([w, d]) => RoomSpec { max: [catalog.room.min[0] + w, catalog.room.min[1] + d], ..catalog.room.clone() },
        None => catalog.room.clone(),
    };
    room.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut pc = PlaceConfig::default();
    if let Some(k) = a.k.or(ctx.cfg.k) {
        if k == 0 {
            return Err(CliError::Usage("k must be at least 1".into()));
        }
        pc.k = k;
    }
    let w = ctx.cfg.weights.clone().unwrap_or_default();
    pc.score.w_edge = a.w_edge.or(w.edge).unwrap_or(pc.score.w_edge);
    pc.score.w_dist = a.w_dist.or(w.dist).unwrap_or(pc.score.w_dist);
    pc.score.w_orient = a.w_orient.or(w.orient).unwrap_or(pc.score.w_orient);

    let layout = place_all(&room, &catalog.assets, &pc, ctx.seed).map_err(|e| match e {
        SceneError::Infeasible(_) => CliError::Usage(format!("catalog does not fit the room: {e}")),
        e => CliError::Usage(e.to_string()),
    })?;
    let violations = validate_layout(&layout, &catalog.assets);
    let world = layout_to_world(&layout, &catalog.assets, &db, ctx.seed);
    let grid = build_occupancy_from_layout(&layout, NAV_CELL_M);

    make_dir(&out)?;
    let paths = [out.join("scene.json"), out.join("layout.json"), out.join("scene.occ.pgm"), out.join("scene.occ.json")];
    write(&paths[0], &snapshot_to_json(&world))?;
    write(&paths[1], &layout.to_json())?;
    write(&paths[2], &grid.to_pgm())?;
    write(&paths[3], &serde_json::to_string_pretty(&grid.header()).expect("header serializes"))?;

    let shown: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    let json = json!({
        "scene": shown[0], "layout": shown[1], "map": shown[2], "map_header": shown[3],
        "seed": ctx.seed, "method": layout.method, "score": layout.score,
        "placements": layout.placements.len(), "violations": violations.len(),
    });
    let mut text = format!(
        "placed {} assets ({:?}, score {:.4}), seed {}\n",
        layout.placements.len(),
        layout.method,
        layout.score,
        ctx.seed
    );
    for p in &shown {
        let _ = writeln!(text, "wrote {p}");
    }
    let failure = (!violations.is_empty()).then(|| format!("layout has {} violations: {violations:?}", violations.len()));
    Ok(Outcome { json, text, failure })
}

fn collect(ctx: &Ctx, a: &CollectArgs) -> Result<Outcome, CliError> {
    let reg = ctx.registry(&a.tasks)?;
    let task = find_task(&reg, &a.task)?;
    let n = a.episodes.or(ctx.cfg.episodes).ok_or_else(|| CliError::Usage("missing -n/--episodes".into()))?;
    if n == 0 {
        return Err(CliError::Usage("episode count must be at least 1".into()));
    }
    let out = a.out.clone().or_else(|| ctx.cfg.out.clone()).ok_or_else(|| CliError::Usage("missing --out".into()))?;
    make_dir(&out)?;
    let opts = ctx.run_options(&a.substances, &a.reactions)?;
    let m = collect_batch(task, &ctx.seeds(n), &opts, ctx.workers, &out, a.keep_failures)
        .map_err(|e| io_failure(&out, e))?;
    let manifest = out.join("manifest.json");
    let json = json!({
        "manifest": manifest.display().to_string(),
        "task": task.id, "seeds": [ctx.seed, ctx.seed.wrapping_add(n - 1)],
        "attempted": m.attempted, "failures": m.failures, "entries": m.episodes.len(),
        "failure_reasons": m.failure_reasons,
    });
    let mut text = format!(
        "{}: {} episodes, {} failed, {} written\nwrote {}\n",
        task.id,
        m.attempted,
        m.failures,
        m.episodes.len(),
        manifest.display()
    );
    for r in &m.failure_reasons {
        let _ = writeln!(text, "  {r}");
    }
    let failure = (m.failures > 0).then(|| format!("{} of {} episodes failed", m.failures, m.attempted));
    Ok(Outcome { json, text, failure })
}

enum PolicyArg {
    Scripted,
    Null,
    Replay(PathBuf),
}

fn parse_policy(s: &str) -> Result<PolicyArg, CliError> {
    match s {
        "scripted" => Ok(PolicyArg::Scripted),
        "null" => Ok(PolicyArg::Null),
        _ => match s.strip_prefix("replay:") {
            Some(p) if !p.is_empty() => Ok(PolicyArg::Replay(PathBuf::from(p))),
            _ => Err(CliError::Usage(format!("unknown policy `{s}`; expected scripted, null or replay:<file>"))),
        },
    }
}

/// Result row for a seed whose scene could not be built.
fn unbuildable(task: &TaskSpec, seed: u64, reason: String) -> EpisodeResult {
    EpisodeResult {
        task_id: task.id.clone(),
        level: task.level,
        split: task.split,
        seed,
        success: false,
        ticks_used: 0,
        stage_outcomes: vec![false; task.stages.len()],
        failure_reason: Some(reason),
        final_stage_done_tick: None,
    }
}

fn eval(ctx: &Ctx, a: &EvalArgs) -> Result<Outcome, CliError> {
    let reg = ctx.registry(&a.tasks)?;
    let policy = parse_policy(&a.policy)?;
    let opts = ctx.run_options(&a.substances, &a.reactions)?;

    let mut results = Vec::new();
    let mut replay_check = None;
    match &policy {
        PolicyArg::Replay(path) => {
            if !a.task.is_empty() || !a.level.is_empty() || a.all {
                return Err(CliError::Usage("a replay policy takes its task from the episode file".into()));
            }
            let rec = EpisodeRecord::read(path).map_err(|e| io_failure(path, e))?;
            let task = find_task(&reg, &rec.header.task_id)?;
            let recorded = rec.success();
            let seed = rec.header.seed;
            let r = run_episode(task, seed, &PolicySource::Replay(Arc::new(rec)), &opts)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            replay_check = Some((recorded, r.result.success));
            results.push(r.result);
        }
        PolicyArg::Scripted | PolicyArg::Null => {
            let mut tasks: Vec<&TaskSpec> = Vec::new();
            if a.all {
                tasks.extend(&reg.tasks);
            }
            for l in &a.level {
                let before = tasks.len();
                tasks.extend(reg.level(*l));
                if tasks.len() == before {
                    return Err(CliError::Usage(format!("no tasks at level {l}")));
                }
            }
            for id in &a.task {
                tasks.push(find_task(&reg, id)?);
            }
            tasks.sort_by(|x, y| (x.level, &x.id).cmp(&(y.level, &y.id)));
            tasks.dedup_by(|x, y| x.id == y.id);
            if tasks.is_empty() {
                return Err(CliError::Usage("choose tasks with --task, --level or --all".into()));
            }
            let n = a.episodes.or(ctx.cfg.episodes).unwrap_or(DEFAULT_EVAL_EPISODES);
            if n == 0 {
                return Err(CliError::Usage("episode count must be at least 1".into()));
            }
            let source = if matches!(policy, PolicyArg::Scripted) { PolicySource::Scripted } else { PolicySource::Null };
            let seeds = ctx.seeds(n);
            for task in tasks {
                for (seed, r) in seeds.iter().zip(run_batch(task, &seeds, &source, &opts, ctx.workers)) {
                    results.push(match r {
                        Ok(run) => run.result,
                        Err(e) => unbuildable(task, *seed, e.to_string()),
                    });
                }
            }
        }
    }

    let report = aggregate(&results);
    let table = report.to_table();
    let mut json = json!({ "policy": a.policy, "seed": ctx.seed, "report": report });
    let mut text = table.clone();
    if let Some(out) = a.out.clone().or_else(|| ctx.cfg.out.clone()) {
        make_dir(&out)?;
        let (pj, pt) = (out.join("report.json"), out.join("report.txt"));
        write(&pj, &report.to_json())?;
        write(&pt, &table)?;
        json["report_path"] = json!(pj.display().to_string());
        let _ = writeln!(text, "wrote {}\nwrote {}", pj.display(), pt.display());
    }

    let failure = if let Some((recorded, now)) = replay_check {
        json["recorded_success"] = json!(recorded);
        (recorded != now).then(|| format!("replayed success {now} differs from recorded {recorded}"))
    } else {
        let gate = a.min_success.or(ctx.cfg.min_success).or(matches!(policy, PolicyArg::Scripted).then_some(1.0));
        json["min_success"] = json!(gate);
        gate.and_then(|g| {
            let below: Vec<String> = report
                .tasks
                .iter()
                .filter(|t| t.success_rate < g)
                .map(|t| format!("{} {:.1}%", t.task_id, 100.0 * t.success_rate))
                .collect();
            (!below.is_empty()).then(|| format!("below {:.1}% success: {}", 100.0 * g, below.join(", ")))
        })
    };
    Ok(Outcome { json, text, failure })
}

fn load_map(a: &crate::NavPlanArgs) -> Result<OccupancyGrid, CliError> {
    let (pgm, header) = if a.map == "demo" && a.header.is_none() {
        (DEMO_MAP_PGM.to_string(), DEMO_MAP_HEADER.to_string())
    } else {
        let map = PathBuf::from(&a.map);
        let hp = a.header.clone().unwrap_or_else(|| map.with_extension("json"));
        require_file(&map)?;
        require_file(&hp)?;
        (fs::read_to_string(&map).map_err(|e| io_failure(&map, e))?, fs::read_to_string(&hp).map_err(|e| io_failure(&hp, e))?)
    };
    let header: MapHeader = serde_json::from_str(&header).map_err(|e| CliError::Usage(format!("map header: {e}")))?;
    OccupancyGrid::from_pgm(&pgm, &header).map_err(|e| CliError::Usage(e.to_string()))
}

fn nav_plan(ctx: &Ctx, a: &crate::NavPlanArgs) -> Result<Outcome, CliError> {
    let grid = load_map(a)?;
    let radius = a.radius.or(ctx.cfg.radius_m).unwrap_or(INFLATION_RADIUS_M);
    if !(radius >= 0.0) {
        return Err(CliError::Usage("radius must be non-negative".into()));
    }
    match plan(&grid, a.from, a.to, radius) {
        Ok(p) => {
            let json = json!({
                "waypoints": p.waypoints,
                "straight_steps": p.straight_steps,
                "diagonal_steps": p.diagonal_steps,
                "cost_cells": p.cost,
                "cost_m": p.cost * grid.cell_m,
            });
            let mut text = format!(
                "cost {} cells = {} + {}·√2 ({:.4} m), {} waypoints\n",
                p.cost,
                p.straight_steps,
                p.diagonal_steps,
                p.cost * grid.cell_m,
                p.waypoints.len()
            );
            for w in &p.waypoints {
                let _ = writeln!(text, "{:.3} {:.3}", w[0], w[1]);
            }
            Ok(Outcome { json, text, failure: None })
        }
        Err(NavError::Unreachable) => Ok(Outcome {
            json: json!({ "waypoints": null, "error": "unreachable" }),
            text: "no path\n".into(),
            failure: Some("goal is unreachable".into()),
        }),
        Err(e) => Err(CliError::Usage(e.to_string())),
    }
}

fn lookup<'a>(db: &'a SubstanceDatabase, name: &str) -> Result<&'a str, CliError> {
    db.records
        .values()
        .find(|r| r.id.eq_ignore_ascii_case(name))
        .or_else(|| db.records.values().find(|r| r.formula.eq_ignore_ascii_case(name)))
        .map(|r| r.id.as_str())
        .ok_or_else(|| CliError::Usage(format!("unknown substance `{name}`")))
}

fn composition(mix: &Mixture, db: &SubstanceDatabase) -> serde_json::Value {
    let rows: Vec<_> = mix
        .components
        .iter()
        .map(|c| {
            let r = &db.records[&c.substance_id];
            json!({ "id": c.substance_id, "formula": r.formula, "mol": c.amount_mol, "mass_g": c.amount_mol * r.molar_mass_g_per_mol })
        })
        .collect();
    json!(rows)
}

fn chem_mix(ctx: &Ctx, a: &crate::ChemMixArgs) -> Result<Outcome, CliError> {
    let db = ctx.substances(&a.substances)?;
    let rules = ctx.rules(&a.reactions, &db)?;
    let mut mix = Mixture::new();
    for arg in &a.components {
        let (name, amount) = arg
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected ID=AMOUNT, got `{arg}`")))?;
        let id = lookup(&db, name.trim())?;
        let x: f64 = amount.trim().parse().map_err(|e| CliError::Usage(format!("{arg}: {e}")))?;
        if !(x > 0.0 && x.is_finite()) {
            return Err(CliError::Usage(format!("{arg}: amount must be positive")));
        }
        let mol = if a.ml { Mixture::of_volume(id, x, &db).map_err(|e| CliError::Usage(e.to_string()))?.amount(id) } else { x };
        mix.add(id, mol);
    }

    let external = OracleClientConfig::from_env()
        .map(|c| FallbackOracle::new(ExternalOracle::http(c, Arc::new(db.clone())), rules.clone()));
    let oracle: &dyn ReactionOracle = match &external {
        Some(f) => f,
        None => &rules,
    };
    let (after, outcomes) = resolve_reactions(&mix, oracle, &db).map_err(|e| CliError::Env(e.to_string()))?;
    let fallbacks = external.as_ref().map(|f| f.fallback_log()).unwrap_or_default();
    let mass = |m: &Mixture| m.mass_g(&db).map_err(|e| CliError::Usage(e.to_string()));
    let (m0, m1) = (mass(&mix)?, mass(&after)?);
    let volume = after.volume_ml(&db).map_err(|e| CliError::Usage(e.to_string()))?;
    let ph = mixture_ph(&after, &db);
    let color = mixture_color(&after, &db).ok();

    let json = json!({
        "oracle": if external.is_some() { format!("external ({ENDPOINT_ENV})") } else { "rule_table".into() },
        "input": composition(&mix, &db),
        "reactions": outcomes,
        "result": composition(&after, &db),
        "mass_g": { "before": m0, "after": m1 },
        "volume_ml": volume, "ph": ph, "color_rgba": color,
        "fallbacks": fallbacks,
    });
    let mut text = String::new();
    for o in &outcomes {
        let _ = writeln!(text, "reaction {}", o.rule);
    }
    if outcomes.is_empty() {
        text.push_str("no reaction\n");
    }
    for c in &after.components {
        let r = &db.records[&c.substance_id];
        let _ = writeln!(text, "{:<22} {:<10} {:>12.6} mol {:>12.4} g", c.substance_id, r.formula, c.amount_mol, c.amount_mol * r.molar_mass_g_per_mol);
    }
    let _ = writeln!(text, "mass {m0:.6} g -> {m1:.6} g, volume {volume:.3} ml");
    if let Some(ph) = ph {
        let _ = writeln!(text, "pH {ph:.2}");
    }
    for f in &fallbacks {
        let _ = writeln!(text, "fell back to the rule table: {f}");
    }
    Ok(Outcome { json, text, failure: None })
}

fn replay_cmd(a: &ReplayArgs) -> Result<Outcome, CliError> {
    let rec = if a.episode == "demo" {
        EpisodeRecord::from_jsonl(DEMO_EPISODE).expect("shipped demo episode parses")
    } else {
        let p = PathBuf::from(&a.episode);
        require_file(&p)?;
        EpisodeRecord::read(&p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
    };
    let h = &rec.header;
    match replay(&rec) {
        Ok(_) => {
            let hash = rec.footer.as_ref().map(|f| f.final_state_sha256.clone());
            let json = json!({
                "task": h.task_id, "seed": h.seed, "frames": rec.frames.len(),
                "diverged": false, "recorded_success": rec.success(), "final_state_sha256": hash,
            });
            let text = format!("{} seed {}: {} frames, no divergence\n", h.task_id, h.seed, rec.frames.len());
            Ok(Outcome { json, text, failure: None })
        }
        Err(TrajError::ReplayDivergence { frame, tick, detail }) => {
            let json = json!({
                "task": h.task_id, "seed": h.seed, "frames": rec.frames.len(),
                "diverged": true, "frame": frame, "tick": tick, "detail": detail,
            });
            let msg = format!("diverged at tick {tick} (frame {frame}): {detail}");
            Ok(Outcome { json, text: format!("{} seed {}: {msg}\n", h.task_id, h.seed), failure: Some(msg) })
        }
        Err(e) => Err(CliError::Usage(e.to_string())),
    }
}
