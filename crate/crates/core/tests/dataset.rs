use std::sync::Arc;

use labsim::bench::{collect_batch, run_batch, PolicySource, RunOptions, TaskRegistry};
use labsim::traj::{replay, DatasetManifest, EpisodeRecord, TrajError};

#[test]
fn pick_collection_of_150() {
    let task = TaskRegistry::builtin().get("pick").unwrap().clone();
    let seeds: Vec<u64> = (0..150).collect();
    let dir = tempfile::tempdir().unwrap();
    let m = collect_batch(&task, &seeds, &RunOptions::default(), 8, dir.path(), false).unwrap();
    assert_eq!((m.episodes.len(), m.attempted, m.failures), (150, 150, 0));
    assert_eq!(m.task_counts["pick"], 150);
    m.verify(dir.path()).unwrap();
    let on_disk = DatasetManifest::from_json(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk, m);

    // Same seeds, same bytes.
    let dir2 = tempfile::tempdir().unwrap();
    let m2 = collect_batch(&task, &seeds, &RunOptions::default(), 3, dir2.path(), false).unwrap();
    assert_eq!(m, m2);

    for e in m.episodes.iter().step_by(15) {
        let rec = EpisodeRecord::read(&dir.path().join(&e.file)).unwrap();
        replay(&rec).unwrap();
        // Pick phase labels run 0..6 without going back.
        let idx: Vec<usize> = rec
            .frames
            .iter()
            .filter_map(|f| f.phase.as_ref())
            .map(|p| p.split(':').nth(1).unwrap().parse().unwrap())
            .collect();
        assert!(idx.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!((idx[0], *idx.last().unwrap()), (0, 6));
    }
}

#[test]
fn unbuildable_scene_is_a_reported_failure() {
    let mut task = TaskRegistry::builtin().get("transport_beaker").unwrap().clone();
    // Nine beakers do not fit in the small front region.
    let mut scene = serde_json::to_value(&task.scene).unwrap();
    let items = scene["items"].as_array_mut().unwrap();
    for i in 0..9 {
        items.push(serde_json::json!({"kind": "beaker", "id": format!("x{i}"), "region": "front"}));
    }
    task.scene = serde_json::from_value(scene).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = collect_batch(&task, &[0], &RunOptions::default(), 1, dir.path(), false).unwrap();
    assert_eq!((m.episodes.len(), m.attempted, m.failures), (0, 1, 1));
    assert!(m.failure_reasons[0].contains("no free spot"));
}

#[test]
fn failures_are_kept_only_on_request() {
    let mut task = TaskRegistry::builtin().get("pick").unwrap().clone();
    task.time_limit_ticks = 30;
    let dir = tempfile::tempdir().unwrap();
    let m = collect_batch(&task, &[0, 1], &RunOptions::default(), 2, dir.path(), false).unwrap();
    assert_eq!((m.episodes.len(), m.failures), (0, 2));
    let m = collect_batch(&task, &[0, 1], &RunOptions::default(), 2, dir.path(), true).unwrap();
    assert_eq!(m.episodes.len(), 2);
    assert!(m.episodes.iter().all(|e| !e.success));
}

#[test]
fn tampered_frame_diverges_at_or_before_it() {
    let task = TaskRegistry::builtin().get("pour_liquid").unwrap().clone();
    let opts = RunOptions { record: true, ..Default::default() };
    let run = run_batch(&task, &[2], &PolicySource::Scripted, &opts, 1).remove(0).unwrap();
    let rec = run.record.unwrap();
    let back = EpisodeRecord::from_jsonl(&rec.to_jsonl()).unwrap();
    assert_eq!(back, rec);
    for k in [0, 57, rec.frames.len() / 2] {
        let mut bad = rec.clone();
        bad.frames[k].action.ee_linear.z += 1e-3;
        match replay(&bad) {
            Err(TrajError::ReplayDivergence { frame, .. }) => assert!(frame <= k),
            other => panic!("{other:?}"),
        }
    }
    let again = run_batch(&task, &[2], &PolicySource::Replay(Arc::new(rec.clone())), &RunOptions::default(), 1);
    assert!(again[0].as_ref().unwrap().result.success);
}
