use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::run::EpisodeResult;
use super::task::Split;

/// Stage columns shown in the table.
pub const STAGE_COLUMNS: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: String,
    pub level: u8,
    pub split: Option<Split>,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Fraction of episodes satisfying each stage.
    pub stage_rates: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub tasks: Vec<TaskSummary>,
}

/// Per-task rates, ordered by (level, task id). Independent of the order
/// of `results`.
pub fn aggregate(results: &[EpisodeResult]) -> BenchReport {
    let mut groups: BTreeMap<(u8, &str), Vec<&EpisodeResult>> = BTreeMap::new();
    for r in results {
        groups.entry((r.level, r.task_id.as_str())).or_default().push(r);
    }
    let tasks = groups
        .into_iter()
        .map(|((level, id), rs)| {
            let n = rs.len();
            let stages = rs.iter().map(|r| r.stage_outcomes.len()).max().unwrap_or(0);
            let successes = rs.iter().filter(|r| r.success).count();
            TaskSummary {
                task_id: id.to_string(),
                level,
                split: rs[0].split,
                episodes: n,
                successes,
                success_rate: successes as f64 / n as f64,
                stage_rates: (0..stages)
                    .map(|k| rs.iter().filter(|r| r.stage_outcomes.get(k) == Some(&true)).count() as f64 / n as f64)
                    .collect(),
            }
        })
        .collect();
    BenchReport { tasks }
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn get(&self, task_id: &str) -> Option<&TaskSummary> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }

    /// Aligned text table: task, level, split, episodes, SP, A1..A7 (in %).
    /// Missing stages print `-`.
    pub fn to_table(&self) -> String {
        let mut header = vec!["task".to_string(), "lvl".into(), "split".into(), "n".into(), "SP".into()];
        header.extend((1..=STAGE_COLUMNS).map(|k| format!("A{k}")));
        let rows: Vec<Vec<String>> = self
            .tasks
            .iter()
            .map(|t| {
                let mut row = vec![
                    t.task_id.clone(),
                    t.level.to_string(),
                    t.split.map_or("-".into(), |s| s.to_string()),
                    t.episodes.to_string(),
                    pct(t.success_rate),
                ];
                row.extend((0..STAGE_COLUMNS).map(|k| t.stage_rates.get(k).map_or("-".into(), |&r| pct(r))));
                row
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap())
            .collect();
        let mut out = String::new();
        for row in std::iter::once(&header).chain(&rows) {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| if c == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(id: &str, seed: u64, success: bool, stages: &[bool]) -> EpisodeResult {
        EpisodeResult {
            task_id: id.into(),
            level: 1,
            split: None,
            seed,
            success,
            ticks_used: 10,
            stage_outcomes: stages.to_vec(),
            failure_reason: None,
            final_stage_done_tick: None,
        }
    }

    #[test]
    fn rates_and_order_independence() {
        let mut rs = vec![r("pick", 0, true, &[true]), r("pick", 1, false, &[false]), r("pour", 0, true, &[true, true])];
        let a = aggregate(&rs);
        rs.reverse();
        assert_eq!(a, aggregate(&rs));
        assert_eq!(a.get("pick").unwrap().success_rate, 0.5);
        assert_eq!(a.get("pour").unwrap().stage_rates, vec![1.0, 1.0]);
    }

    #[test]
    fn table_is_aligned() {
        let t = aggregate(&[r("pick", 0, true, &[true]), r("open_drawer", 0, false, &[true])]).to_table();
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].starts_with("task") && lines[0].ends_with("A7"));
        let sp = lines[0].find("SP").unwrap() + 2;
        for l in &lines[1..] {
            assert!(l[..sp].ends_with(".0"), "{l}");
        }
    }
}
