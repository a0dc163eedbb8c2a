use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{inflate, NavError, OccupancyGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NavPath {
    /// Cell centres, world metres.
    pub waypoints: Vec<[f64; 2]>,
    /// `(row, col)` of each waypoint.
    pub cells: Vec<(usize, usize)>,
    pub straight_steps: u32,
    pub diagonal_steps: u32,
    /// `straight_steps + diagonal_steps·√2`, in cells.
    pub cost: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Steps {
    straight: u32,
    diagonal: u32,
}

impl Steps {
    fn value(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }
}

struct Open {
    f: f64,
    g: Steps,
    idx: usize,
}

impl PartialEq for Open {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Open {
    // Min-heap on f, then larger g (deeper), then index.
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then_with(|| self.g.value().total_cmp(&o.g.value())).then_with(|| o.idx.cmp(&self.idx))
    }
}

fn octile(a: (usize, usize), b: (usize, usize)) -> f64 {
    let dr = a.0.abs_diff(b.0);
    let dc = a.1.abs_diff(b.1);
    let (lo, hi) = (dr.min(dc), dr.max(dc));
    (hi - lo) as f64 + lo as f64 * std::f64::consts::SQRT_2
}

const MOVES: [(isize, isize); 8] = [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)];

/// Inflates by `radius_m`, then runs [`plan_on_inflated`].
pub fn plan(grid: &OccupancyGrid, start_m: [f64; 2], goal_m: [f64; 2], radius_m: f64) -> Result<NavPath, NavError> {
    plan_on_inflated(&inflate(grid, radius_m), start_m, goal_m)
}

/// 8-connected A* with the octile heuristic. Diagonal moves need both
/// adjacent orthogonal cells free.
pub fn plan_on_inflated(grid: &OccupancyGrid, start_m: [f64; 2], goal_m: [f64; 2]) -> Result<NavPath, NavError> {
    let endpoint = |p: [f64; 2], what: &str| -> Result<(usize, usize), NavError> {
        let cell = grid.cell_of(p).ok_or_else(|| NavError::InvalidEndpoint(format!("{what} {p:?} is off the map")))?;
        if !grid.is_free(cell.0, cell.1) {
            return Err(NavError::InvalidEndpoint(format!("{what} cell {cell:?} is blocked")));
        }
        Ok(cell)
    };
    let start = endpoint(start_m, "start")?;
    let goal = endpoint(goal_m, "goal")?;

    let w = grid.width;
    let n = w * grid.height;
    let mut best: Vec<Option<Steps>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    let s_idx = start.0 * w + start.1;
    let g_idx = goal.0 * w + goal.1;
    let zero = Steps { straight: 0, diagonal: 0 };
    best[s_idx] = Some(zero);
    heap.push(Open { f: octile(start, goal), g: zero, idx: s_idx });

    while let Some(Open { g, idx, .. }) = heap.pop() {
        if best[idx].is_some_and(|b| b.value() < g.value()) {
            continue;
        }
        if idx == g_idx {
            break;
        }
        let (r, c) = (idx / w, idx % w);
        for (dr, dc) in MOVES {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr >= grid.height as isize || nc >= w as isize {
                continue;
            }
            let (nr, nc) = (nr as usize, nc as usize);
            if !grid.is_free(nr, nc) {
                continue;
            }
            let diag = dr != 0 && dc != 0;
            if diag && (!grid.is_free(r, nc) || !grid.is_free(nr, c)) {
                continue;
            }
            let ng = if diag {
                Steps { straight: g.straight, diagonal: g.diagonal + 1 }
            } else {
                Steps { straight: g.straight + 1, diagonal: g.diagonal }
            };
            let ni = nr * w + nc;
            if best[ni].is_none_or(|b| ng.value() < b.value()) {
                best[ni] = Some(ng);
                parent[ni] = idx;
                heap.push(Open { f: ng.value() + octile((nr, nc), goal), g: ng, idx: ni });
            }
        }
    }

    let Some(total) = best[g_idx] else { return Err(NavError::Unreachable) };
    let mut cells = vec![goal];
    let mut cur = g_idx;
    while cur != s_idx {
        cur = parent[cur];
        cells.push((cur / w, cur % w));
    }
    cells.reverse();
    Ok(NavPath {
        waypoints: cells.iter().map(|&(r, c)| grid.cell_center(r, c)).collect(),
        cells,
        straight_steps: total.straight,
        diagonal_steps: total.diagonal,
        cost: total.value(),
    })
}
