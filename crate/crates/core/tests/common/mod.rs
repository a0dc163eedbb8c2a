//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use std::time::Duration;

use labsim::chem::{Mixture, OracleTransport, RuleTable};
use labsim::nav::{Cell, OccupancyGrid};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Standard atomic weights, g/mol.
const ATOMIC_WEIGHTS: &[(&str, f64)] = &[
    ("H", 1.008),
    ("C", 12.011),
    ("N", 14.007),
    ("O", 15.999),
    ("Na", 22.990),
    ("S", 32.065),
    ("Cl", 35.453),
    ("K", 39.098),
    ("Ca", 40.078),
    ("Mn", 54.938),
    ("Fe", 55.845),
    ("Cu", 63.546),
    ("Ag", 107.868),
    ("Ba", 137.327),
];

/// Element counts of a formula such as `Cu(OH)2`.
pub fn element_counts(formula: &str) -> BTreeMap<String, u32> {
    fn number(cs: &[char], i: &mut usize) -> u32 {
        let start = *i;
        while *i < cs.len() && cs[*i].is_ascii_digit() {
            *i += 1;
        }
        if start == *i {
            1
        } else {
            cs[start..*i].iter().collect::<String>().parse().unwrap()
        }
    }
    fn group(cs: &[char], i: &mut usize) -> BTreeMap<String, u32> {
        let mut out = BTreeMap::new();
        while *i < cs.len() {
            match cs[*i] {
                '(' => {
                    *i += 1;
                    let inner = group(cs, i);
                    let n = number(cs, i);
                    for (k, v) in inner {
                        *out.entry(k).or_insert(0) += v * n;
                    }
                }
                ')' => {
                    *i += 1;
                    return out;
                }
                c if c.is_ascii_uppercase() => {
                    let mut sym = c.to_string();
                    *i += 1;
                    while *i < cs.len() && cs[*i].is_ascii_lowercase() {
                        sym.push(cs[*i]);
                        *i += 1;
                    }
                    let n = number(cs, i);
                    *out.entry(sym).or_insert(0) += n;
                }
                c => panic!("unexpected `{c}` in formula"),
            }
        }
        out
    }
    let cs: Vec<char> = formula.chars().collect();
    group(&cs, &mut 0)
}

pub fn molar_mass(formula: &str) -> f64 {
    element_counts(formula)
        .iter()
        .map(|(el, n)| {
            let w = ATOMIC_WEIGHTS.iter().find(|(s, _)| s == el).unwrap_or_else(|| panic!("no weight for {el}")).1;
            w * *n as f64
        })
        .sum()
}

/// Blocks free cells whose centre lies within `radius_m` of a blocked
/// cell's centre, by brute force over all pairs.
pub fn inflate_brute(g: &OccupancyGrid, radius_m: f64) -> OccupancyGrid {
    let mut out = g.clone();
    for r in 0..g.height {
        for c in 0..g.width {
            if !g.is_free(r, c) {
                continue;
            }
            let p = g.cell_center(r, c);
            let near = (0..g.height).any(|rr| {
                (0..g.width).any(|cc| {
                    let q = g.cell_center(rr, cc);
                    !g.is_free(rr, cc) && (p[0] - q[0]).hypot(p[1] - q[1]) <= radius_m + 1e-9
                })
            });
            if near {
                out.set(r, c, Cell::Occupied);
            }
        }
    }
    out
}

/// Shortest 8-connected path cost in cells, `(straight, diagonal)` counts,
/// with diagonals allowed only when both side cells are free.
pub fn dijkstra(g: &OccupancyGrid, s: (usize, usize), t: (usize, usize)) -> Option<(u32, u32)> {
    if !g.is_free(s.0, s.1) || !g.is_free(t.0, t.1) {
        return None;
    }
    let value = |(a, b): (u32, u32)| a as f64 + b as f64 * std::f64::consts::SQRT_2;
    let key = |c: (u32, u32)| (value(c) * 1e9).round() as u64;
    let mut best: BTreeMap<(usize, usize), (u32, u32)> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    best.insert(s, (0, 0));
    heap.push(Reverse((0u64, s, (0u32, 0u32))));
    while let Some(Reverse((k, u, cost))) = heap.pop() {
        if best.get(&u).is_some_and(|&b| key(b) < k) {
            continue;
        }
        if u == t {
            return Some(cost);
        }
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (nr, nc) = (u.0 as i64 + dr, u.1 as i64 + dc);
                if nr < 0 || nc < 0 || nr >= g.height as i64 || nc >= g.width as i64 {
                    continue;
                }
                let v = (nr as usize, nc as usize);
                if !g.is_free(v.0, v.1) {
                    continue;
                }
                let diag = dr != 0 && dc != 0;
                if diag && (!g.is_free(u.0, v.1) || !g.is_free(v.0, u.1)) {
                    continue;
                }
                let nc2 = if diag { (cost.0, cost.1 + 1) } else { (cost.0 + 1, cost.1) };
                if best.get(&v).is_none_or(|&b| value(nc2) < value(b) - 1e-12) {
                    best.insert(v, nc2);
                    heap.push(Reverse((key(nc2), v, nc2)));
                }
            }
        }
    }
    None
}

/// 20% obstacle grid of `n`×`n` half-metre cells from a seed.
pub fn random_grid(seed: u64, n: usize, density: f64) -> OccupancyGrid {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = OccupancyGrid::new([0.0, 0.0], 0.5, n, n);
    for r in 0..n {
        for c in 0..n {
            if rng.random_bool(density) {
                g.set(r, c, Cell::Occupied);
            }
        }
    }
    g
}

/// Whether consecutive path cells are 8-adjacent, free and never cut a
/// blocked corner.
pub fn path_is_safe(g: &OccupancyGrid, cells: &[(usize, usize)]) -> bool {
    cells.iter().all(|&(r, c)| g.is_free(r, c))
        && cells.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            let (dr, dc) = (a.0.abs_diff(b.0), a.1.abs_diff(b.1));
            dr <= 1 && dc <= 1 && (dr, dc) != (0, 0) && (dr + dc < 2 || (g.is_free(a.0, b.1) && g.is_free(b.0, a.1)))
        })
}

/// One to five random components; half the time seeded with the reactants
/// of a random rule so that reactions are common.
pub fn random_mixture(rng: &mut ChaCha8Rng, ids: &[String], rules: &RuleTable) -> Mixture {
    let mut m = Mixture::new();
    if rng.random_bool(0.5) {
        for t in &rules.rules[rng.random_range(0..rules.rules.len())].reactants {
            m.add(&t.id, rng.random_range(0.001..2.0));
        }
    }
    for _ in 0..rng.random_range(1..=5) {
        m.add(&ids[rng.random_range(0..ids.len())], rng.random_range(0.001..2.0));
    }
    m
}

/// Reaction service stand-in that answers every query with a fixed rule
/// list, after checking the request shape.
pub struct SeededService(pub String);

impl OracleTransport for SeededService {
    fn post_json(&self, _endpoint: &str, body: &str, _timeout: Duration) -> Result<String, String> {
        let v: serde_json::Value = serde_json::from_str(body).map_err(|e| e.to_string())?;
        let ok = v["components"].as_array().is_some_and(|cs| cs.iter().all(|c| c["id"].is_string() && c["mol"].is_number()));
        if !ok {
            return Err(format!("bad request body {body}"));
        }
        Ok(self.0.clone())
    }
}
