mod common;

use labsim::nav::{inflate, plan, NavError, INFLATION_RADIUS_M};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn free_cells(g: &labsim::nav::OccupancyGrid) -> Vec<(usize, usize)> {
    (0..g.height).flat_map(|r| (0..g.width).map(move |c| (r, c))).filter(|&(r, c)| g.is_free(r, c)).collect()
}

#[test]
fn astar_matches_dijkstra_on_random_grids() {
    let mut found = 0;
    for seed in 0..100 {
        let g = common::random_grid(seed, 20, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        for radius in [0.0, INFLATION_RADIUS_M] {
            let inflated = common::inflate_brute(&g, radius);
            assert_eq!(inflate(&g, radius), inflated, "seed {seed}");
            let free = free_cells(&inflated);
            if free.len() < 2 {
                continue;
            }
            for _ in 0..5 {
                let s = free[rng.random_range(0..free.len())];
                let t = free[rng.random_range(0..free.len())];
                let got = plan(&g, g.cell_center(s.0, s.1), g.cell_center(t.0, t.1), radius);
                match (got, common::dijkstra(&inflated, s, t)) {
                    (Ok(p), Some((st, dg))) => {
                        assert_eq!((p.straight_steps, p.diagonal_steps), (st, dg), "seed {seed}");
                        assert_eq!(p.cost, st as f64 + dg as f64 * std::f64::consts::SQRT_2);
                        assert!(common::path_is_safe(&inflated, &p.cells));
                        assert_eq!((p.cells[0], *p.cells.last().unwrap()), (s, t));
                        found += 1;
                    }
                    (Err(NavError::Unreachable), None) => {}
                    (a, b) => panic!("seed {seed}: planner {a:?}, oracle {b:?}"),
                }
            }
        }
    }
    assert!(found > 300, "{found} solvable queries");
}
