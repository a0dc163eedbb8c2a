//! Occupancy maps, grid A* and waypoint following for the mobile base.

mod astar;
mod follow;

pub use astar::{plan, plan_on_inflated, NavPath};
pub use follow::{Follower, FollowerConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Rect2;
use crate::scene::SceneLayout;
use crate::world::WorldState;

/// Navigation grid pitch.
pub const NAV_CELL_M: f64 = 0.5;
/// Objects whose vertical extent meets this band are obstacles.
pub const HEIGHT_BAND_M: [f64; 2] = [0.1, 1.6];
/// Robot collision radius used for inflation.
pub const INFLATION_RADIUS_M: f64 = 0.6;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NavError {
    #[error("no path between start and goal")]
    Unreachable,
    #[error("invalid endpoint: {0}")]
    InvalidEndpoint(String),
    #[error("scene has no floor")]
    NoFloor,
    #[error("occupancy map: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Free,
    Occupied,
    Undefined,
}

impl Cell {
    pub fn code(self) -> u8 {
        match self {
            Cell::Free => 0,
            Cell::Occupied => 1,
            Cell::Undefined => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Cell> {
        match c {
            0 => Some(Cell::Free),
            1 => Some(Cell::Occupied),
            2 => Some(Cell::Undefined),
            _ => None,
        }
    }
}

/// Row-major grid; row index grows with y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub origin: [f64; 2],
    pub cell_m: f64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Cell>,
}

/// Sidecar JSON header for the ASCII map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapHeader {
    pub origin: [f64; 2],
    pub cell_m: f64,
    pub width: usize,
    pub height: usize,
    /// Always `"y_ascending"`: the first map row is the lowest y.
    pub row_order: String,
}

impl OccupancyGrid {
    pub fn new(origin: [f64; 2], cell_m: f64, width: usize, height: usize) -> Self {
        OccupancyGrid { origin, cell_m, width, height, cells: vec![Cell::Free; width * height] }
    }

    pub fn get(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, c: Cell) {
        self.cells[row * self.width + col] = c;
    }

    pub fn is_free(&self, row: usize, col: usize) -> bool {
        self.get(row, col) == Cell::Free
    }

    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        [self.origin[0] + (col as f64 + 0.5) * self.cell_m, self.origin[1] + (row as f64 + 0.5) * self.cell_m]
    }

    pub fn cell_rect(&self, row: usize, col: usize) -> Rect2 {
        let x0 = self.origin[0] + col as f64 * self.cell_m;
        let y0 = self.origin[1] + row as f64 * self.cell_m;
        Rect2::axis_aligned([x0, y0], [x0 + self.cell_m, y0 + self.cell_m])
    }

    /// Cell containing a world point, if on the grid.
    pub fn cell_of(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        let c = ((p[0] - self.origin[0]) / self.cell_m).floor();
        let r = ((p[1] - self.origin[1]) / self.cell_m).floor();
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 {
            return None;
        }
        Some((r as usize, c as usize))
    }

    pub fn count(&self, c: Cell) -> usize {
        self.cells.iter().filter(|&&x| x == c).count()
    }

    fn mark_footprint(&mut self, fp: &Rect2) {
        let (lo, hi) = fp.bounds();
        let c0 = (((lo[0] - self.origin[0]) / self.cell_m).floor().max(0.0)) as usize;
        let r0 = (((lo[1] - self.origin[1]) / self.cell_m).floor().max(0.0)) as usize;
        let c1 = (((hi[0] - self.origin[0]) / self.cell_m).ceil().max(0.0) as usize).min(self.width);
        let r1 = (((hi[1] - self.origin[1]) / self.cell_m).ceil().max(0.0) as usize).min(self.height);
        for r in r0..r1 {
            for c in c0..c1 {
                if self.get(r, c) == Cell::Free && fp.overlaps(&self.cell_rect(r, c), EPS) {
                    self.set(r, c, Cell::Occupied);
                }
            }
        }
    }

    pub fn header(&self) -> MapHeader {
        MapHeader {
            origin: self.origin,
            cell_m: self.cell_m,
            width: self.width,
            height: self.height,
            row_order: "y_ascending".into(),
        }
    }

    /// Plain ASCII PGM (`P2`, maxval 2): 0 free, 1 occupied, 2 undefined.
    pub fn to_pgm(&self) -> String {
        let mut s = format!("P2\n{} {}\n2\n", self.width, self.height);
        for r in 0..self.height {
            let row: Vec<String> = (0..self.width).map(|c| self.get(r, c).code().to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_pgm(pgm: &str, header: &MapHeader) -> Result<Self, NavError> {
        let bad = |m: &str| NavError::Format(m.to_string());
        let mut tokens = pgm.lines().map(|l| l.split('#').next().unwrap_or("")).flat_map(str::split_whitespace);
        if tokens.next() != Some("P2") {
            return Err(bad("missing P2 magic"));
        }
        let mut num = || -> Result<usize, NavError> {
            tokens.next().ok_or_else(|| bad("truncated"))?.parse::<usize>().map_err(|e| bad(&e.to_string()))
        };
        let (w, h, maxval) = (num()?, num()?, num()?);
        if w != header.width || h != header.height {
            return Err(bad("size disagrees with header"));
        }
        if maxval != 2 {
            return Err(bad("maxval must be 2"));
        }
        if !(header.cell_m > 0.0) {
            return Err(bad("cell_m must be positive"));
        }
        let mut g = OccupancyGrid::new(header.origin, header.cell_m, w, h);
        for i in 0..w * h {
            let v = num()?;
            g.cells[i] = Cell::from_code(v as u8).filter(|_| v <= 2).ok_or_else(|| bad("cell value out of range"))?;
        }
        if num().is_ok() {
            return Err(bad("trailing data"));
        }
        Ok(g)
    }
}

fn grid_over(floor: &Rect2, cell_m: f64) -> OccupancyGrid {
    let (lo, hi) = floor.bounds();
    let w = ((hi[0] - lo[0]) / cell_m - EPS).ceil().max(1.0) as usize;
    let h = ((hi[1] - lo[1]) / cell_m - EPS).ceil().max(1.0) as usize;
    let mut g = OccupancyGrid::new(lo, cell_m, w, h);
    for r in 0..h {
        for c in 0..w {
            if !floor.contains_point(g.cell_center(r, c), EPS) {
                g.set(r, c, Cell::Undefined);
            }
        }
    }
    g
}

fn in_band(z_lo: f64, z_hi: f64) -> bool {
    z_hi > HEIGHT_BAND_M[0] && z_lo < HEIGHT_BAND_M[1]
}

/// Projects every object inside the height band onto the floor grid.
/// Objects currently held by the agent are ignored.
pub fn build_occupancy(world: &WorldState, cell_m: f64) -> Result<OccupancyGrid, NavError> {
    let floor = world.floor.ok_or(NavError::NoFloor)?;
    let mut g = grid_over(&floor, cell_m);
    for o in world.objects.values().filter(|o| !o.held_by_agent) {
        let (lo, hi) = o.world_aabb();
        if in_band(lo.z, hi.z) {
            g.mark_footprint(&o.footprint());
        }
    }
    Ok(g)
}

/// Same as [`build_occupancy`] straight from a layout (assets stand on the floor).
pub fn build_occupancy_from_layout(layout: &SceneLayout, cell_m: f64) -> OccupancyGrid {
    let mut g = grid_over(&layout.room.rect(), cell_m);
    for p in &layout.placements {
        if in_band(0.0, p.height_m) {
            g.mark_footprint(&p.footprint());
        }
    }
    g
}

/// Blocks every free cell whose centre is within `radius_m` of a blocked
/// cell centre.
pub fn inflate(grid: &OccupancyGrid, radius_m: f64) -> OccupancyGrid {
    let mut out = grid.clone();
    if radius_m <= 0.0 {
        return out;
    }
    let reach = (radius_m / grid.cell_m).floor() as isize;
    let r2 = (radius_m / grid.cell_m).powi(2) + EPS;
    for r in 0..grid.height {
        for c in 0..grid.width {
            if grid.is_free(r, c) {
                continue;
            }
            for dr in -reach..=reach {
                for dc in -reach..=reach {
                    if ((dr * dr + dc * dc) as f64) > r2 {
                        continue;
                    }
                    let (rr, cc) = (r as isize + dr, c as isize + dc);
                    if rr < 0 || cc < 0 || rr >= grid.height as isize || cc >= grid.width as isize {
                        continue;
                    }
                    let (rr, cc) = (rr as usize, cc as usize);
                    if out.is_free(rr, cc) {
                        out.set(rr, cc, Cell::Occupied);
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::world::ObjectState;

    fn room(w: f64, h: f64) -> WorldState {
        let mut world = WorldState::new(0);
        world.floor = Some(Rect2::axis_aligned([0.0, 0.0], [w, h]));
        world
    }

    #[test]
    fn empty_room_is_all_free() {
        let g = build_occupancy(&room(10.0, 10.0), NAV_CELL_M).unwrap();
        assert_eq!((g.width, g.height), (20, 20));
        assert_eq!(g.count(Cell::Free), 400);
    }

    #[test]
    fn floor_mat_is_below_band() {
        let mut w = room(10.0, 10.0);
        w.add_object(ObjectState::new("mat", "mat", Vec3::new(5.0, 5.0, 0.025), Vec3::new(1.0, 1.0, 0.025)).fixed());
        assert_eq!(build_occupancy(&w, NAV_CELL_M).unwrap().count(Cell::Occupied), 0);
    }

    #[test]
    fn centred_cabinet_blocks_two_by_two() {
        let mut w = room(10.0, 10.0);
        w.add_object(ObjectState::new("cab", "cabinet", Vec3::new(5.0, 5.0, 0.9), Vec3::new(0.5, 0.5, 0.9)).fixed());
        let g = build_occupancy(&w, NAV_CELL_M).unwrap();
        assert_eq!(g.count(Cell::Occupied), 4);
        for (r, c) in [(9, 9), (9, 10), (10, 9), (10, 10)] {
            assert_eq!(g.get(r, c), Cell::Occupied);
        }
    }

    #[test]
    fn rotated_floor_marks_outside_undefined() {
        let mut w = WorldState::new(0);
        w.floor = Some(Rect2::new([5.0, 5.0], [3.0, 3.0], std::f64::consts::FRAC_PI_4));
        let g = build_occupancy(&w, NAV_CELL_M).unwrap();
        assert!(g.count(Cell::Undefined) > 0);
        assert_eq!(g.get(0, 0), Cell::Undefined);
    }

    #[test]
    fn inflation_of_single_cell() {
        let mut g = OccupancyGrid::new([0.0, 0.0], 0.5, 7, 7);
        g.set(3, 3, Cell::Occupied);
        let inf = inflate(&g, INFLATION_RADIUS_M);
        let blocked: Vec<(usize, usize)> =
            (0..7).flat_map(|r| (0..7).map(move |c| (r, c))).filter(|&(r, c)| !inf.is_free(r, c)).collect();
        assert_eq!(blocked, vec![(2, 3), (3, 2), (3, 3), (3, 4), (4, 3)]);
        assert_eq!(inflate(&g, 0.0), g);
        let free = OccupancyGrid::new([0.0, 0.0], 0.5, 5, 5);
        assert_eq!(inflate(&free, INFLATION_RADIUS_M), free);
    }

    #[test]
    fn pgm_round_trip() {
        let mut g = OccupancyGrid::new([1.0, -2.0], 0.5, 4, 3);
        g.set(0, 1, Cell::Occupied);
        g.set(2, 3, Cell::Undefined);
        let text = g.to_pgm();
        assert!(text.starts_with("P2\n4 3\n2\n"));
        assert_eq!(OccupancyGrid::from_pgm(&text, &g.header()).unwrap(), g);
        assert!(OccupancyGrid::from_pgm(&text.replace("P2", "P5"), &g.header()).is_err());
    }
}
