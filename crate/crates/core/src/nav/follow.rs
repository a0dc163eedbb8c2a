use serde::{Deserialize, Serialize};

use crate::geom::wrap_angle;
use crate::world::BasePose;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FollowerConfig {
    pub k_lin: f64,
    pub v_max: f64,
    pub k_ang: f64,
    pub omega_max: f64,
    pub arrive_tol_m: f64,
    pub heading_tol_rad: f64,
}

impl Default for FollowerConfig {
    fn default() -> Self {
        FollowerConfig {
            k_lin: 2.0,
            v_max: 0.5,
            k_ang: 2.0,
            omega_max: 1.0,
            arrive_tol_m: 0.1,
            heading_tol_rad: 5f64.to_radians(),
        }
    }
}

/// Proportional waypoint pursuit, then an in-place turn to `target_heading`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Follower {
    pub waypoints: Vec<[f64; 2]>,
    pub target_heading: Option<f64>,
    pub next: usize,
    pub cfg: FollowerConfig,
}

impl Follower {
    pub fn new(waypoints: Vec<[f64; 2]>, target_heading: Option<f64>) -> Self {
        Follower { waypoints, target_heading, next: 0, cfg: FollowerConfig::default() }
    }

    /// Base velocity command `(vx, vy, ω)`, world frame.
    pub fn command(&mut self, base: &BasePose) -> [f64; 3] {
        while let Some(wp) = self.waypoints.get(self.next) {
            if (wp[0] - base.x).hypot(wp[1] - base.y) <= self.cfg.arrive_tol_m {
                self.next += 1;
            } else {
                break;
            }
        }
        if let Some(wp) = self.waypoints.get(self.next) {
            let (ex, ey) = (wp[0] - base.x, wp[1] - base.y);
            let (mut vx, mut vy) = (self.cfg.k_lin * ex, self.cfg.k_lin * ey);
            let v = vx.hypot(vy);
            if v > self.cfg.v_max {
                vx *= self.cfg.v_max / v;
                vy *= self.cfg.v_max / v;
            }
            return [vx, vy, 0.0];
        }
        let Some(h) = self.target_heading else { return [0.0; 3] };
        let err = wrap_angle(h - base.yaw);
        if err.abs() <= self.cfg.heading_tol_rad {
            return [0.0; 3];
        }
        [0.0, 0.0, (self.cfg.k_ang * err).clamp(-self.cfg.omega_max, self.cfg.omega_max)]
    }

    pub fn done(&self, base: &BasePose) -> bool {
        self.next >= self.waypoints.len()
            && self.target_heading.is_none_or(|h| wrap_angle(h - base.yaw).abs() <= self.cfg.heading_tol_rad)
    }
}
