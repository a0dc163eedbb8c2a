use crate::geom::Vec3;

use super::params::*;
use super::{EventKind, WorldError, WorldState};

/// Fraction of the full flow rate at a given tilt from vertical.
pub fn pour_factor(tilt: f64) -> f64 {
    ((tilt - POUR_ONSET_RAD) / (std::f64::consts::FRAC_PI_2 - POUR_ONSET_RAD)).clamp(0.0, 1.0)
}

impl WorldState {
    /// Lowest point of a container's rim, where liquid leaves it.
    pub fn lip_point(&self, id: &str) -> Option<Vec3> {
        let c = self.containers.get(id)?;
        let m = self.mouth_center(id)?;
        let up = self.objects[id].pose.orientation.rotate(Vec3::Z);
        let down = -Vec3::Z;
        let d = down - up * down.dot(up);
        if d.norm() < 1e-12 {
            return Some(m);
        }
        Some(m + d.normalized() * c.mouth_radius_m)
    }

    /// Container that would catch liquid falling from `point`.
    pub fn catching_container(&self, point: Vec3, exclude: &str) -> Option<String> {
        self.containers
            .iter()
            .filter(|(id, _)| id.as_str() != exclude && !self.objects[id.as_str()].toppled)
            .filter_map(|(id, c)| {
                let m = self.mouth_center(id)?;
                let d = point.planar_distance(m);
                (d <= c.mouth_radius_m && point.z > m.z).then_some((d, id.clone()))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, id)| id)
    }

    /// Transfers liquid out of a held, tilted container for `dt` seconds.
    ///
    /// Below the onset tilt this is a no-op. Liquid lands in the container
    /// under the lip, or is spilled.
    pub fn pour_tick(&mut self, source_id: &str, dt: f64) -> Result<(), WorldError> {
        if !self.containers.contains_key(source_id) {
            return Err(WorldError::NotAContainer(source_id.into()));
        }
        if self.agent.held_object_id.as_deref() != Some(source_id) {
            return Err(WorldError::NotHeld(source_id.into()));
        }
        let t = self.tick;
        self.pour_from(source_id, dt, t)
    }

    pub(super) fn pour_from(&mut self, source_id: &str, dt: f64, now: u64) -> Result<(), WorldError> {
        let factor = pour_factor(self.objects[source_id].pose.orientation.tilt());
        if factor <= 0.0 {
            return Ok(());
        }
        let available = self.containers[source_id].contents.volume_ml(&self.materials)?;
        if available <= 0.0 {
            return Ok(());
        }
        let want = (POUR_RATE_ML_PER_S * dt * factor).min(available);
        let lip = self.lip_point(source_id).expect("container has a lip");
        let target = self.catching_container(lip, source_id);

        let mut portion = self.containers.get_mut(source_id).unwrap().contents.take_fraction(want / available);
        let ml = portion.volume_ml(&self.materials)?;
        let Some(tid) = target else {
            self.spilled_ml += ml;
            self.emit(now, EventKind::Spill { source: source_id.into(), ml });
            return Ok(());
        };

        let room = (self.containers[&tid].capacity_ml - self.container_volume_ml(&tid)).max(0.0);
        if ml > room {
            let kept = portion.take_fraction(room / ml);
            let over = portion.volume_ml(&self.materials)?;
            let moved = kept.volume_ml(&self.materials)?;
            self.containers.get_mut(&tid).unwrap().contents.merge(&kept);
            self.spilled_ml += over;
            if moved > 0.0 {
                self.emit(now, EventKind::LiquidTransferred { source: source_id.into(), target: tid.clone(), ml: moved });
            }
            self.emit(now, EventKind::Overflow { target: tid.clone(), ml: over });
        } else {
            self.containers.get_mut(&tid).unwrap().contents.merge(&portion);
            self.emit(now, EventKind::LiquidTransferred { source: source_id.into(), target: tid.clone(), ml });
        }
        let color = crate::chem::mixture_color(&self.containers[&tid].contents, &self.materials)?;
        self.containers.get_mut(&tid).unwrap().color_rgba = color;
        Ok(())
    }
}
