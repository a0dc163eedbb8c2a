use serde::{Deserialize, Serialize};

use super::substance::MaterialTable;
use super::ChemError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub substance_id: String,
    pub amount_mol: f64,
}

/// Container contents. Components are kept sorted by id, merged, and free
/// of zero amounts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub components: Vec<Component>,
    pub temperature_c: f64,
}

impl Default for Mixture {
    fn default() -> Self {
        Mixture { components: Vec::new(), temperature_c: 20.0 }
    }
}

impl Mixture {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, id: &str, mol: f64) -> Self {
        self.add(id, mol);
        self
    }

    /// Builds a mixture holding `ml` of a single fluid substance.
    pub fn of_volume(id: &str, ml: f64, table: &impl MaterialTable) -> Result<Self, ChemError> {
        let props = table.material(id).ok_or_else(|| ChemError::UnknownSubstance(id.to_string()))?;
        Ok(Mixture::new().with(id, ml / props.ml_per_mol))
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn amount(&self, id: &str) -> f64 {
        self.components
            .binary_search_by(|c| c.substance_id.as_str().cmp(id))
            .map(|i| self.components[i].amount_mol)
            .unwrap_or(0.0)
    }

    pub fn add(&mut self, id: &str, mol: f64) {
        match self.components.binary_search_by(|c| c.substance_id.as_str().cmp(id)) {
            Ok(i) => self.components[i].amount_mol += mol,
            Err(i) => self.components.insert(i, Component { substance_id: id.to_string(), amount_mol: mol }),
        }
        self.prune();
    }

    /// Removes `mol` of `id`, clamping at zero.
    pub fn remove(&mut self, id: &str, mol: f64) {
        if let Ok(i) = self.components.binary_search_by(|c| c.substance_id.as_str().cmp(id)) {
            let c = &mut self.components[i];
            c.amount_mol = (c.amount_mol - mol).max(0.0);
        }
        self.prune();
    }

    pub fn set_amount(&mut self, id: &str, mol: f64) {
        match self.components.binary_search_by(|c| c.substance_id.as_str().cmp(id)) {
            Ok(i) => self.components[i].amount_mol = mol,
            Err(i) => self.components.insert(i, Component { substance_id: id.to_string(), amount_mol: mol }),
        }
        self.prune();
    }

    pub fn prune(&mut self) {
        self.components.retain(|c| c.amount_mol > 0.0);
    }

    pub fn merge(&mut self, other: &Mixture) {
        let total_before = self.components.len();
        for c in &other.components {
            self.add(&c.substance_id, c.amount_mol);
        }
        if total_before == 0 {
            self.temperature_c = other.temperature_c;
        }
    }

    /// Splits off `fraction` (clamped to `[0, 1]`) of every component.
    pub fn take_fraction(&mut self, fraction: f64) -> Mixture {
        let f = fraction.clamp(0.0, 1.0);
        let mut out = Mixture { components: Vec::new(), temperature_c: self.temperature_c };
        if f >= 1.0 {
            std::mem::swap(&mut out.components, &mut self.components);
            return out;
        }
        for c in &mut self.components {
            let moved = c.amount_mol * f;
            c.amount_mol -= moved;
            out.components.push(Component { substance_id: c.substance_id.clone(), amount_mol: moved });
        }
        out.prune();
        self.prune();
        out
    }

    /// Fluid volume in millilitres (solids and gases take no container volume).
    pub fn volume_ml(&self, table: &impl MaterialTable) -> Result<f64, ChemError> {
        let mut v = 0.0;
        for c in &self.components {
            let p = table.material(&c.substance_id).ok_or_else(|| ChemError::UnknownSubstance(c.substance_id.clone()))?;
            if p.phase.is_fluid() {
                v += c.amount_mol * p.ml_per_mol;
            }
        }
        Ok(v)
    }

    pub fn mass_g(&self, table: &impl MaterialTable) -> Result<f64, ChemError> {
        let mut m = 0.0;
        for c in &self.components {
            let p = table.material(&c.substance_id).ok_or_else(|| ChemError::UnknownSubstance(c.substance_id.clone()))?;
            m += c.amount_mol * p.molar_mass_g_per_mol;
        }
        Ok(m)
    }

    /// Sorted, de-duplicated component ids joined with `+`.
    pub fn component_key(&self) -> String {
        self.components.iter().map(|c| c.substance_id.as_str()).collect::<Vec<_>>().join("+")
    }
}

/// Volume-weighted mean colour of every non-gaseous component. An empty
/// mixture is fully transparent.
pub fn mixture_color(mix: &Mixture, table: &impl MaterialTable) -> Result<[f64; 4], ChemError> {
    let mut acc = [0.0; 4];
    let mut total = 0.0;
    for c in &mix.components {
        let p = table.material(&c.substance_id).ok_or_else(|| ChemError::UnknownSubstance(c.substance_id.clone()))?;
        if p.phase == super::Phase::Gas {
            continue;
        }
        let w = c.amount_mol * p.ml_per_mol;
        total += w;
        for k in 0..4 {
            acc[k] += w * p.color_rgba[k];
        }
    }
    if total <= 0.0 {
        return Ok([0.0; 4]);
    }
    Ok(acc.map(|a| (a / total).clamp(0.0, 1.0)))
}

/// Volume-weighted mean pH over fluid components that carry one.
///
/// This is an attribute-level blend, not solution chemistry.
pub fn mixture_ph(mix: &Mixture, table: &impl MaterialTable) -> Option<f64> {
    let mut acc = 0.0;
    let mut total = 0.0;
    for c in &mix.components {
        let p = table.material(&c.substance_id)?;
        if let (true, Some(ph)) = (p.phase.is_fluid(), p.ph) {
            let w = c.amount_mol * p.ml_per_mol;
            acc += w * ph;
            total += w;
        }
    }
    (total > 0.0).then(|| (acc / total).clamp(0.0, 14.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::substance::{MaterialProps, Phase};
    use std::collections::BTreeMap;

    fn table() -> BTreeMap<String, MaterialProps> {
        let fluid = |color: [f64; 4], ph: Option<f64>| MaterialProps {
            molar_mass_g_per_mol: 10.0,
            ml_per_mol: 10.0,
            color_rgba: color,
            ph,
            phase: Phase::Liquid,
        };
        let mut t = BTreeMap::new();
        t.insert("red".into(), fluid([1.0, 0.0, 0.0, 1.0], Some(1.0)));
        t.insert("blue".into(), fluid([0.0, 0.0, 1.0, 1.0], Some(13.0)));
        t.insert("water".into(), fluid([0.9, 0.9, 1.0, 0.2], Some(7.0)));
        t.insert("oil".into(), fluid([0.9, 0.8, 0.2, 0.8], None));
        t
    }

    #[test]
    fn empty_mixture_is_transparent() {
        assert_eq!(mixture_color(&Mixture::new(), &table()).unwrap(), [0.0; 4]);
    }

    #[test]
    fn single_component_color_is_its_own() {
        let m = Mixture::new().with("red", 2.0);
        assert_eq!(mixture_color(&m, &table()).unwrap(), [1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn equal_volumes_average_colors() {
        let m = Mixture::new().with("red", 1.0).with("blue", 1.0);
        assert_eq!(mixture_color(&m, &table()).unwrap(), [0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn unknown_component_color_errors() {
        let m = Mixture::new().with("mystery", 1.0);
        assert!(matches!(mixture_color(&m, &table()), Err(ChemError::UnknownSubstance(_))));
    }

    #[test]
    fn ph_blends() {
        let t = table();
        assert_eq!(mixture_ph(&Mixture::new().with("water", 3.0), &t), Some(7.0));
        assert_eq!(mixture_ph(&Mixture::new().with("red", 1.0).with("blue", 1.0), &t), Some(7.0));
        assert_eq!(mixture_ph(&Mixture::new().with("oil", 1.0), &t), None);
    }

    #[test]
    fn zero_amounts_are_pruned() {
        let mut m = Mixture::new().with("red", 1.0).with("blue", 0.0);
        assert_eq!(m.components.len(), 1);
        m.remove("red", 5.0);
        assert!(m.is_empty());
    }

    #[test]
    fn take_fraction_conserves_amount() {
        let mut m = Mixture::new().with("red", 3.0).with("blue", 1.0);
        let part = m.take_fraction(0.25);
        assert_eq!(part.amount("red") + m.amount("red"), 3.0);
        assert_eq!(part.amount("blue") + m.amount("blue"), 1.0);
        let all = m.take_fraction(1.0);
        assert!(m.is_empty());
        assert_eq!(all.components.len(), 2);
    }
}
