use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ChemError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Solid,
    Liquid,
    Gas,
    Aqueous,
}

impl Phase {
    /// Liquid and aqueous components occupy container volume.
    pub fn is_fluid(self) -> bool {
        matches!(self, Phase::Liquid | Phase::Aqueous)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstanceRecord {
    pub id: String,
    pub name: String,
    pub formula: String,
    pub color_rgba: [f64; 4],
    pub molar_mass_g_per_mol: f64,
    pub ph: Option<f64>,
    pub phase: Phase,
    pub density_g_per_ml: f64,
}

impl SubstanceRecord {
    pub fn validate(&self) -> Result<(), ChemError> {
        let bad = |why: &str| Err(ChemError::InvalidRecord { id: self.id.clone(), reason: why.to_string() });
        if !(self.molar_mass_g_per_mol > 0.0) {
            return bad("molar mass must be positive");
        }
        if !(self.density_g_per_ml > 0.0) {
            return bad("density must be positive");
        }
        if self.color_rgba.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return bad("color components must lie in [0, 1]");
        }
        if let Some(ph) = self.ph {
            if !(0.0..=14.0).contains(&ph) {
                return bad("pH must lie in [0, 14]");
            }
        }
        Ok(())
    }

    pub fn props(&self) -> MaterialProps {
        MaterialProps {
            molar_mass_g_per_mol: self.molar_mass_g_per_mol,
            ml_per_mol: self.molar_mass_g_per_mol / self.density_g_per_ml,
            color_rgba: self.color_rgba,
            ph: self.ph,
            phase: self.phase,
        }
    }
}

/// The per-substance numbers mixture arithmetic needs. A world snapshot
/// carries a table of these so it can be simulated without the database.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialProps {
    pub molar_mass_g_per_mol: f64,
    pub ml_per_mol: f64,
    pub color_rgba: [f64; 4],
    pub ph: Option<f64>,
    pub phase: Phase,
}

pub trait MaterialTable {
    fn material(&self, id: &str) -> Option<MaterialProps>;
}

impl MaterialTable for BTreeMap<String, MaterialProps> {
    fn material(&self, id: &str) -> Option<MaterialProps> {
        self.get(id).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstanceDatabase {
    #[serde(default)]
    pub source_note: String,
    #[serde(with = "records_as_array")]
    pub records: BTreeMap<String, SubstanceRecord>,
}

mod records_as_array {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, SubstanceRecord>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, SubstanceRecord>, D::Error> {
        let list = Vec::<SubstanceRecord>::deserialize(d)?;
        let mut out = BTreeMap::new();
        for r in list {
            let id = r.id.clone();
            if out.insert(id.clone(), r).is_some() {
                return Err(serde::de::Error::custom(format!("duplicate substance id `{id}`")));
            }
        }
        Ok(out)
    }
}

const DEFAULT_SUBSTANCES: &str = include_str!("../../data/substances.json");

impl SubstanceDatabase {
    pub fn from_json(text: &str) -> Result<Self, ChemError> {
        let db: SubstanceDatabase = serde_json::from_str(text).map_err(|e| ChemError::Parse(e.to_string()))?;
        for r in db.records.values() {
            r.validate()?;
        }
        Ok(db)
    }

    pub fn load(path: &Path) -> Result<Self, ChemError> {
        let text = std::fs::read_to_string(path).map_err(|e| ChemError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The shipped desk-scale database.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_SUBSTANCES).expect("shipped substances.json is valid")
    }

    pub fn get(&self, id: &str) -> Result<&SubstanceRecord, ChemError> {
        self.records.get(id).ok_or_else(|| ChemError::UnknownSubstance(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.records.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl MaterialTable for SubstanceDatabase {
    fn material(&self, id: &str) -> Option<MaterialProps> {
        self.records.get(id).map(SubstanceRecord::props)
    }
}
