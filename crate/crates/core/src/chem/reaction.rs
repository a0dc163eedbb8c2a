use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mixture::{mixture_color, Mixture};
use super::substance::{MaterialTable, SubstanceDatabase};
use super::{ChemError, ReactionOracle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    ColorChange,
    GasEvolution,
    Precipitate,
    Exothermic,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub id: String,
    pub coeff: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReactionRule {
    #[serde(default)]
    pub name: String,
    pub reactants: Vec<Term>,
    pub products: Vec<Term>,
    #[serde(default)]
    pub effects: Vec<Effect>,
    #[serde(default)]
    pub priority: i32,
}

impl ReactionRule {
    /// Canonical text form, e.g. `hcl+naoh->h2o+nacl`. Used to break ties
    /// between equal-priority rules independently of oracle ordering.
    pub fn canonical_key(&self) -> String {
        let side = |terms: &[Term]| {
            let mut v: Vec<String> = terms
                .iter()
                .map(|t| if t.coeff == 1 { t.id.clone() } else { format!("{}{}", t.coeff, t.id) })
                .collect();
            v.sort();
            v.join("+")
        };
        format!("{}->{}", side(&self.reactants), side(&self.products))
    }

    /// Reactant and product masses per unit extent, in grams.
    pub fn masses(&self, db: &SubstanceDatabase) -> Result<(f64, f64), ChemError> {
        let side = |terms: &[Term]| -> Result<f64, ChemError> {
            terms.iter().try_fold(0.0, |acc, t| Ok(acc + t.coeff as f64 * db.get(&t.id)?.molar_mass_g_per_mol))
        };
        Ok((side(&self.reactants)?, side(&self.products)?))
    }

    /// Structural checks plus mass balance within `rel_tol` of reactant mass.
    pub fn validate(&self, db: &SubstanceDatabase, rel_tol: f64) -> Result<(), ChemError> {
        let invalid = |why: String| Err(ChemError::InvalidRule { rule: self.canonical_key(), reason: why });
        if self.reactants.is_empty() || self.products.is_empty() {
            return invalid("reactants and products must be non-empty".into());
        }
        if let Some(t) = self.reactants.iter().chain(&self.products).find(|t| t.coeff == 0) {
            return invalid(format!("coefficient of `{}` must be positive", t.id));
        }
        let (m_in, m_out) = self.masses(db)?;
        if (m_in - m_out).abs() > rel_tol * m_in {
            return invalid(format!("mass balance {m_in:.4} g -> {m_out:.4} g"));
        }
        Ok(())
    }

    pub fn applicable(&self, mix: &Mixture) -> bool {
        self.reactants.iter().all(|t| mix.amount(&t.id) > 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReactionOutcome {
    pub rule: String,
    pub consumed: Vec<(String, f64)>,
    pub produced: Vec<(String, f64)>,
    pub new_color_rgba: Option<[f64; 4]>,
    pub events: Vec<Effect>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleTable {
    pub rules: Vec<ReactionRule>,
}

const DEFAULT_REACTIONS: &str = include_str!("../../data/reactions.json");

impl RuleTable {
    pub fn from_json(text: &str, db: &SubstanceDatabase) -> Result<Self, ChemError> {
        let table: RuleTable = serde_json::from_str(text).map_err(|e| ChemError::Parse(e.to_string()))?;
        for r in &table.rules {
            r.validate(db, SEEDED_BALANCE_REL_TOL)?;
        }
        Ok(table)
    }

    pub fn load(path: &Path, db: &SubstanceDatabase) -> Result<Self, ChemError> {
        let text = std::fs::read_to_string(path).map_err(|e| ChemError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, db)
    }

    pub fn builtin(db: &SubstanceDatabase) -> Self {
        Self::from_json(DEFAULT_REACTIONS, db).expect("shipped reactions.json is valid")
    }
}

/// Seeded rules must balance to rounding in the database's molar masses.
pub const SEEDED_BALANCE_REL_TOL: f64 = 1e-3;

impl ReactionOracle for RuleTable {
    fn propose(&self, mix: &Mixture) -> Result<Vec<ReactionRule>, ChemError> {
        Ok(self.rules.iter().filter(|r| r.applicable(mix)).cloned().collect())
    }
}

const MAX_RULE_APPLICATIONS: usize = 10_000;

/// Applies oracle-proposed rules to completion, highest priority first.
///
/// Each application runs at the limiting-reagent extent, so it exhausts at
/// least one reactant. Ties in priority break on the rule's canonical key.
pub fn resolve_reactions<T: MaterialTable>(
    mix: &Mixture,
    oracle: &dyn ReactionOracle,
    db: &T,
) -> Result<(Mixture, Vec<ReactionOutcome>), ChemError> {
    let mut mix = mix.clone();
    mix.prune();
    let mut outcomes = Vec::new();
    for _ in 0..MAX_RULE_APPLICATIONS {
        let mut candidates: Vec<ReactionRule> =
            oracle.propose(&mix)?.into_iter().filter(|r| r.applicable(&mix)).collect();
        if candidates.is_empty() {
            return Ok((mix, outcomes));
        }
        candidates.sort_by(|a, b| b.priority.cmp(&a.priority).then_with(|| a.canonical_key().cmp(&b.canonical_key())));
        let rule = &candidates[0];
        outcomes.push(apply_rule(&mut mix, rule, db)?);
    }
    Err(ChemError::NonTerminating(MAX_RULE_APPLICATIONS))
}

fn apply_rule<T: MaterialTable>(mix: &mut Mixture, rule: &ReactionRule, db: &T) -> Result<ReactionOutcome, ChemError> {
    for t in rule.reactants.iter().chain(&rule.products) {
        db.material(&t.id).ok_or_else(|| ChemError::UnknownSubstance(t.id.clone()))?;
    }
    let (limiting, extent) = rule
        .reactants
        .iter()
        .map(|t| (t.id.as_str(), mix.amount(&t.id) / t.coeff as f64))
        .fold(("", f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });

    let mut consumed = Vec::new();
    for t in &rule.reactants {
        let mol = t.coeff as f64 * extent;
        if t.id == limiting {
            mix.set_amount(&t.id, 0.0);
        } else {
            mix.remove(&t.id, mol);
        }
        consumed.push((t.id.clone(), mol));
    }
    let mut produced = Vec::new();
    for t in &rule.products {
        let mol = t.coeff as f64 * extent;
        mix.add(&t.id, mol);
        produced.push((t.id.clone(), mol));
    }
    let new_color_rgba = if rule.effects.contains(&Effect::ColorChange) { Some(mixture_color(mix, db)?) } else { None };
    Ok(ReactionOutcome {
        rule: rule.canonical_key(),
        consumed,
        produced,
        new_color_rgba,
        events: rule.effects.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (SubstanceDatabase, RuleTable) {
        let db = SubstanceDatabase::builtin();
        let rules = RuleTable::builtin(&db);
        (db, rules)
    }

    #[test]
    fn single_substance_is_inert() {
        let (db, rules) = setup();
        let mix = Mixture::new().with("hcl", 1.0);
        let (out, outcomes) = resolve_reactions(&mix, &rules, &db).unwrap();
        assert_eq!(out, mix);
        assert!(outcomes.is_empty());
    }

    #[test]
    fn neutralization_equimolar() {
        let (db, rules) = setup();
        let mix = Mixture::new().with("hcl", 1.0).with("naoh", 1.0);
        let (out, outcomes) = resolve_reactions(&mix, &rules, &db).unwrap();
        assert_eq!(out.amount("nacl"), 1.0);
        assert_eq!(out.amount("water"), 1.0);
        assert_eq!(out.amount("hcl"), 0.0);
        assert_eq!(out.amount("naoh"), 0.0);
        assert_eq!(outcomes.len(), 1);
        assert!(outcomes[0].events.contains(&Effect::ColorChange));
        assert!(outcomes[0].new_color_rgba.is_some());
    }

    #[test]
    fn limiting_reagent_leaves_excess_acid() {
        let (db, rules) = setup();
        let mix = Mixture::new().with("hcl", 2.0).with("naoh", 1.0);
        let (out, _) = resolve_reactions(&mix, &rules, &db).unwrap();
        assert_eq!(out.amount("hcl"), 1.0);
        assert_eq!(out.amount("nacl"), 1.0);
        assert_eq!(out.amount("naoh"), 0.0);
        assert!(out.components.iter().all(|c| c.amount_mol > 0.0));
    }

    #[test]
    fn fixed_point_is_idempotent() {
        let (db, rules) = setup();
        let mix = Mixture::new().with("hcl", 0.7).with("naoh", 0.2).with("nahco3", 0.3).with("agno3", 0.1);
        let (once, _) = resolve_reactions(&mix, &rules, &db).unwrap();
        let (twice, outcomes) = resolve_reactions(&once, &rules, &db).unwrap();
        assert_eq!(once, twice);
        assert!(outcomes.is_empty());
    }

    #[test]
    fn zero_coefficient_rule_is_invalid() {
        let (db, _) = setup();
        let rule = ReactionRule {
            name: String::new(),
            reactants: vec![Term { id: "hcl".into(), coeff: 0 }],
            products: vec![Term { id: "nacl".into(), coeff: 1 }],
            effects: vec![],
            priority: 0,
        };
        assert!(rule.validate(&db, 0.01).is_err());
    }

    #[test]
    fn cyclic_rules_do_not_hang() {
        let (db, _) = setup();
        let fwd = ReactionRule {
            name: "fwd".into(),
            reactants: vec![Term { id: "nh3".into(), coeff: 1 }, Term { id: "hcl".into(), coeff: 1 }],
            products: vec![Term { id: "nh4cl".into(), coeff: 1 }],
            effects: vec![],
            priority: 0,
        };
        let back = ReactionRule {
            name: "back".into(),
            reactants: vec![Term { id: "nh4cl".into(), coeff: 1 }],
            products: vec![Term { id: "nh3".into(), coeff: 1 }, Term { id: "hcl".into(), coeff: 1 }],
            effects: vec![],
            priority: 0,
        };
        let table = RuleTable { rules: vec![fwd, back] };
        let mix = Mixture::new().with("nh3", 1.0).with("hcl", 1.0);
        assert!(matches!(resolve_reactions(&mix, &table, &db), Err(ChemError::NonTerminating(_))));
    }
}
