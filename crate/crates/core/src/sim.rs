//! World stepping with chemistry: liquid that lands in a container reacts.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::chem::{mixture_color, resolve_reactions, ReactionOracle, ReactionOutcome, RuleTable, SubstanceDatabase};
use crate::world::{AgentAction, EventKind, WorldError, WorldState};

/// Steps a world and settles reactions in every container that received
/// liquid during the tick. Molar masses and colours come from the world's
/// own material table.
#[derive(Clone)]
pub struct Simulator {
    pub world: WorldState,
    pub oracle: Option<Arc<dyn ReactionOracle>>,
}

impl Simulator {
    pub fn new(world: WorldState, oracle: Option<Arc<dyn ReactionOracle>>) -> Self {
        Simulator { world, oracle }
    }

    /// World plus the shipped rule table.
    pub fn with_builtin_rules(world: WorldState) -> Self {
        let rules = RuleTable::builtin(&SubstanceDatabase::builtin());
        Simulator { world, oracle: Some(Arc::new(rules)) }
    }

    pub fn step(&mut self, action: &AgentAction) -> Result<(), WorldError> {
        let mark = self.world.event_log.len();
        self.world.step(action)?;
        let targets: BTreeSet<String> = self.world.event_log[mark..]
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::LiquidTransferred { target, .. } => Some(target.clone()),
                _ => None,
            })
            .collect();
        for t in targets {
            self.react(&t)?;
        }
        Ok(())
    }

    /// Resolves reactions in one container to a fixed point.
    pub fn react(&mut self, container_id: &str) -> Result<Vec<ReactionOutcome>, WorldError> {
        let Some(oracle) = &self.oracle else { return Ok(Vec::new()) };
        let c = self.world.containers.get(container_id).ok_or_else(|| WorldError::NotAContainer(container_id.into()))?;
        let (mixed, outcomes) = resolve_reactions(&c.contents, oracle.as_ref(), &self.world.materials)?;
        if outcomes.is_empty() {
            return Ok(outcomes);
        }
        let color = mixture_color(&mixed, &self.world.materials)?;
        let c = self.world.containers.get_mut(container_id).unwrap();
        c.contents = mixed;
        c.color_rgba = color;
        let tick = self.world.tick;
        for o in &outcomes {
            self.world.emit(tick, EventKind::Reaction { container: container_id.into(), rule: o.rule.clone() });
        }
        Ok(outcomes)
    }
}
