//! Chemistry: substance database, container mixtures and reaction oracles.

mod external;
mod mixture;
mod reaction;
mod substance;

pub use external::{
    external_oracle_query, ExternalOracle, FallbackOracle, OracleClientConfig, OracleTransport, ENDPOINT_ENV,
    EXTERNAL_BALANCE_REL_TOL, TIMEOUT_ENV,
};
#[cfg(feature = "http-oracle")]
pub use external::HttpTransport;
pub use mixture::{mixture_color, mixture_ph, Component, Mixture};
pub use reaction::{resolve_reactions, Effect, ReactionOutcome, ReactionRule, RuleTable, Term, SEEDED_BALANCE_REL_TOL};
pub use substance::{MaterialProps, MaterialTable, Phase, SubstanceDatabase, SubstanceRecord};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChemError {
    #[error("unknown substance `{0}`")]
    UnknownSubstance(String),
    #[error("invalid substance record `{id}`: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("invalid reaction rule `{rule}`: {reason}")]
    InvalidRule { rule: String, reason: String },
    #[error("reaction oracle failure: {0}")]
    OracleFailure(String),
    #[error("reactions did not settle after {0} rule applications")]
    NonTerminating(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Decides which rules may fire for a mixture.
pub trait ReactionOracle: Send + Sync {
    fn propose(&self, mix: &Mixture) -> Result<Vec<ReactionRule>, ChemError>;
}
