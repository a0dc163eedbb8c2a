//! Reaction oracle backed by an external inference service.
//!
//! The service receives `{"components":[{"id":..,"mol":..}]}` via HTTP POST
//! and answers with a JSON array of rules in the `reactions.json` rule
//! schema. Every returned rule is validated against the substance database
//! before use; answers are cached per component set.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::Serialize;

use super::mixture::Mixture;
use super::reaction::{ReactionRule, RuleTable};
use super::substance::SubstanceDatabase;
use super::{ChemError, ReactionOracle};

pub const ENDPOINT_ENV: &str = "LABSIM_ORACLE_URL";
pub const TIMEOUT_ENV: &str = "LABSIM_ORACLE_TIMEOUT_MS";
const DEFAULT_TIMEOUT_MS: u64 = 2_000;

/// External rules may be off by at most this fraction of reactant mass.
pub const EXTERNAL_BALANCE_REL_TOL: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleClientConfig {
    pub endpoint: String,
    pub timeout: Duration,
}

impl OracleClientConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        OracleClientConfig { endpoint: endpoint.into(), timeout: Duration::from_millis(DEFAULT_TIMEOUT_MS) }
    }

    /// Reads the endpoint and timeout from the environment; `None` when no
    /// endpoint is configured.
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.trim().is_empty())?;
        let timeout = std::env::var(TIMEOUT_ENV)
            .ok()
            .and_then(|s| s.parse::<u64>().ok())
            .unwrap_or(DEFAULT_TIMEOUT_MS);
        Some(OracleClientConfig { endpoint, timeout: Duration::from_millis(timeout) })
    }
}

pub trait OracleTransport: Send + Sync {
    fn post_json(&self, endpoint: &str, body: &str, timeout: Duration) -> Result<String, String>;
}

#[cfg(feature = "http-oracle")]
pub struct HttpTransport;

#[cfg(feature = "http-oracle")]
impl OracleTransport for HttpTransport {
    fn post_json(&self, endpoint: &str, body: &str, timeout: Duration) -> Result<String, String> {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        let mut resp = agent
            .post(endpoint)
            .header("content-type", "application/json")
            .send(body)
            .map_err(|e| e.to_string())?;
        resp.body_mut().read_to_string().map_err(|e| e.to_string())
    }
}

#[derive(Serialize)]
struct QueryComponent<'a> {
    id: &'a str,
    mol: f64,
}

#[derive(Serialize)]
struct QueryBody<'a> {
    components: Vec<QueryComponent<'a>>,
}

pub struct ExternalOracle {
    config: OracleClientConfig,
    transport: Box<dyn OracleTransport>,
    db: Arc<SubstanceDatabase>,
    cache: Mutex<HashMap<String, Vec<ReactionRule>>>,
    requests: AtomicUsize,
}

impl ExternalOracle {
    pub fn new(config: OracleClientConfig, transport: Box<dyn OracleTransport>, db: Arc<SubstanceDatabase>) -> Self {
        ExternalOracle { config, transport, db, cache: Mutex::new(HashMap::new()), requests: AtomicUsize::new(0) }
    }

    #[cfg(feature = "http-oracle")]
    pub fn http(config: OracleClientConfig, db: Arc<SubstanceDatabase>) -> Self {
        Self::new(config, Box::new(HttpTransport), db)
    }

    /// Network requests issued so far (cache hits excluded).
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Queries the service for candidate rules for this mixture.
    pub fn query(&self, mix: &Mixture) -> Result<Vec<ReactionRule>, ChemError> {
        let key = mix.component_key();
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let body = QueryBody {
            components: mix.components.iter().map(|c| QueryComponent { id: &c.substance_id, mol: c.amount_mol }).collect(),
        };
        let body = serde_json::to_string(&body).map_err(|e| ChemError::OracleFailure(e.to_string()))?;
        self.requests.fetch_add(1, Ordering::SeqCst);
        let text = self
            .transport
            .post_json(&self.config.endpoint, &body, self.config.timeout)
            .map_err(ChemError::OracleFailure)?;
        let rules: Vec<ReactionRule> =
            serde_json::from_str(&text).map_err(|e| ChemError::OracleFailure(format!("malformed response: {e}")))?;
        for r in &rules {
            r.validate(&self.db, EXTERNAL_BALANCE_REL_TOL)
                .map_err(|e| ChemError::OracleFailure(format!("rejected rule: {e}")))?;
        }
        self.cache.lock().unwrap().insert(key, rules.clone());
        Ok(rules)
    }

    pub fn save_cache(&self, path: &Path) -> Result<(), ChemError> {
        let cache = self.cache.lock().unwrap();
        let sorted: std::collections::BTreeMap<_, _> = cache.iter().collect();
        let text = serde_json::to_string_pretty(&sorted).map_err(|e| ChemError::Io(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| ChemError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load_cache(&self, path: &Path) -> Result<(), ChemError> {
        let text = std::fs::read_to_string(path).map_err(|e| ChemError::Io(format!("{}: {e}", path.display())))?;
        let entries: HashMap<String, Vec<ReactionRule>> =
            serde_json::from_str(&text).map_err(|e| ChemError::Parse(e.to_string()))?;
        for rules in entries.values() {
            for r in rules {
                r.validate(&self.db, EXTERNAL_BALANCE_REL_TOL)?;
            }
        }
        self.cache.lock().unwrap().extend(entries);
        Ok(())
    }
}

/// Free-function form of [`ExternalOracle::query`].
pub fn external_oracle_query(mix: &Mixture, oracle: &ExternalOracle) -> Result<Vec<ReactionRule>, ChemError> {
    oracle.query(mix)
}

impl ReactionOracle for ExternalOracle {
    fn propose(&self, mix: &Mixture) -> Result<Vec<ReactionRule>, ChemError> {
        Ok(self.query(mix)?.into_iter().filter(|r| r.applicable(mix)).collect())
    }
}

/// External oracle first; any failure falls back to the rule table and is
/// logged.
pub struct FallbackOracle {
    pub primary: ExternalOracle,
    pub fallback: RuleTable,
    log: Mutex<Vec<String>>,
}

impl FallbackOracle {
    pub fn new(primary: ExternalOracle, fallback: RuleTable) -> Self {
        FallbackOracle { primary, fallback, log: Mutex::new(Vec::new()) }
    }

    pub fn fallback_log(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }
}

impl ReactionOracle for FallbackOracle {
    fn propose(&self, mix: &Mixture) -> Result<Vec<ReactionRule>, ChemError> {
        match self.primary.propose(mix) {
            Ok(rules) => Ok(rules),
            Err(e) => {
                self.log.lock().unwrap().push(format!("{}: {e}", mix.component_key()));
                self.fallback.propose(mix)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::reaction::resolve_reactions;

    struct Canned {
        reply: Result<String, String>,
        calls: Arc<AtomicUsize>,
    }

    impl OracleTransport for Canned {
        fn post_json(&self, _: &str, body: &str, _: Duration) -> Result<String, String> {
            assert!(body.starts_with(r#"{"components":["#));
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.reply.clone()
        }
    }

    fn oracle(reply: Result<String, String>) -> (ExternalOracle, Arc<AtomicUsize>) {
        let calls = Arc::new(AtomicUsize::new(0));
        let db = Arc::new(SubstanceDatabase::builtin());
        let t = Canned { reply, calls: calls.clone() };
        (ExternalOracle::new(OracleClientConfig::new("http://oracle.invalid"), Box::new(t), db), calls)
    }

    const NEUTRALIZATION: &str = r#"[{"reactants":[{"id":"hcl","coeff":1},{"id":"naoh","coeff":1}],
        "products":[{"id":"nacl","coeff":1},{"id":"water","coeff":1}],"effects":["color_change","exothermic"],"priority":10}]"#;

    #[test]
    fn repeated_mixture_hits_cache() {
        let (o, calls) = oracle(Ok(NEUTRALIZATION.into()));
        let mix = Mixture::new().with("hcl", 1.0).with("naoh", 1.0);
        o.query(&mix).unwrap();
        o.query(&mix.clone().with("hcl", 0.5)).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert_eq!(o.request_count(), 1);
    }

    #[test]
    fn unknown_substance_in_response_fails() {
        let reply = NEUTRALIZATION.replace("\"nacl\"", "\"unobtainium\"");
        let (o, _) = oracle(Ok(reply));
        let mix = Mixture::new().with("hcl", 1.0).with("naoh", 1.0);
        assert!(matches!(o.query(&mix), Err(ChemError::OracleFailure(_))));
    }

    #[test]
    fn unbalanced_response_fails() {
        let reply = NEUTRALIZATION.replace(r#"{"id":"water","coeff":1}"#, r#"{"id":"water","coeff":3}"#);
        let (o, _) = oracle(Ok(reply));
        let mix = Mixture::new().with("hcl", 1.0).with("naoh", 1.0);
        assert!(matches!(o.query(&mix), Err(ChemError::OracleFailure(_))));
    }

    #[test]
    fn malformed_response_fails() {
        let (o, _) = oracle(Ok("{not json".into()));
        assert!(matches!(o.query(&Mixture::new().with("hcl", 1.0)), Err(ChemError::OracleFailure(_))));
    }

    #[test]
    fn fallback_uses_rule_table_and_logs() {
        let (o, _) = oracle(Err("connection refused".into()));
        let db = SubstanceDatabase::builtin();
        let table = RuleTable::builtin(&db);
        let fb = FallbackOracle::new(o, table);
        let mix = Mixture::new().with("hcl", 1.0).with("naoh", 1.0);
        let (out, _) = resolve_reactions(&mix, &fb, &db).unwrap();
        assert_eq!(out.amount("nacl"), 1.0);
        assert!(!fb.fallback_log().is_empty());
    }

    #[test]
    fn cache_file_round_trip() {
        let (o, _) = oracle(Ok(NEUTRALIZATION.into()));
        o.query(&Mixture::new().with("hcl", 1.0).with("naoh", 1.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        o.save_cache(&path).unwrap();
        let (fresh, calls) = oracle(Err("offline".into()));
        fresh.load_cache(&path).unwrap();
        fresh.query(&Mixture::new().with("hcl", 2.0).with("naoh", 1.0)).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 0);
    }
}
