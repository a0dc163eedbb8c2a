//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub edge: Option<f64>,
    pub dist: Option<f64>,
    pub orient: Option<f64>,
}

/// Everything a command may read from a config file. Unknown keys are
/// rejected; every path must exist.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub assets: Option<PathBuf>,
    pub substances: Option<PathBuf>,
    pub reactions: Option<PathBuf>,
    pub tasks: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub episodes: Option<u64>,
    pub k: Option<usize>,
    pub weights: Option<Weights>,
    /// Room size override, `[width, depth]` in metres.
    pub room: Option<[f64; 2]>,
    pub min_success: Option<f64>,
    pub radius_m: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Env(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        // Relative paths are taken relative to the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: Option<PathBuf>| p.map(|p| if p.is_relative() { base.join(p) } else { p });
        let cfg = RunConfig {
            assets: rebase(cfg.assets),
            substances: rebase(cfg.substances),
            reactions: rebase(cfg.reactions),
            tasks: rebase(cfg.tasks),
            out: rebase(cfg.out),
            ..cfg
        };
        for p in [&cfg.assets, &cfg.substances, &cfg.reactions, &cfg.tasks].into_iter().flatten() {
            require_file(p)?;
        }
        Ok(cfg)
    }
}

pub fn require_file(p: &Path) -> Result<(), CliError> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::Env(format!("no such file: {}", p.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_and_missing_paths_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 3, "colour": 1}"#).unwrap();
        assert!(matches!(RunConfig::load(&p), Err(CliError::Usage(_))));
        std::fs::write(&p, r#"{"seed": "x"}"#).unwrap();
        assert!(matches!(RunConfig::load(&p), Err(CliError::Usage(_))));
        std::fs::write(&p, r#"{"tasks": "nope.json"}"#).unwrap();
        assert!(matches!(RunConfig::load(&p), Err(CliError::Env(_))));
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t.json"), "[]").unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 3, "tasks": "t.json", "weights": {"edge": 0.5}}"#).unwrap();
        let c = RunConfig::load(&p).unwrap();
        assert_eq!(c.tasks, Some(dir.path().join("t.json")));
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.weights.unwrap().edge, Some(0.5));
    }
}
