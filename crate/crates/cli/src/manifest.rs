use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// SHA-256 of the compact JSON serialization of the effective config.
pub fn config_digest(config: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// The part of the manifest that result files carry. It depends only on the
/// effective config and the subcommand, never on when or how a run was
/// launched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub tool_version: String,
    pub command: String,
    pub config_digest: String,
    pub master_seed: u64,
}

/// Full provenance record, written to `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub stamp: Stamp,
    /// RFC 3339; `SOURCE_DATE_EPOCH` overrides the clock.
    pub timestamp: String,
    pub command_line: Vec<String>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn new(command: &str, config: &ExperimentConfig, command_line: Vec<String>) -> Self {
        Self {
            stamp: Stamp {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.to_string(),
                config_digest: config_digest(config),
                master_seed: config.seed,
            },
            timestamp: timestamp(),
            command_line,
            config: config.clone(),
        }
    }

    /// Whether the stored digest matches the stored config.
    pub fn is_consistent(&self) -> bool {
        config_digest(&self.config) == self.stamp.config_digest && self.config.seed == self.stamp.master_seed
    }
}

fn timestamp() -> String {
    let from_env = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0));
    from_env
        .unwrap_or_else(chrono::Utc::now)
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_tracks_config() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(config_digest(&a), config_digest(&b));
        b.seed += 1;
        assert_ne!(config_digest(&a), config_digest(&b));
        assert_eq!(config_digest(&a).len(), 64);
    }

    #[test]
    fn digest_recomputes_from_stored_manifest() {
        let m = RunManifest::new("ids", &ExperimentConfig::default(), vec!["wegnerlab".into()]);
        let text = serde_json::to_string(&m).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert!(back.is_consistent());
        assert_eq!(back, m);
    }

    #[test]
    fn timestamp_is_rfc3339() {
        let t = timestamp();
        assert!(chrono::DateTime::parse_from_rfc3339(&t).is_ok(), "{t}");
    }
}
