//! Run manifests. The id hashes everything that determines the output
//! (command, configuration, seed, code version, precision, schema) and
//! leaves out the timestamp, so reruns of the same configuration produce
//! byte-identical tables.

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Bumped whenever a table's column set changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub id: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub version: String,
    pub precision: String,
    pub schema_version: u32,
    /// Output table name -> column list.
    pub tables: BTreeMap<String, Vec<String>>,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, config: BTreeMap<String, String>, seed: u64, precision: &str) -> Self {
        let version = env!("CARGO_PKG_VERSION").to_string();
        let id = manifest_id(command, &config, seed, &version, precision);
        RunManifest {
            id,
            command: command.to_string(),
            config,
            seed,
            version,
            precision: precision.to_string(),
            schema_version: SCHEMA_VERSION,
            tables: BTreeMap::new(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }
}

fn manifest_id(command: &str, config: &BTreeMap<String, String>, seed: u64, version: &str, precision: &str) -> String {
    let mut h = Sha256::new();
    let key = serde_json::json!({
        "command": command,
        "config": config,
        "seed": seed,
        "version": version,
        "precision": precision,
        "schema_version": SCHEMA_VERSION,
    });
    h.update(key.to_string().as_bytes());
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}
