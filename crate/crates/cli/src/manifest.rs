use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Written next to every output so a run can be repeated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_path: String,
    pub parameters: Value,
    pub outputs: Vec<String>,
    pub exit_code: i32,
    /// seconds since the Unix epoch
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: &str, config_path: &Path, parameters: Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_path: config_path.display().to_string(),
            parameters,
            outputs: Vec::new(),
            exit_code: 0,
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        }
    }
}
