use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use gridlines::rng::RNG_NAME;

/// Everything needed to replay a run: the command, its parameters, the
/// seed and generator, and what happened.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Value,
    pub seed: u64,
    pub rng: String,
    pub version: String,
    pub schedule: Vec<f64>,
    pub stage_resamples: Vec<u64>,
    pub retries: u32,
    pub wall_time_ms: u64,
    pub verdicts: Value,
    pub extra: Value,
}

impl RunManifest {
    pub fn new(command: &str, parameters: Value, seed: u64) -> Self {
        Self {
            command: command.into(),
            parameters,
            seed,
            rng: RNG_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            schedule: Vec::new(),
            stage_resamples: Vec::new(),
            retries: 0,
            wall_time_ms: 0,
            verdicts: Value::Null,
            extra: Value::Null,
        }
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).expect("manifest serializes") + "\n")
    }
}
