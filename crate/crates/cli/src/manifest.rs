use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub subcommand: String,
    pub cli_version: &'static str,
    pub core_version: &'static str,
    pub seed: u64,
    pub config: C,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub wall_time_s: f64,
    pub outputs: Vec<PathBuf>,
}

pub fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

impl<C: Serialize> RunManifest<C> {
    pub fn new(subcommand: &str, seed: u64, config: C, started: u128) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            cli_version: env!("CARGO_PKG_VERSION"),
            core_version: varlap_core::VERSION,
            seed,
            config,
            started_unix_ms: started,
            finished_unix_ms: started,
            wall_time_s: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Stamps the finish time and writes `manifest.json` into `dir`; the
    /// manifest lists itself last.
    pub fn finish(mut self, dir: &Path) -> std::io::Result<PathBuf> {
        self.finished_unix_ms = now_ms();
        self.wall_time_s = (self.finished_unix_ms.saturating_sub(self.started_unix_ms)) as f64 / 1000.0;
        let path = dir.join("manifest.json");
        self.outputs.push(path.clone());
        std::fs::write(&path, serde_json::to_string_pretty(&self).map_err(std::io::Error::other)?)?;
        Ok(path)
    }
}
