use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::CliResult;

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

/// Timings, headline statistics and artifact paths of one command invocation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// Wall-clock seconds per stage, in the order the stages ran.
    pub timings: Vec<(String, f64)>,
    pub statistics: BTreeMap<String, f64>,
    pub artifacts: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String, seed: u64) -> Self {
        Self {
            command: command.into(),
            config_hash,
            seed,
            ..Default::default()
        }
    }

    /// Runs `f` as a named stage and records its duration.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.push((name.into(), t.elapsed().as_secs_f64()));
        log::info!("stage={name} seconds={:.3}", self.timings.last().expect("just pushed").1);
        out
    }

    pub fn stat(&mut self, key: &str, value: f64) {
        self.statistics.insert(key.into(), value);
    }

    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        fs::create_dir_all(dir)?;
        let p = dir.join(RUN_MANIFEST_FILE);
        fs::write(&p, serde_json::to_string_pretty(self)?)?;
        Ok(p)
    }
}
