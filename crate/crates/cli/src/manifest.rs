//! Run manifest: every command writes `manifest.json` into its output
//! directory recording the tool version, the command, the seed and the full
//! resolved configuration, so a run can be reproduced byte for byte.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliResult;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Fully resolved configuration (flags merged over config file).
    pub config: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            tool: "scenclust".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.config.insert(key.to_string(), value.into());
    }

    pub fn write<P: AsRef<Path>>(&self, dir: P) -> CliResult<()> {
        let path = dir.as_ref().join("manifest.json");
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)
            .map_err(|e| crate::error::CliError::Failure(e.to_string()))?;
        writeln!(&mut w)?;
        w.flush()?;
        Ok(())
    }
}
