//! Results file: one JSON object per line, appended.
//!
//! ```text
//! {"experiment":"image_size","config":{...},"result":{...},"pass":true,"unix_time":1760000000}
//! ```
//!
//! `config` holds the inputs of the run, `result` the measured values
//! (for Monte-Carlo runs: `estimate`, `std_error`, `trials`, `reference`),
//! and `pass` the outcome of the run's check, if it has one.

use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub config: Value,
    pub result: Value,
    pub pass: Option<bool>,
    pub unix_time: u64,
}

impl ResultRecord {
    pub fn new(experiment: &str, config: impl Serialize, result: impl Serialize, pass: Option<bool>) -> Self {
        let unix_time = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        ResultRecord {
            experiment: experiment.into(),
            config: serde_json::to_value(config).unwrap_or(Value::Null),
            result: serde_json::to_value(result).unwrap_or(Value::Null),
            pass,
            unix_time,
        }
    }
}

pub fn append(path: &Path, records: &[ResultRecord]) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(&out)?;
    file.sync_data()
}
