use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";
const DEFAULT_DIR: &str = "delaystab-out";

/// Seventeen significant digits, exponent form, locale independent.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn flag(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

/// `--out`, then a config-file directory, then `DELAYSTAB_OUT`, then a
/// fixed default.
pub fn resolve_dir(cli: Option<&Path>, config: Option<&str>) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(c) = config {
        return PathBuf::from(c);
    }
    match std::env::var_os("DELAYSTAB_OUT") {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_DIR),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
struct OutputFile {
    file: String,
    rows: usize,
}

/// Collects what a command wrote; the manifest itself goes last.
pub struct Run {
    dir: PathBuf,
    command: &'static str,
    input_hash: String,
    seed: Option<u64>,
    started: Instant,
    files: Vec<OutputFile>,
    details: Map<String, Value>,
}

impl Run {
    pub fn start(
        dir: PathBuf,
        command: &'static str,
        input: &[u8],
        seed: Option<u64>,
    ) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            command,
            input_hash: sha256_hex(input),
            seed,
            started: Instant::now(),
            files: Vec::new(),
            details: Map::new(),
        })
    }

    pub fn detail(&mut self, key: &str, value: impl Into<Value>) {
        self.details.insert(key.to_string(), value.into());
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.files.push(OutputFile {
            file: name.to_string(),
            rows: rows.len(),
        });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("json values serialize");
        fs::write(self.dir.join(name), text + "\n")?;
        self.files.push(OutputFile {
            file: name.to_string(),
            rows: 1,
        });
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf> {
        let manifest = serde_json::json!({
            "command": self.command,
            "input_sha256": self.input_hash,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "outputs": self.files,
            "details": self.details,
            "wall_clock_seconds": self.started.elapsed().as_secs_f64(),
        });
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("json values serialize");
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

/// JSON number, or `null` for non-finite values.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}
