//! Run manifests and capture of warnings emitted while a command runs.

use std::fs;
use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

static WARNINGS: Mutex<Vec<String>> = Mutex::new(Vec::new());

/// Forwards to `env_logger` and keeps a copy of every warning.
struct CapturingLogger {
    inner: env_logger::Logger,
}

impl log::Log for CapturingLogger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::Level::Warn || self.inner.enabled(metadata)
    }

    fn log(&self, record: &log::Record) {
        if record.level() == log::Level::Warn {
            WARNINGS.lock().unwrap().push(record.args().to_string());
        }
        if self.inner.enabled(record.metadata()) {
            self.inner.log(record);
        }
    }

    fn flush(&self) {
        self.inner.flush();
    }
}

pub fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let inner = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default)).build();
    let max = inner.filter().max(log::LevelFilter::Warn);
    if log::set_boxed_logger(Box::new(CapturingLogger { inner })).is_ok() {
        log::set_max_level(max);
    }
}

pub fn take_warnings() -> Vec<String> {
    std::mem::take(&mut *WARNINGS.lock().unwrap())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of the tool version string, hashed the way git hashes a blob.
pub fn code_hash() -> String {
    let content = format!("wavegate {VERSION}");
    sha256_hex(format!("blob {}\0{content}", content.len()).as_bytes())
}

#[derive(Debug, Serialize)]
pub struct Fingerprint {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

pub fn fingerprint(path: &Path) -> Result<Fingerprint, wavegate::Error> {
    let data = fs::read(path)?;
    Ok(Fingerprint {
        path: path.display().to_string(),
        bytes: data.len() as u64,
        sha256: sha256_hex(&data),
    })
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub code_hash: String,
    pub started_at: String,
    pub finished_at: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<Fingerprint>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

pub struct ManifestBuilder {
    command: String,
    started: DateTime<Utc>,
    config: serde_json::Value,
    seeds: Vec<u64>,
    inputs: Vec<Fingerprint>,
    outputs: Vec<String>,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: impl Serialize) -> Self {
        take_warnings();
        Self {
            command: command.to_string(),
            started: Utc::now(),
            config: serde_json::to_value(config).expect("config serializes"),
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seeds.push(seed);
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self, wavegate::Error> {
        self.inputs.push(fingerprint(path)?);
        Ok(self)
    }

    pub fn output(&mut self, name: &str) -> &mut Self {
        self.outputs.push(name.to_string());
        self
    }

    pub fn finish(self) -> Manifest {
        Manifest {
            command: self.command,
            tool_version: VERSION.to_string(),
            code_hash: code_hash(),
            started_at: self.started.to_rfc3339_opts(SecondsFormat::Millis, true),
            finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            config: self.config,
            seeds: self.seeds,
            inputs: self.inputs,
            outputs: self.outputs,
            warnings: take_warnings(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn code_hash_is_stable() {
        assert_eq!(code_hash(), code_hash());
        assert_eq!(code_hash().len(), 64);
    }
}
