use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Percent with one decimal.
pub fn pct(v: f64) -> String {
    fixed(100.0 * v, 1)
}

pub fn fixed(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    // Avoid "-0.0" for values that round to zero.
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_owned()
    } else {
        s
    }
}

pub fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map(f).unwrap_or_default()
}

/// File-system safe version of a model label.
pub fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

/// Collects the files of one run and fingerprints them for the manifest.
pub struct Bundle {
    dir: PathBuf,
    outputs: BTreeMap<String, String>,
}

impl Bundle {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_owned(),
            outputs: BTreeMap::new(),
        })
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, &bytes).map_err(|e| CliError::io(&path, e))?;
        self.outputs.insert(name.to_owned(), hex(&Sha256::digest(&bytes)));
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("results serialize");
        text.push('\n');
        self.put(name, text.into_bytes())
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let write_err = |e: csv::Error| CliError::Io(format!("{name}: {e}"));
        w.write_record(header).map_err(write_err)?;
        for row in rows {
            w.write_record(row).map_err(write_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        self.put(name, bytes)
    }

    pub fn finish(self, mut manifest: Manifest) -> Result<(), CliError> {
        manifest.outputs = self.outputs;
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.dir.join(MANIFEST);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Everything needed to reproduce a run: the command with its resolved
/// arguments and the configuration it read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase", deny_unknown_fields)]
pub enum Invocation {
    Analyze {
        models: Vec<String>,
        seed: Option<u64>,
    },
    Calibrate {
        models: Vec<String>,
        alpha: f64,
        reps: Option<usize>,
        seed: Option<u64>,
    },
    Simulate {
        cutoffs: BTreeMap<String, f64>,
        reps: Option<usize>,
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Failure {
    pub scenario: String,
    pub model: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub invocation: Invocation,
    pub config: Value,
    pub versions: BTreeMap<String, String>,
    pub threads: usize,
    pub wall_time_s: f64,
    #[serde(default)]
    pub failures: Vec<Failure>,
    /// SHA-256 of every output file, by name.
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(invocation: Invocation, config: Value) -> Self {
        let versions = [
            ("bupd-cli".to_owned(), env!("CARGO_PKG_VERSION").to_owned()),
            ("bupd-core".to_owned(), bupd::VERSION.to_owned()),
        ]
        .into();
        Self {
            invocation,
            config,
            versions,
            threads: rayon::current_num_threads(),
            wall_time_s: 0.0,
            failures: Vec::new(),
            outputs: BTreeMap::new(),
        }
    }
}
