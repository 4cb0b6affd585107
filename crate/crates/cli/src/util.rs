//! Shared CLI plumbing: measure parsing, config-file merging, the run
//! manifest, and deterministic number formatting.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use ncl_core::measure::LambdaMeasure;

/// Process exit codes: 2 usage/config, 3 hypothesis violation, 4 input
/// mismatch, 5 numerical integrity, 1 anything else.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError { code: 2, message: msg.into() }
    }
    pub fn hypothesis(msg: impl Into<String>) -> Self {
        CliError { code: 3, message: msg.into() }
    }
    pub fn mismatch(msg: impl Into<String>) -> Self {
        CliError { code: 4, message: msg.into() }
    }
    pub fn other(msg: impl Into<String>) -> Self {
        CliError { code: 1, message: msg.into() }
    }
}

impl From<ncl_core::Error> for CliError {
    fn from(e: ncl_core::Error) -> Self {
        use ncl_core::Error::*;
        let code = match &e {
            InvalidArgument(_) => 2,
            Domain(_) => 3,
            Integrity(_) | Search(_) => 5,
            Convergence { .. } => 1,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::other(format!("io error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Parse a measure argument: the shorthand `beta:0.5` or a JSON object.
pub fn parse_measure(arg: &str) -> CliResult<LambdaMeasure> {
    let measure = if let Some(alpha) = arg.strip_prefix("beta:") {
        let alpha: f64 = alpha
            .parse()
            .map_err(|_| CliError::usage(format!("cannot parse beta parameter in '{arg}'")))?;
        LambdaMeasure::beta(alpha).map_err(CliError::from)?
    } else {
        let m: LambdaMeasure = serde_json::from_str(arg)
            .map_err(|e| CliError::usage(format!("invalid measure JSON '{arg}': {e}")))?;
        m.validate()?;
        m
    };
    Ok(measure)
}

/// Resolve the measure from `--measure` / `--measure-file` / config, in that
/// order of precedence.
pub fn resolve_measure(
    flag: Option<&str>,
    file: Option<&Path>,
    cfg: &ConfigFile,
) -> CliResult<(LambdaMeasure, Option<PathBuf>)> {
    if let Some(arg) = flag {
        return Ok((parse_measure(arg)?, None));
    }
    if let Some(path) = file {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read measure file {path:?}: {e}")))?;
        return Ok((parse_measure(text.trim())?, Some(path.to_path_buf())));
    }
    if let Some(v) = cfg.get_str("measure") {
        return Ok((parse_measure(&v)?, None));
    }
    Err(CliError::usage("no measure given: use --measure, --measure-file, or the config file"))
}

/// Flat-key JSON config file; flags override its entries.
#[derive(Default)]
pub struct ConfigFile {
    map: Map<String, Value>,
    pub path: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else { return Ok(ConfigFile::default()) };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {path:?}: {e}")))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {path:?} is not valid JSON: {e}")))?;
        let Value::Object(map) = value else {
            return Err(CliError::usage(format!("config {path:?} must be a flat JSON object")));
        };
        Ok(ConfigFile { map, path: Some(path.to_path_buf()) })
    }

    pub fn get_str(&self, key: &str) -> Option<String> {
        match self.map.get(key) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(other) => Some(other.to_string()),
            None => None,
        }
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.map.get(key).and_then(Value::as_f64)
    }

    pub fn get_u64(&self, key: &str) -> Option<u64> {
        self.map.get(key).and_then(Value::as_u64)
    }

    pub fn get_bool(&self, key: &str) -> Option<bool> {
        self.map.get(key).and_then(Value::as_bool)
    }
}

/// Every artifact embeds this: the command, the fully resolved config, the
/// tool version, a timestamp (`SOURCE_DATE_EPOCH` overrides the clock so
/// reruns can be byte-identical), and the SHA-256 of each input file.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub timestamp: u64,
    pub config: Value,
    pub input_hashes: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config: Value, inputs: &[&Path]) -> CliResult<Self> {
        let timestamp = match std::env::var("SOURCE_DATE_EPOCH") {
            Ok(v) => v
                .parse()
                .map_err(|_| CliError::usage("SOURCE_DATE_EPOCH must be an integer"))?,
            Err(_) => std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let mut input_hashes = BTreeMap::new();
        for path in inputs {
            let bytes = fs::read(path)?;
            let digest = Sha256::digest(&bytes);
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            input_hashes.insert(path.display().to_string(), hex);
        }
        Ok(Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            config,
            input_hashes,
        })
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("manifest serializes")
    }

    /// Comment line embedding the manifest into CSV artifacts.
    pub fn csv_header(&self) -> String {
        format!("# manifest: {}\n", serde_json::to_string(self).expect("manifest serializes"))
    }
}

/// JSON value for an f64: numbers stay numbers, infinities become the
/// string `"inf"` (JSON has no infinity literal).
pub fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

/// 17-significant-digit float field for CSV output.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn write_artifact(dir: &Path, name: &str, bytes: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    Ok(path)
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> CliResult<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::other(format!("json encode: {e}")))?;
    text.push('\n');
    write_artifact(dir, name, &text)
}
