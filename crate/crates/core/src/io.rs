//! Reading configs and paths, and writing reports with 17 significant
//! digits and a reproducibility header.

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fixtures;
use crate::model::{validate_model, MarketModel, ModelConfig, Validated};
use crate::simulate::PathRecord;

pub const TOOL: &str = "mcmarket";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `{:.16e}`, i.e. 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

struct Digits<F>(F);

impl<F: Formatter> Formatter for Digits<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_compact<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits(CompactFormatter));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// SHA-256 of the normalized model, in the compact output format.
pub fn config_hash(model: &MarketModel) -> String {
    let text = to_json_compact(&model.to_config()).expect("model configs serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Plumbing of one CLI invocation; embedded in every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    pub format: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub run: RunConfig,
}

impl Header {
    pub fn new(model: &MarketModel, run: RunConfig) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            config_sha256: config_hash(model),
            run,
        }
    }

    /// `# key=value` lines for CSV artifacts.
    pub fn csv_lines(&self) -> String {
        let r = &self.run;
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        format!(
            "# tool={} version={}\n# config_sha256={}\n# command={} seed={} n_paths={} n_max={}\n",
            self.tool,
            self.version,
            self.config_sha256,
            r.command,
            opt(r.seed.map(|s| s.to_string())),
            opt(r.n_paths.map(|s| s.to_string())),
            opt(r.n_max.map(|s| s.to_string())),
        )
    }
}

/// `{"header": ..., key: value}`.
pub fn envelope<T: Serialize>(header: &Header, key: &str, value: &T) -> Result<String> {
    let mut map = serde_json::Map::new();
    map.insert("header".into(), serde_json::to_value(header)?);
    map.insert(key.into(), serde_json::to_value(value)?);
    let mut s = to_json_pretty(&Value::Object(map))?;
    s.push('\n');
    Ok(s)
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Model from a config file (bare or inside an envelope under `model`), or
/// a builtin fixture name when no such file exists.
pub fn load_model(source: &str) -> Result<Validated> {
    let path = Path::new(source);
    if !path.exists() {
        if let Some(cfg) = fixtures::by_name(source.trim_end_matches(".json")) {
            return validate_model(&cfg);
        }
    }
    let v = read_json(path)?;
    let v = match v {
        Value::Object(mut m) if m.contains_key("header") && m.contains_key("model") => m.remove("model").unwrap(),
        other => other,
    };
    let cfg: ModelConfig = serde_json::from_value(v)?;
    validate_model(&cfg)
}

/// A path file: a bare record, or entry `index` of an envelope's `paths`.
pub fn load_path(path: &Path, index: usize) -> Result<PathRecord> {
    let v = read_json(path)?;
    let v = match v {
        Value::Object(mut m) if m.contains_key("paths") => match m.remove("paths").unwrap() {
            Value::Array(mut xs) => {
                if index >= xs.len() {
                    return Err(Error::InvalidArgument(format!(
                        "path index {index} out of range ({} paths)",
                        xs.len()
                    )));
                }
                xs.swap_remove(index)
            }
            _ => return Err(Error::InvalidArgument("`paths` must be an array".into())),
        },
        Value::Object(mut m) if m.contains_key("path") => m.remove("path").unwrap(),
        other => other,
    };
    Ok(serde_json::from_value(v)?)
}

/// The value stored under `key` in an envelope file.
pub fn load_envelope_value<T: for<'de> Deserialize<'de>>(path: &Path, key: &str) -> Result<T> {
    match read_json(path)? {
        Value::Object(mut m) => {
            let v = m
                .remove(key)
                .ok_or_else(|| Error::InvalidArgument(format!("{} has no `{key}` entry", path.display())))?;
            Ok(serde_json::from_value(v)?)
        }
        _ => Err(Error::InvalidArgument(format!("{} is not a JSON object", path.display()))),
    }
}
