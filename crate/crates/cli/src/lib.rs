//! Batch front end for the `bose-quasifree` library: JSON configs with flag
//! overrides, deterministic CSV/JSON tables and the verification suite.

// NaN-rejecting guards are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod suite;

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub use error::{CliError, CliResult};
use output::Format;

/// Keys shared by every config file; flags override them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Common {
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: Option<usize>,
}

/// Reads a JSON object, splits off the common keys and deserializes the
/// rest with unknown keys rejected; a missing path yields the defaults.
pub fn load_config<C: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<(C, Common)> {
    let Some(path) = path else {
        return Ok((C::default(), Common::default()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config<C: DeserializeOwned>(text: &str) -> CliResult<(C, Common)> {
    let mut map: Map<String, Value> = match serde_json::from_str(text)? {
        Value::Object(m) => m,
        _ => return Err(CliError::config("config must be a JSON object")),
    };
    let common = Common {
        out: map.remove("out").map(serde_json::from_value).transpose()?,
        format: map.remove("format").map(serde_json::from_value).transpose()?,
        jobs: map.remove("jobs").map(serde_json::from_value).transpose()?,
    };
    let cfg = serde_json::from_value(Value::Object(map))?;
    Ok((cfg, common))
}

/// Config echo for the output header: the parameters plus the format.
pub fn echo<C: Serialize>(cfg: &C, format: Format) -> CliResult<Value> {
    let mut value = serde_json::to_value(cfg)?;
    if let Value::Object(map) = &mut value {
        map.insert("format".into(), serde_json::to_value(format)?);
    }
    Ok(value)
}
