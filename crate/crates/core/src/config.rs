//! Flat `key = value` parameter files.
//!
//! ```text
//! # two-level system in a Lorentzian field
//! omega  = 5
//! kappa  = 1
//! beta_s = 0.2
//! i0     = 0.0318
//! beta   = 1
//! ```
//!
//! Blank lines and `#` comments are ignored. Every key is required exactly
//! once.

use std::path::Path;

use thiserror::Error;

use crate::model::{ModelError, SystemParams};

pub const KEYS: [&str; 5] = ["omega", "kappa", "beta_s", "i0", "beta"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: `{value}` is not a number (key `{key}`)")]
    InvalidNumber { line: usize, key: String, value: String },
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: ModelError },
}

pub fn parse_config(text: &str) -> Result<SystemParams, ConfigError> {
    let mut values: [Option<(f64, usize)>; 5] = [None; 5];
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: raw.trim().to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(slot) = KEYS.iter().position(|k| *k == key) else {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        };
        if values[slot].is_some() {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        let parsed: f64 = value.parse().map_err(|_| ConfigError::InvalidNumber {
            line,
            key: key.to_string(),
            value: value.to_string(),
        })?;
        values[slot] = Some((parsed, line));
    }
    let mut get = [(0.0, 0); 5];
    for (i, key) in KEYS.iter().enumerate() {
        get[i] = values[i].ok_or(ConfigError::MissingKey(key))?;
    }
    let [omega, kappa, beta_s, i0, beta] = get;
    let params = SystemParams {
        omega: omega.0,
        kappa: kappa.0,
        beta_s: beta_s.0,
        i0: i0.0,
        beta: beta.0,
    };
    params.validate().map_err(|source| {
        let line = KEYS
            .iter()
            .position(|k| *k == source.name())
            .map_or(0, |i| get[i].1);
        ConfigError::Invalid { line, source }
    })?;
    Ok(params)
}

pub fn load_config(path: &Path) -> Result<SystemParams, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

/// Renders parameters in the format [`parse_config`] reads.
pub fn render_config(p: &SystemParams) -> String {
    format!(
        "omega = {}\nkappa = {}\nbeta_s = {}\ni0 = {}\nbeta = {}\n",
        p.omega, p.kappa, p.beta_s, p.i0, p.beta
    )
}
