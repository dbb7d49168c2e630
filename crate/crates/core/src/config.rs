//! Flat `key = value` configuration files.
//!
//! A file supplies defaults for command-line flags: every key becomes
//! `--key value` unless that flag is already on the command line.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

/// Keys are normalized to lower case with `_` replaced by `-`. Blank lines
/// and lines starting with `#` are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| ConfigError::Syntax { line: i + 1, msg: msg.to_string() };
        let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
        let key = k.trim().to_lowercase().replace('_', "-");
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(err("bad key"));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(err(&format!("duplicate key {key}")));
        }
    }
    Ok(out)
}

/// Inserts `--key value` after the first `insert_at` arguments for every
/// key whose flag does not already appear in `args`.
pub fn merge_args(args: &[String], insert_at: usize, config: &BTreeMap<String, String>) -> Vec<String> {
    let present = |key: &str| {
        let flag = format!("--{key}");
        args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
    };
    let mut out: Vec<String> = args[..insert_at.min(args.len())].to_vec();
    for (k, v) in config {
        if !present(k) {
            out.push(format!("--{k}"));
            out.push(v.clone());
        }
    }
    out.extend_from_slice(&args[insert_at.min(args.len())..]);
    out
}
