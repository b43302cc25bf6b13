//! Minimal `key = value` text files used for sidecar headers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{HfeError, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    path: std::path::PathBuf,
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HfeError::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                HfeError::parse(path, format!("line {}: expected key=value", lineno + 1))
            })?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(KeyValues {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| HfeError::parse(&self.path, format!("missing key `{key}`")))
    }

    pub fn number<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| HfeError::parse(&self.path, format!("`{key}`: cannot parse `{raw}`")))
    }

    pub fn number_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(_) => self.number(key),
        }
    }

    pub fn triple<T: FromStr + Copy>(&self, key: &str) -> Result<[T; 3]> {
        let raw = self.require(key)?;
        let parts: Vec<T> = raw
            .split_whitespace()
            .map(|s| s.parse::<T>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| HfeError::parse(&self.path, format!("`{key}`: cannot parse `{raw}`")))?;
        match parts.as_slice() {
            [a, b, c] => Ok([*a, *b, *c]),
            _ => Err(HfeError::parse(
                &self.path,
                format!("`{key}`: expected three values"),
            )),
        }
    }
}

/// Renders ordered `key = value` lines.
pub fn render(pairs: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

pub fn triple_str<T: std::fmt::Display>(v: &[T; 3]) -> String {
    format!("{} {} {}", v[0], v[1], v[2])
}
