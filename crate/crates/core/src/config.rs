//! Line-oriented configuration files.
//!
//! Format: `[section]` headers, `key = value` lines, `#` comments, blank
//! lines ignored. Keys before any header live in the unnamed section `""`.
//! A later duplicate key overrides an earlier one within its section.

use crate::error::{CoreError, Result};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(CoreError::Config {
                        line: idx + 1,
                        detail: format!("unterminated section header: {line}"),
                    });
                };
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CoreError::Config {
                    line: idx + 1,
                    detail: format!("expected `key = value`, got: {line}"),
                });
            };
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { sections })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CoreError::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|s| s.as_str())
    }

    pub fn get_or<'a>(&'a self, section: &str, key: &str, default: &'a str) -> &'a str {
        self.get(section, key).unwrap_or(default)
    }

    pub fn parse_or<T: std::str::FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        match self.get(section, key) {
            None => Ok(default),
            Some(s) => s.parse::<T>().map_err(|_| {
                CoreError::Argument(format!("config [{section}] {key}: cannot parse `{s}`"))
            }),
        }
    }

    pub fn sections(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, String>)> {
        self.sections.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.into());
    }

    /// Canonical text rendering: sections and keys in sorted order. Used to
    /// log the fully resolved configuration of a run.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, entries) in &self.sections {
            if !name.is_empty() {
                out.push_str(&format!("[{name}]\n"));
            }
            for (k, v) in entries {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

/// Writes `key = value` records in a canonical order. Shared by every
/// structured-text artifact (zoo meta files, metrics, scan reports).
pub fn write_kv_file(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(&format!("{k} = {v}\n"));
    }
    std::fs::write(path, out).map_err(|e| CoreError::io(path.display().to_string(), e))
}

/// Reads a `key = value` file into an ordered map.
pub fn read_kv_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let cfg = Config::load(path)?;
    let mut out = BTreeMap::new();
    for (section, entries) in cfg.sections() {
        if !section.is_empty() {
            return Err(CoreError::Format {
                path: path.display().to_string(),
                detail: format!("unexpected section [{section}] in key/value file"),
            });
        }
        for (k, v) in entries {
            out.insert(k.clone(), v.clone());
        }
    }
    Ok(out)
}
