//! Flat key-value experiment configuration.
//!
//! The on-disk format is a flat TOML document (scalars and arrays of
//! numbers only; no tables). Unknown keys are errors, every field is
//! validated before any computation, and the canonical echo of the config
//! goes into every output file header.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigValue {
    Integer(i64),
    Float(f64),
    Boolean(bool),
    Text(String),
    Numbers(Vec<f64>),
}

impl ConfigValue {
    fn from_toml(v: &toml::Value) -> Result<Self> {
        Ok(match v {
            toml::Value::Integer(i) => ConfigValue::Integer(*i),
            toml::Value::Float(f) => ConfigValue::Float(*f),
            toml::Value::Boolean(b) => ConfigValue::Boolean(*b),
            toml::Value::String(s) => ConfigValue::Text(s.clone()),
            toml::Value::Array(items) => {
                let mut nums = Vec::with_capacity(items.len());
                for it in items {
                    match it {
                        toml::Value::Integer(i) => nums.push(*i as f64),
                        toml::Value::Float(f) => nums.push(*f),
                        _ => {
                            return Err(Error::Config(
                                "arrays may contain numbers only".into(),
                            ))
                        }
                    }
                }
                ConfigValue::Numbers(nums)
            }
            other => {
                return Err(Error::Config(format!(
                    "unsupported value type {} (flat scalars and number arrays only)",
                    other.type_str()
                )))
            }
        })
    }

    fn render(&self) -> String {
        match self {
            ConfigValue::Integer(i) => i.to_string(),
            ConfigValue::Float(f) => crate::report::fmt_f64(*f),
            ConfigValue::Boolean(b) => b.to_string(),
            ConfigValue::Text(s) => format!("\"{s}\""),
            ConfigValue::Numbers(ns) => format!(
                "[{}]",
                ns.iter()
                    .map(|n| crate::report::fmt_f64(*n))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        }
    }
}

/// Parsed, not-yet-validated configuration.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, ConfigValue>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        let mut entries = BTreeMap::new();
        for (k, v) in &table {
            entries.insert(k.clone(), ConfigValue::from_toml(v)?);
        }
        Ok(Self { entries })
    }

    /// Apply one `key=value` override (value in TOML syntax).
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let Some((key, value)) = kv.split_once('=') else {
            return Err(Error::Config(format!("override `{kv}` is not key=value")));
        };
        let doc = format!("{} = {}", key.trim(), value.trim());
        let parsed = ConfigMap::parse(&doc)?;
        for (k, v) in parsed.entries {
            self.entries.insert(k, v);
        }
        Ok(())
    }

    pub fn insert(&mut self, key: &str, value: ConfigValue) {
        self.entries.insert(key.to_string(), value);
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every present key must be in `allowed`.
    pub fn validate_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.entries.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Config(format!(
                    "unknown config key `{k}` (allowed: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(ConfigValue::Float(f)) => Ok(*f),
            Some(ConfigValue::Integer(i)) => Ok(*i as f64),
            Some(_) => Err(Error::Config(format!("key `{key}` must be a number"))),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(ConfigValue::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(_) => Err(Error::Config(format!(
                "key `{key}` must be a nonnegative integer"
            ))),
        }
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(ConfigValue::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(_) => Err(Error::Config(format!(
                "key `{key}` must be a nonnegative integer"
            ))),
        }
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(ConfigValue::Boolean(b)) => Ok(*b),
            Some(_) => Err(Error::Config(format!("key `{key}` must be a boolean"))),
        }
    }

    pub fn get_text(&self, key: &str, default: &str) -> Result<String> {
        match self.entries.get(key) {
            None => Ok(default.to_string()),
            Some(ConfigValue::Text(s)) => Ok(s.clone()),
            Some(_) => Err(Error::Config(format!("key `{key}` must be a string"))),
        }
    }

    pub fn get_numbers(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.entries.get(key) {
            None => Ok(default.to_vec()),
            Some(ConfigValue::Numbers(ns)) => Ok(ns.clone()),
            Some(ConfigValue::Integer(i)) => Ok(vec![*i as f64]),
            Some(ConfigValue::Float(f)) => Ok(vec![*f]),
            Some(_) => Err(Error::Config(format!(
                "key `{key}` must be a number or an array of numbers"
            ))),
        }
    }

    pub fn get_texts(&self, key: &str) -> Result<Option<Vec<String>>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(ConfigValue::Text(s)) => Ok(Some(
                s.split(',').map(|p| p.trim().to_string()).collect(),
            )),
            Some(_) => Err(Error::Config(format!(
                "key `{key}` must be a comma-separated string"
            ))),
        }
    }

    /// Canonical sorted `key = value` echo for manifests.
    pub fn echo_lines(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {}", v.render()))
            .collect()
    }
}
