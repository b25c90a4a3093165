//! Layered run configuration.
//!
//! Every subcommand owns a fixed key schema with defaults. Values are
//! resolved in precedence order: command-line flag, then `ECONOKIT_*`
//! environment variable, then config file, then the built-in default.
//! A flag that contradicts the config file wins and leaves a warning in
//! the report. The resolved map is echoed verbatim in every report, and
//! feeding it back as a config file reproduces the run.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::CliError;

/// Keys shared by every subcommand.
pub const COMMON_KEYS: &[(&str, &str)] = &[
    ("out_dir", "."),
    ("formats", "json,csv"),
    ("threads", ""),
];

#[derive(Debug)]
pub struct Settings {
    values: BTreeMap<String, String>,
    warnings: Vec<String>,
}

impl Settings {
    /// Resolves the effective configuration for one subcommand.
    ///
    /// `keys` is the full schema (common keys included); `flags` holds
    /// only the flags the user actually passed.
    pub fn build(
        keys: &[(&str, &str)],
        config_file: Option<&Path>,
        flags: &[(String, String)],
    ) -> Result<Settings, CliError> {
        let mut values: BTreeMap<String, String> = keys
            .iter()
            .map(|&(k, d)| (k.to_string(), d.to_string()))
            .collect();
        let mut warnings = Vec::new();

        let mut from_file: BTreeMap<String, String> = BTreeMap::new();
        if let Some(path) = config_file {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config file {}: {e}", path.display()))
            })?;
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::Usage(format!(
                        "config file line {}: expected 'key = value', got '{raw}'",
                        idx + 1
                    ))
                })?;
                let key = key.trim();
                let value = value.trim();
                if !values.contains_key(key) {
                    return Err(CliError::Usage(format!(
                        "config file line {}: unknown key '{key}'",
                        idx + 1
                    )));
                }
                from_file.insert(key.to_string(), value.to_string());
            }
            for (k, v) in &from_file {
                values.insert(k.clone(), v.clone());
            }
        }

        for (key, _) in keys {
            let var = format!("ECONOKIT_{}", key.to_ascii_uppercase());
            if let Ok(v) = std::env::var(&var) {
                values.insert(key.to_string(), v);
            }
        }

        for (key, value) in flags {
            if let Some(file_value) = from_file.get(key) {
                if file_value != value {
                    warnings.push(format!(
                        "config file sets {key}={file_value}; flag value {value} wins"
                    ));
                }
            }
            values.insert(key.clone(), value.clone());
        }

        Ok(Settings { values, warnings })
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    /// Raw value; the schema guarantees the key exists.
    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("key '{key}' missing from schema"))
            .as_str()
    }

    /// Non-empty value of a mandatory key.
    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        let v = self.get(key);
        if v.is_empty() {
            return Err(CliError::Usage(format!(
                "'{key}' is required: pass --{} or set it in the config file",
                key.replace('_', "-")
            )));
        }
        Ok(v)
    }

    pub fn opt(&self, key: &str) -> Option<&str> {
        let v = self.get(key);
        (!v.is_empty()).then_some(v)
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        parse(key, self.require(key)?)
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.opt(key).map(|v| parse(key, v)).transpose()
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        parse(key, self.require(key)?)
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        parse(key, self.require(key)?)
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.opt(key).map(|v| parse(key, v)).transpose()
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        match self.require(key)? {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(CliError::Usage(format!(
                "'{key}' must be true or false, got '{other}'"
            ))),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid value '{value}' for '{key}': {e}")))
}

/// Records a flag's value for the merge when the user passed one.
pub fn flag(pairs: &mut Vec<(String, String)>, key: &str, value: Option<String>) {
    if let Some(v) = value {
        pairs.push((key.to_string(), v));
    }
}
