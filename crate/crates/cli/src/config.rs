//! Flat key=value configuration with optional `[section]` headers.
//!
//! Sections are purely cosmetic: keys live in one namespace so command-line
//! `--set key=value` overrides need no section prefix. Every key must be
//! consumed by the subcommand, so typos fail loudly instead of silently
//! running a default.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug)]
pub enum ConfigError {
    Syntax { line: usize, text: String },
    DuplicateKey(String),
    UnknownKeys(Vec<String>),
    MissingKey(&'static str),
    BadValue { key: String, value: String, expected: &'static str },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, text } => {
                write!(f, "line {line}: expected `key = value` or `[section]`, got `{text}`")
            }
            ConfigError::DuplicateKey(k) => write!(f, "key `{k}` given twice"),
            ConfigError::UnknownKeys(ks) => write!(f, "unknown keys: {}", ks.join(", ")),
            ConfigError::MissingKey(k) => write!(f, "missing required key `{k}`"),
            ConfigError::BadValue { key, value, expected } => {
                write!(f, "key `{key}`: `{value}` is not {expected}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parsed key/value store that tracks which keys were read.
#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    consumed: BTreeSet<String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: i + 1, text: line.to_string() });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if values.insert(key.clone(), value).is_some() {
                return Err(ConfigError::DuplicateKey(key));
            }
        }
        Ok(Config { values, consumed: BTreeSet::new() })
    }

    /// Applies a `key=value` override from the command line.
    pub fn set(&mut self, pair: &str) -> Result<(), ConfigError> {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(ConfigError::Syntax { line: 0, text: pair.to_string() });
        };
        self.values.insert(key.trim().to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn set_value(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.consumed.insert(key.to_string());
        self.values.get(key).cloned()
    }

    pub fn opt_str(&mut self, key: &str) -> Option<String> {
        self.take(key)
    }

    pub fn str_or(&mut self, key: &str, default: &str) -> String {
        self.take(key).unwrap_or_else(|| default.to_string())
    }

    pub fn require_str(&mut self, key: &'static str) -> Result<String, ConfigError> {
        self.take(key).ok_or(ConfigError::MissingKey(key))
    }

    pub fn require_f64(&mut self, key: &'static str) -> Result<f64, ConfigError> {
        parse_one(key, &self.require_str(key)?, "a number", parse_f64)
    }

    pub fn f64_or(&mut self, key: &'static str, default: f64) -> Result<f64, ConfigError> {
        match self.take(key) {
            Some(v) => parse_one(key, &v, "a number", parse_f64),
            None => Ok(default),
        }
    }

    pub fn usize_or(&mut self, key: &'static str, default: usize) -> Result<usize, ConfigError> {
        match self.take(key) {
            Some(v) => parse_one(key, &v, "a non-negative integer", |s| s.parse().ok()),
            None => Ok(default),
        }
    }

    pub fn u64_or(&mut self, key: &'static str, default: u64) -> Result<u64, ConfigError> {
        match self.take(key) {
            Some(v) => parse_one(key, &v, "a non-negative integer", |s| s.parse().ok()),
            None => Ok(default),
        }
    }

    pub fn require_f64_list(&mut self, key: &'static str) -> Result<Vec<f64>, ConfigError> {
        parse_list(key, &self.require_str(key)?, "a number list", parse_f64)
    }

    pub fn require_usize_list(&mut self, key: &'static str) -> Result<Vec<usize>, ConfigError> {
        parse_list(key, &self.require_str(key)?, "an integer list", |s| s.parse().ok())
    }

    pub fn usize_list_or(
        &mut self,
        key: &'static str,
        default: &[usize],
    ) -> Result<Vec<usize>, ConfigError> {
        match self.take(key) {
            Some(v) => parse_list(key, &v, "an integer list", |s| s.parse().ok()),
            None => Ok(default.to_vec()),
        }
    }

    /// Fails if any key was never read by the subcommand.
    pub fn finish(self) -> Result<(), ConfigError> {
        let leftover: Vec<String> =
            self.values.keys().filter(|k| !self.consumed.contains(*k)).cloned().collect();
        if leftover.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::UnknownKeys(leftover))
        }
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok().filter(|v: &f64| !v.is_nan()),
    }
}

fn parse_one<T>(
    key: &str,
    value: &str,
    expected: &'static str,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<T, ConfigError> {
    parse(value).ok_or_else(|| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    })
}

fn parse_list<T>(
    key: &str,
    value: &str,
    expected: &'static str,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<Vec<T>, ConfigError> {
    let items: Option<Vec<T>> = value.split(',').map(|s| parse(s.trim())).collect();
    items.filter(|v| !v.is_empty()).ok_or_else(|| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_share_one_namespace() {
        let mut cfg = Config::parse("[budget]\nb_c = 1.08e6\n[load]\nlambda = 1, 2\n").unwrap();
        assert_eq!(cfg.require_f64("b_c").unwrap(), 1.08e6);
        assert_eq!(cfg.require_f64_list("lambda").unwrap(), vec![1.0, 2.0]);
        cfg.finish().unwrap();
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let mut cfg = Config::parse("# top\n\nseed = 7 # trailing\n").unwrap();
        assert_eq!(cfg.u64_or("seed", 0).unwrap(), 7);
        cfg.finish().unwrap();
    }

    #[test]
    fn unread_keys_are_rejected() {
        let cfg = Config::parse("n_frames = 10\n").unwrap();
        match cfg.finish() {
            Err(ConfigError::UnknownKeys(ks)) => assert_eq!(ks, vec!["n_frames".to_string()]),
            other => panic!("expected unknown-key error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        assert!(matches!(
            Config::parse("a = 1\na = 2\n"),
            Err(ConfigError::DuplicateKey(k)) if k == "a"
        ));
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut cfg = Config::parse("rho_db = -5\n").unwrap();
        cfg.set("rho_db = -2.5").unwrap();
        assert_eq!(cfg.require_f64("rho_db").unwrap(), -2.5);
    }

    #[test]
    fn negative_infinity_spelled_out() {
        let mut cfg = Config::parse("rho_db = -inf\n").unwrap();
        assert_eq!(cfg.require_f64("rho_db").unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn bad_values_name_the_key() {
        let mut cfg = Config::parse("frames = many\n").unwrap();
        match cfg.u64_or("frames", 1) {
            Err(ConfigError::BadValue { key, .. }) => assert_eq!(key, "frames"),
            other => panic!("expected bad-value error, got {other:?}"),
        }
    }
}
