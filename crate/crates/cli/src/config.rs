//! `key = value` configuration files.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Keys are
//! ASCII identifiers and may appear once.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing required key '{0}'")]
    Missing(String),
    #[error("unknown key '{key}' on line {line}")]
    Unknown { key: String, line: usize },
    #[error("key '{key}' on line {line}: {msg}")]
    Value {
        key: String,
        line: usize,
        msg: String,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed but untyped configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    msg: "expected 'key = value'".into(),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || !k.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("bad key '{k}'"),
                });
            }
            if v.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("empty value for '{k}'"),
                });
            }
            if entries
                .insert(
                    k.to_string(),
                    Entry {
                        value: v.to_string(),
                        line,
                    },
                )
                .is_some()
            {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("duplicate key '{k}'"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    /// Typed reader that remembers which keys were consumed.
    pub fn reader(&self) -> Reader<'_> {
        Reader {
            cfg: self,
            used: RefCell::new(BTreeSet::new()),
        }
    }
}

/// Typed accessors over a [`Config`]; [`Reader::finish`] rejects leftover keys.
pub struct Reader<'a> {
    cfg: &'a Config,
    used: RefCell<BTreeSet<String>>,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> Option<&Entry> {
        self.used.borrow_mut().insert(key.to_string());
        self.cfg.entries.get(key)
    }

    fn parse_with<T>(
        &self,
        key: &str,
        f: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => f(&e.value).map(Some).map_err(|msg| ConfigError::Value {
                key: key.into(),
                line: e.line,
                msg,
            }),
        }
    }

    fn required<T>(&self, key: &str, v: Option<T>) -> Result<T, ConfigError> {
        v.ok_or_else(|| ConfigError::Missing(key.into()))
    }

    pub fn str(&self, key: &str) -> Result<String, ConfigError> {
        let v = self.opt_str(key);
        self.required(key, v)
    }

    pub fn opt_str(&self, key: &str) -> Option<String> {
        self.raw(key).map(|e| e.value.clone())
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.opt_f64(key)?;
        self.required(key, v)
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parse_with(key, parse_f64)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        let v = self.opt_usize(key)?;
        self.required(key, v)
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.parse_with(key, |s| {
            s.parse::<usize>()
                .map_err(|_| format!("expected a non-negative integer, got '{s}'"))
        })
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.opt_usize(key)?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        let v = self.parse_with(key, |s| {
            s.parse::<u64>()
                .map_err(|_| format!("expected an unsigned integer, got '{s}'"))
        })?;
        Ok(v.unwrap_or(default))
    }

    /// Comma-separated list of floats.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let v = self.parse_with(key, |s| s.split(',').map(|t| parse_f64(t.trim())).collect())?;
        self.required(key, v)
    }

    /// `re` or `re, im`.
    pub fn complex(&self, key: &str) -> Result<Complex64, ConfigError> {
        let v = self.parse_with(key, |s| {
            let parts: Vec<&str> = s.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [re] => Ok(Complex64::new(parse_f64(re)?, 0.0)),
                [re, im] => Ok(Complex64::new(parse_f64(re)?, parse_f64(im)?)),
                _ => Err(format!("expected 're' or 're, im', got '{s}'")),
            }
        })?;
        self.required(key, v)
    }

    /// One of `choices`, or `default` when absent.
    pub fn choice(
        &self,
        key: &str,
        choices: &[&str],
        default: Option<&str>,
    ) -> Result<String, ConfigError> {
        let v = self.parse_with(key, |s| {
            if choices.contains(&s) {
                Ok(s.to_string())
            } else {
                Err(format!("expected one of {}, got '{s}'", choices.join(", ")))
            }
        })?;
        match (v, default) {
            (Some(v), _) => Ok(v),
            (None, Some(d)) => Ok(d.to_string()),
            (None, None) => Err(ConfigError::Missing(key.into())),
        }
    }

    /// Errors on the first key that was never read.
    pub fn finish(self) -> Result<(), ConfigError> {
        let used = self.used.into_inner();
        let mut extra: Vec<(&String, &Entry)> = self
            .cfg
            .entries
            .iter()
            .filter(|(k, _)| !used.contains(*k))
            .collect();
        extra.sort_by_key(|(_, e)| e.line);
        match extra.first() {
            Some((k, e)) => Err(ConfigError::Unknown {
                key: (*k).clone(),
                line: e.line,
            }),
            None => Ok(()),
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = match s {
        "inf" => f64::INFINITY,
        "pi" => std::f64::consts::PI,
        _ => s
            .parse()
            .map_err(|_| format!("expected a number, got '{s}'"))?,
    };
    if v.is_nan() {
        return Err("NaN is not allowed".into());
    }
    Ok(v)
}
