//! `key = value` configuration files and the parameter bag the experiments
//! read from. Every value an experiment reads (including defaults) is
//! echoed so it can be written into the run manifest.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key = value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("bad value for {key}: {value:?}")]
    Value { key: String, value: String },
    #[error("unknown key(s): {0}")]
    Unknown(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are
/// ignored; later keys override earlier ones.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    parse_kv(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Debug, Default)]
pub struct Params {
    values: BTreeMap<String, String>,
    echo: BTreeMap<String, String>,
}

impl Params {
    pub fn new(values: BTreeMap<String, String>) -> Self {
        Params {
            values,
            echo: BTreeMap::new(),
        }
    }

    /// Later sources win.
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, default: T) -> Result<T, ConfigError> {
        let v = match self.values.get(key) {
            Some(s) => s.parse().map_err(|_| ConfigError::Value {
                key: key.to_string(),
                value: s.clone(),
            })?,
            None => default,
        };
        self.echo.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr + Display>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>, ConfigError> {
        let v = match self.values.get(key) {
            Some(s) => s
                .split(',')
                .map(|p| p.trim().parse())
                .collect::<Result<Vec<T>, _>>()
                .map_err(|_| ConfigError::Value {
                    key: key.to_string(),
                    value: s.clone(),
                })?,
            None => default,
        };
        let shown: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        self.echo.insert(key.to_string(), shown.join(","));
        Ok(v)
    }

    /// Errors on keys that were supplied but never read.
    pub fn finish(self) -> Result<BTreeMap<String, String>, ConfigError> {
        let unknown: Vec<&str> = self
            .values
            .keys()
            .filter(|k| !self.echo.contains_key(*k))
            .map(String::as_str)
            .collect();
        if !unknown.is_empty() {
            return Err(ConfigError::Unknown(unknown.join(", ")));
        }
        Ok(self.echo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let m = parse_kv("# grid\neta = 0.2\nnx=10 # rows\n\nnx = 12\n").unwrap();
        assert_eq!(m["eta"], "0.2");
        assert_eq!(m["nx"], "12");
        assert!(parse_kv("eta 0.2").is_err());
        assert!(parse_kv("= 3").is_err());
    }

    #[test]
    fn params_echo_defaults_and_reject_unknown() {
        let mut p = Params::new(parse_kv("eta = 0.1\nbogus = 1").unwrap());
        assert_eq!(p.get("eta", 0.2).unwrap(), 0.1);
        assert_eq!(p.get("steps", 7usize).unwrap(), 7);
        assert_eq!(p.get_list("etas", vec![0.25, 0.2]).unwrap(), vec![0.25, 0.2]);
        assert!(matches!(p.clone().finish(), Err(ConfigError::Unknown(_))));
        let _ = p.get("bogus", 0u32).unwrap();
        let echo = p.finish().unwrap();
        assert_eq!(echo["steps"], "7");
        assert_eq!(echo["etas"], "0.25,0.2");
        let mut q = Params::new(parse_kv("eta = x").unwrap());
        assert!(q.get("eta", 0.2).is_err());
    }
}
