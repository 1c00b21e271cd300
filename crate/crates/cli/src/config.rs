//! Flat `key = value` configuration files and flag/file/default resolution.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Values read from a config file. Keys are the long flag names without
/// leading dashes; `#` starts a comment.
#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value, got `{raw}`", n + 1)))?;
            let key = k.trim().replace('_', "-");
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("config line {}: duplicate key `{key}`", n + 1)));
            }
        }
        Ok(Settings {
            values,
            used: RefCell::default(),
        })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Settings::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
                Settings::parse(&text)
            }
        }
    }

    /// Flag if given, else the file value, else `default`.
    pub fn get<T>(&self, flag: Option<T>, key: &str, default: impl FnOnce() -> T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get_opt(flag, key)?.unwrap_or_else(default))
    }

    /// Flag if given, else the file value, if any.
    pub fn get_opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.used.borrow_mut().insert(key.to_string());
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|s| {
                s.parse()
                    .map_err(|e| CliError::Config(format!("config key `{key}`: cannot parse `{s}`: {e}")))
            })
            .transpose()
    }

    /// Rejects file keys that no resolved setting asked for.
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        let unknown: Vec<&String> = self.values.keys().filter(|k| !used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!("unknown config keys: {unknown:?}")))
        }
    }
}

/// Comma-separated list of numbers.
pub fn parse_list<T>(s: &str) -> Result<Vec<T>, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|e| CliError::Config(format!("bad list entry `{t}`: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let s = Settings::parse("samples = 50\n# comment\nbeta=0.5 # trailing\n").unwrap();
        assert_eq!(s.get(Some(7u64), "samples", || 1).unwrap(), 7);
        assert_eq!(s.get(None::<u64>, "samples", || 1).unwrap(), 50);
        assert_eq!(s.get(None::<u64>, "seed", || 9).unwrap(), 9);
        assert!(s.finish().is_err());
        assert_eq!(s.get(None::<f64>, "beta", || 0.0).unwrap(), 0.5);
        assert!(s.finish().is_ok());
    }

    #[test]
    fn malformed_lines() {
        assert!(Settings::parse("samples 50").is_err());
        assert!(Settings::parse("a=1\na=2").is_err());
        let s = Settings::parse("samples = many").unwrap();
        assert!(s.get(None::<u64>, "samples", || 1).is_err());
    }

    #[test]
    fn optional_values() {
        let s = Settings::parse("mu = -0.1").unwrap();
        assert_eq!(s.get_opt(None::<f64>, "mu").unwrap(), Some(-0.1));
        assert_eq!(s.get_opt(Some(-0.2), "mu").unwrap(), Some(-0.2));
        assert_eq!(s.get_opt(None::<f64>, "box").unwrap(), None);
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<usize>("2, 3,4").unwrap(), vec![2, 3, 4]);
        assert!(parse_list::<f64>("1,x").is_err());
    }
}
