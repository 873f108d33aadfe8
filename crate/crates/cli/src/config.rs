//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Values are kept as strings and parsed on access. Layers are applied in
//! order: built-in defaults, the config file, then command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn from_defaults(defaults: &[(&str, &str)]) -> Self {
        Config {
            values: defaults
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Input(format!("config line {}: expected `key = value`", ln + 1))
            })?;
            let key = k.trim();
            if key.is_empty() {
                return Err(CliError::Input(format!("config line {}: empty key", ln + 1)));
            }
            values.insert(key.to_string(), v.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Config::parse(&text)
    }

    /// Overlays `other`, rejecting keys absent from `self`.
    pub fn merge(&mut self, other: &Config) -> Result<(), CliError> {
        for (k, v) in &other.values {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(CliError::Input(format!("unknown setting `{key}`"))),
        }
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("override `{pair}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("setting `{key}` has no default"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|e| CliError::Input(format!("setting `{key}` = `{raw}`: {e}")))
    }

    /// Comma-separated list; empty string gives an empty list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|e| CliError::Input(format!("setting `{key}` item `{s}`: {e}")))
            })
            .collect()
    }

    /// Empty values mean "not set".
    pub fn optional(&self, key: &str) -> Option<&str> {
        Some(self.raw(key)).filter(|s| !s.is_empty())
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.values {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let c = Config::parse("# comment\nreps = 20\n\nlearners = LR, DT_0.05  # trailing\n").unwrap();
        assert_eq!(c.raw("learners"), "LR, DT_0.05");
        assert_eq!(Config::parse(&c.to_string()).unwrap(), c);
    }

    #[test]
    fn layering() {
        let mut c = Config::from_defaults(&[("reps", "100"), ("seed", "0")]);
        c.merge(&Config::parse("reps = 5").unwrap()).unwrap();
        c.set_pair("seed=9").unwrap();
        assert_eq!(c.get::<usize>("reps").unwrap(), 5);
        assert_eq!(c.get::<u64>("seed").unwrap(), 9);
        assert!(c.set_pair("nope=1").is_err());
        assert!(c.set_pair("reps").is_err());
        assert!(c.get::<f64>("reps").is_ok());
        c.set("reps", "x").unwrap();
        assert!(c.get::<usize>("reps").is_err());
    }

    #[test]
    fn lists() {
        let c = Config::from_defaults(&[("a", "1, 2,3"), ("b", "")]);
        assert_eq!(c.list::<u32>("a").unwrap(), vec![1, 2, 3]);
        assert!(c.list::<u32>("b").unwrap().is_empty());
        assert_eq!(c.optional("b"), None);
    }
}
