use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use lodgednet::datapipe::parse_key_values;

/// Option values for one command: command-line flags first, then the
/// `key=value` config file, then built-in defaults.
pub struct Settings {
    command: &'static str,
    file: BTreeMap<String, String>,
    resolved: Vec<(String, String)>,
}

impl Settings {
    pub fn new(command: &'static str, config: Option<&Path>) -> Result<Self> {
        let file = match config {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                parse_key_values(&text).with_context(|| format!("parsing config {}", path.display()))?
            }
            None => BTreeMap::new(),
        };
        Ok(Self {
            command,
            file,
            resolved: Vec::new(),
        })
    }

    fn file_value<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.file
            .get(key)
            .map(|raw| raw.parse::<T>().map_err(|e| anyhow!("config key {key}: {raw:?}: {e}")))
            .transpose()
    }

    fn record<T: Display>(&mut self, key: &str, value: &T) {
        self.resolved.push((key.to_string(), value.to_string()));
    }

    pub fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        match &v {
            Some(v) => self.record(key, v),
            None => self.record(key, &"-"),
        }
        Ok(v)
    }

    pub fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
        let v = flag.or_else(|| self.file.get(key).map(PathBuf::from));
        let Some(v) = v else {
            bail!("--{} is required (flag or config key {key})", key.replace('_', "-"));
        };
        self.record(key, &v.display());
        Ok(v)
    }

    pub fn path_or(&mut self, key: &str, flag: Option<PathBuf>, default: PathBuf) -> PathBuf {
        let v = flag
            .or_else(|| self.file.get(key).map(PathBuf::from))
            .unwrap_or(default);
        self.record(key, &v.display());
        v
    }

    pub fn optional_path(&mut self, key: &str, flag: Option<PathBuf>) -> Option<PathBuf> {
        let v = flag.or_else(|| self.file.get(key).map(PathBuf::from));
        match &v {
            Some(p) => self.record(key, &p.display()),
            None => self.record(key, &"-"),
        }
        v
    }

    /// Records a value derived from other settings.
    pub fn derived<T: Display>(&mut self, key: &str, value: &T) {
        self.record(key, value);
    }

    /// Prints the resolved settings to stderr and warns about config keys
    /// this command does not use.
    pub fn echo(&self) {
        eprintln!("[{}] resolved config:", self.command);
        for (k, v) in &self.resolved {
            eprintln!("  {k}={v}");
        }
        for key in self.file.keys() {
            if !self.resolved.iter().any(|(k, _)| k == key) {
                log::warn!("config key {key} is not used by {}", self.command);
            }
        }
    }
}
