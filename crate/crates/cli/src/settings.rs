//! Flag/config-file merging and the exit-code error type.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

/// Exit codes.
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_PLUGIN: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<netext::Error> for CliError {
    fn from(e: netext::Error) -> Self {
        let code = match &e {
            netext::Error::Plugin { .. } => EXIT_PLUGIN,
            netext::Error::Contract { .. } => EXIT_FAILURE,
            _ => EXIT_CONFIG,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::config(format!("i/o error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Values from `--config`, consulted for every flag left unset.
pub struct Settings {
    source: Option<PathBuf>,
    map: Map<String, Value>,
    used: RefCell<BTreeSet<String>>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let map = match path {
            None => Map::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::config(format!("cannot read config {}: {e}", p.display()))
                })?;
                match serde_json::from_str(&text) {
                    Ok(Value::Object(m)) => m,
                    Ok(_) => return Err(CliError::config("config file must hold a JSON object")),
                    Err(e) => return Err(CliError::config(format!("config {}: {e}", p.display()))),
                }
            }
        };
        Ok(Settings {
            source: path.map(Path::to_path_buf),
            map,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    fn lookup(&self, key: &str) -> Option<&Value> {
        self.used.borrow_mut().insert(key.to_string());
        self.map.get(key)
    }

    /// Flag if given, else the config value, else `None`.
    pub fn opt<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        let from_file = self.lookup(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match from_file {
            None => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| CliError::config(format!("config key `{key}`: {e}"))),
        }
    }

    pub fn or<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    pub fn required<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> CliResult<T> {
        self.opt(flag, key)?
            .ok_or_else(|| CliError::config(format!("missing required option --{key}")))
    }

    /// A list given as `a,b,c` on the command line, or as an array or such
    /// a string in the config file.
    pub fn list<T>(&self, flag: Option<&str>, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T: DeserializeOwned + std::str::FromStr,
        T::Err: fmt::Display,
    {
        let from_file = self.lookup(key).cloned();
        let text = match (flag, from_file) {
            (Some(s), _) => s.to_string(),
            (None, None) => return Ok(None),
            (None, Some(Value::String(s))) => s,
            (None, Some(v)) => {
                return serde_json::from_value(v)
                    .map(Some)
                    .map_err(|e| CliError::config(format!("config key `{key}`: {e}")))
            }
        };
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| CliError::config(format!("--{key}: cannot parse `{s}`: {e}")))
            })
            .collect::<CliResult<Vec<T>>>()
            .map(Some)
    }

    /// Reject config keys no option consumed.
    pub fn finish(&self) -> CliResult<()> {
        let used = self.used.borrow();
        let unknown: Vec<&String> = self.map.keys().filter(|k| !used.contains(*k)).collect();
        if unknown.is_empty() {
            return Ok(());
        }
        Err(CliError::config(format!(
            "unknown key(s) {unknown:?} in config {}",
            self.source
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        )))
    }
}
