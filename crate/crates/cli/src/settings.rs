//! Resolved job settings: built-in defaults, then the TOML file, then flags.
//!
//! Every value is kept as text until a subcommand reads it, so parse errors
//! carry the `section.key` path of the offending field. Keys that a
//! subcommand reads are recorded for the sidecar.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use bilayer_core::{LatticeKind, Mode};

use crate::range::{parse_pair, parse_sizes, Grid};
use crate::CliError;

/// Known settings as `section.key`. Key names are unique across sections,
/// which lets flags address them by key alone.
pub const PATHS: &[&str] = &[
    "geometry.kind",
    "geometry.a",
    "bilayer.az",
    "bilayer.shift",
    "bilayer.gamma_s",
    "bilayer.q",
    "bilayer.zc",
    "beam.wl",
    "sweep.N",
    "sweep.nc",
    "sweep.a_window",
    "sweep.az_window",
    "sweep.resolution",
    "sweep.delta",
    "memory.schedule",
    "memory.tau",
    "memory.T",
    "memory.gs_ratio",
    "memory.mode_tau",
    "memory.mode_samples",
    "memory.mode_out",
    "output.out",
    "check.seed",
    "check.samples",
];

fn path_of(key: &str) -> Option<&'static str> {
    PATHS.iter().copied().find(|p| p.split_once('.').map(|x| x.1) == Some(key))
}

#[derive(Debug, Default, Clone)]
pub struct Settings {
    values: BTreeMap<&'static str, String>,
    used: RefCell<BTreeSet<&'static str>>,
}

fn canonical(path: &str) -> Result<&'static str, CliError> {
    PATHS
        .iter()
        .copied()
        .find(|p| *p == path)
        .ok_or_else(|| CliError::Validation(format!("{path}: unknown setting")))
}

impl Settings {
    pub fn new(defaults: &[(&'static str, &str)]) -> Self {
        let mut s = Settings::default();
        for (k, v) in defaults {
            s.values.insert(k, v.to_string());
        }
        s
    }

    /// Merge a config file. Unknown sections and keys are errors.
    pub fn merge_toml(&mut self, text: &str) -> Result<(), CliError> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        for (section, body) in &table {
            let body = body.as_table().ok_or_else(|| {
                CliError::Validation(format!("{section}: expected a [{section}] table"))
            })?;
            for (key, value) in body {
                let path = format!("{section}.{key}");
                let path = canonical(&path)?;
                self.values.insert(path, toml_text(path, value)?);
            }
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        let path = path_of(key).expect("flag keys are registered");
        self.values.insert(path, value.to_string());
    }

    /// Insert a computed default unless a value is already present.
    pub fn default_to(&mut self, path: &str, value: String) {
        let path = canonical(path).expect("registered path");
        self.values.entry(path).or_insert(value);
    }

    pub fn opt(&self, path: &str) -> Option<String> {
        let path = canonical(path).expect("registered path");
        let v = self.values.get(path).cloned();
        if v.is_some() {
            self.used.borrow_mut().insert(path);
        }
        v
    }

    pub fn text(&self, path: &str) -> Result<String, CliError> {
        self.opt(path)
            .ok_or_else(|| CliError::Validation(format!("{path}: required but not set")))
    }

    fn parsed<T>(&self, path: &str, f: impl FnOnce(&str) -> Result<T, String>) -> Result<T, CliError> {
        let s = self.text(path)?;
        f(s.trim()).map_err(|e| CliError::Validation(format!("{path}: {e}")))
    }

    pub fn f64(&self, path: &str) -> Result<f64, CliError> {
        self.parsed(path, |s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{s}` is not a finite number"))
        })
    }

    pub fn usize(&self, path: &str) -> Result<usize, CliError> {
        self.parsed(path, |s| s.parse::<usize>().map_err(|_| format!("`{s}` is not a count")))
    }

    pub fn u64(&self, path: &str) -> Result<u64, CliError> {
        self.parsed(path, |s| s.parse::<u64>().map_err(|_| format!("`{s}` is not an integer")))
    }

    pub fn grid(&self, path: &str) -> Result<Vec<f64>, CliError> {
        self.parsed(path, |s| Grid::from_str(s).map(|g| g.0))
    }

    pub fn pair(&self, path: &str) -> Result<[f64; 2], CliError> {
        self.parsed(path, parse_pair)
    }

    pub fn sizes(&self, path: &str) -> Result<Vec<usize>, CliError> {
        self.parsed(path, parse_sizes)
    }

    pub fn kind(&self) -> Result<LatticeKind, CliError> {
        self.parsed("geometry.kind", |s| s.parse::<LatticeKind>().map_err(reason))
    }

    pub fn mode(&self) -> Result<Mode, CliError> {
        self.parsed("bilayer.q", |s| s.parse::<Mode>().map_err(reason))
    }

    pub fn parse<T: FromStr>(&self, path: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(path, |s| s.parse::<T>().map_err(reason))
    }

    /// Values read so far, nested by section.
    pub fn resolved(&self) -> serde_json::Value {
        let mut out = serde_json::Map::new();
        for path in self.used.borrow().iter() {
            let (section, key) = path.split_once('.').unwrap();
            let entry = out
                .entry(section.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
            entry
                .as_object_mut()
                .unwrap()
                .insert(key.to_string(), self.values[path].clone().into());
        }
        serde_json::Value::Object(out)
    }
}

fn reason(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn toml_text(path: &str, v: &toml::Value) -> Result<String, CliError> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Array(items) => items
            .iter()
            .map(|x| toml_text(path, x))
            .collect::<Result<Vec<_>, _>>()?
            .join(","),
        other => {
            return Err(CliError::Validation(format!(
                "{path}: unsupported value `{other}`"
            )))
        }
    })
}
