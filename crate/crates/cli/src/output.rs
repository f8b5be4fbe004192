//! CSV tables and JSON sidecars.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::{CliError, SCHEMA_VERSION};

/// Full double precision, 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Validation(format!("output: {e}"))
}

/// `out.csv` → `out.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub struct Sidecar<'a> {
    pub subcommand: &'a str,
    pub threads: usize,
    pub config: Value,
    pub table: &'a Table,
    pub results: Value,
}

impl Sidecar<'_> {
    pub fn to_value(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "subcommand": self.subcommand,
            "library_version": bilayer_core::VERSION,
            "threads": self.threads,
            "config": self.config,
            "columns": self.table.header,
            "rows": self.table.rows.len(),
            "results": self.results,
        })
    }

    pub fn write(&self, csv: &Path) -> Result<PathBuf, CliError> {
        let path = sidecar_path(csv);
        let text = serde_json::to_string_pretty(&self.to_value())
            .map_err(|e| CliError::Numerical(format!("sidecar: {e}")))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, std::f64::consts::PI] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
        assert_eq!(num(f64::NAN), "NaN");
    }

    #[test]
    fn sidecar_next_to_csv() {
        assert_eq!(sidecar_path(Path::new("out/map.csv")), PathBuf::from("out/map.json"));
        assert_eq!(sidecar_path(Path::new("table")), PathBuf::from("table.json"));
    }
}
