//! CSV and JSON emission with byte-stable formatting.
//!
//! Reals are written in the shortest decimal form that parses back to the
//! same `f64`; missing values are empty cells.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::exit::Failure;

pub const RESOLVED_CONFIG: &str = "resolved_config.json";

pub fn real(x: f64) -> String {
    ryu::Buffer::new().format(x).to_owned()
}

pub fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    /// Starts a table whose first line names the subcommand and the
    /// resolved configuration file it came from.
    pub fn new(command: &str, header: &[String]) -> Self {
        let mut text = format!("# tumorstrip {command}\n# config: {RESOLVED_CONFIG}\n");
        text.push_str(&header.join(","));
        text.push('\n');
        Self {
            text,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.columns, "row width does not match the header");
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        fs::write(path, &self.text).map_err(|e| Failure::io(e, path))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::config(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::io(e, path))
}

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(path).map_err(|e| Failure::io(e, path))?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
}
