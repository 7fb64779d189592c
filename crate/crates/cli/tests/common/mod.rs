#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

pub const REFERENCE_PARAMS: &str =
    r#""params": {"mu": 1, "sigma_tilde": 1, "sigma_bar_1": 2, "sigma_bar_2": 3, "gamma": 1}"#;

/// A configuration with the reference parameters and extra top-level
/// blocks, e.g. `reference(r#""evolve": {"t_end": 1}"#)`.
pub fn reference(extra: &str) -> String {
    if extra.is_empty() {
        format!("{{{REFERENCE_PARAMS}}}")
    } else {
        format!("{{{REFERENCE_PARAMS}, {extra}}}")
    }
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    pub out: PathBuf,
}

impl Run {
    pub fn read(&self, name: &str) -> String {
        fs::read_to_string(self.out.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    pub fn json(&self, name: &str) -> serde_json::Value {
        serde_json::from_str(&self.read(name)).unwrap()
    }

    pub fn files(&self) -> BTreeMap<String, Vec<u8>> {
        let mut files = BTreeMap::new();
        if let Ok(entries) = fs::read_dir(&self.out) {
            for entry in entries {
                let entry = entry.unwrap();
                files.insert(entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path()).unwrap());
            }
        }
        files
    }

    /// Data rows of a CSV file, without comments and header.
    pub fn csv_rows(&self, name: &str) -> (Vec<String>, Vec<Vec<String>>) {
        let text = self.read(name);
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let header = lines.next().unwrap().split(',').map(String::from).collect();
        let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
        (header, rows)
    }
}

pub fn run_in(dir: &Path, subcommand: &str, config: &str, env: &[(&str, &str)]) -> Run {
    fs::create_dir_all(dir).unwrap();
    let config_path = dir.join("config.json");
    fs::write(&config_path, config).unwrap();
    let out = dir.join("out");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tumorstrip"));
    cmd.arg(subcommand).arg("--config").arg(&config_path).arg("--out").arg(&out);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let output = cmd.output().expect("binary runs");
    Run {
        code: output.status.code().expect("exited normally"),
        stdout: String::from_utf8_lossy(&output.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
        out,
    }
}

pub fn run(subcommand: &str, config: &str) -> (tempfile::TempDir, Run) {
    let dir = tempfile::tempdir().unwrap();
    let r = run_in(dir.path(), subcommand, config, &[]);
    (dir, r)
}
