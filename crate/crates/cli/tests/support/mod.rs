//! Helpers shared by the CLI integration tests: running the binary and reading
//! its CSV and JSON artifacts back.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

pub struct Invocation {
    pub code: i32,
    pub elapsed: Duration,
    pub stdout: String,
    pub stderr: String,
}

/// Runs `floquet-dmft <sub> --config <dir>/config.toml --out <dir>/<out> [extra]`
/// with `config` written to the config file first.
pub fn invoke(dir: &Path, sub: &str, config: &str, out: &str, extra: &[&str]) -> Invocation {
    let cfg_path = dir.join(format!("{out}.toml"));
    std::fs::write(&cfg_path, config).unwrap();
    invoke_with(sub, &cfg_path, &dir.join(out), extra)
}

pub fn invoke_with(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Invocation {
    let start = Instant::now();
    let output = Command::new(env!("CARGO_BIN_EXE_floquet-dmft"))
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    Invocation {
        code: output.status.code().unwrap_or(-1),
        elapsed: start.elapsed(),
        stdout: String::from_utf8_lossy(&output.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
    }
}

/// Columns of a CSV artifact, keyed by position; `NaN` marks masked values.
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Self {
        let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let mut lines = text.lines();
        let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
        let mut columns = vec![Vec::new(); header.len()];
        for line in lines {
            for (col, field) in columns.iter_mut().zip(line.split(',')) {
                col.push(field.parse::<f64>().unwrap());
            }
        }
        Self { header, columns }
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }
}

pub fn json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}

pub fn point_dir(root: &Path, t: f64, omega_l: f64) -> PathBuf {
    root.join(format!("T{t}_Omega{omega_l}"))
}

/// Mean of `y` over `lo ≤ x ≤ hi`, skipping `NaN`.
pub fn mean_over(x: &[f64], y: &[f64], lo: f64, hi: f64) -> f64 {
    let picked: Vec<f64> = x
        .iter()
        .zip(y)
        .filter(|(w, v)| **w >= lo && **w <= hi && !v.is_nan())
        .map(|(_, v)| *v)
        .collect();
    picked.iter().sum::<f64>() / picked.len() as f64
}
