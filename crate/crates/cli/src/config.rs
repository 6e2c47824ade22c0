//! Flat TOML configuration files.
//!
//! Every key maps onto a [`SolverConfig`] field. For sweeps, `Omega_L` and `T`
//! may instead hold a list (`[0.3, 0.5]`) or an inclusive range table
//! (`{ start = 0.3, stop = 1.5, count = 7 }`).

use std::path::Path;

use floquet_dmft::dmft::{SeedPolicy, SolverConfig};
use serde::Deserialize;
use toml::{Table, Value};

use crate::error::CliError;

/// Keys that may carry several values in a sweep.
const SWEEP_KEYS: [&str; 2] = ["Omega_L", "T"];

/// A parsed configuration file.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigFile {
    /// Configuration with every swept key at its first value.
    pub base: SolverConfig,
    /// Swept modulation frequencies, ascending.
    pub omega_values: Vec<f64>,
    /// Swept modulation amplitudes, in file order.
    pub t_values: Vec<f64>,
    /// The file set `seed_policy` itself rather than relying on the default.
    pub explicit_seed_policy: Option<SeedPolicy>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut table: Table = text.parse().map_err(|e: toml::de::Error| CliError::config(e.message().to_string()))?;
        let mut swept = Vec::new();
        for key in SWEEP_KEYS {
            let values = match table.get(key) {
                Some(v) => Some(sweep_values(key, v)?),
                None => None,
            };
            if let Some(values) = values {
                table.insert(key.to_string(), Value::Float(values[0]));
                swept.push(Some(values));
            } else {
                swept.push(None);
            }
        }
        let base = SolverConfig::deserialize(Value::Table(table.clone()))
            .map_err(|e: toml::de::Error| CliError::config(e.message().trim().to_string()))?;
        base.validate()?;
        let explicit_seed_policy = table.contains_key("seed_policy").then_some(base.seed_policy);
        let mut omega_values = swept[0].clone().unwrap_or_else(|| vec![base.omega_l]);
        omega_values.sort_by(f64::total_cmp);
        omega_values.dedup();
        let t_values = swept[1].clone().unwrap_or_else(|| vec![base.t_amp]);
        for &w in &omega_values {
            SolverConfig { omega_l: w, ..base.clone() }.validate()?;
        }
        for &t in &t_values {
            SolverConfig { t_amp: t, ..base.clone() }.validate()?;
        }
        Ok(Self {
            base,
            omega_values,
            t_values,
            explicit_seed_policy,
        })
    }

    pub fn point_count(&self) -> usize {
        self.omega_values.len() * self.t_values.len()
    }

    /// The single-run configuration, rejecting swept keys.
    pub fn single(&self) -> Result<SolverConfig, CliError> {
        if self.point_count() > 1 {
            return Err(CliError::config("`Omega_L` and `T` must be scalars for `run`; use `sweep` for lists"));
        }
        Ok(self.base.clone())
    }
}

fn number(key: &str, v: &Value) -> Result<f64, CliError> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(CliError::config(format!("`{key}` must be a number"))),
    }
}

fn sweep_values(key: &str, v: &Value) -> Result<Vec<f64>, CliError> {
    let values = match v {
        Value::Array(items) => items.iter().map(|x| number(key, x)).collect::<Result<Vec<_>, _>>()?,
        Value::Table(range) => {
            for k in range.keys() {
                if !["start", "stop", "count"].contains(&k.as_str()) {
                    return Err(CliError::config(format!("unknown key `{k}` in `{key}` range")));
                }
            }
            let get = |k: &str| {
                range
                    .get(k)
                    .ok_or_else(|| CliError::config(format!("`{key}` range needs `{k}`")))
                    .and_then(|x| number(key, x))
            };
            let (start, stop) = (get("start")?, get("stop")?);
            let count = match range.get("count") {
                Some(Value::Integer(n)) if *n >= 1 => *n as usize,
                _ => return Err(CliError::config(format!("`{key}` range needs an integer `count` >= 1"))),
            };
            if count == 1 {
                vec![start]
            } else {
                let step = (stop - start) / (count - 1) as f64;
                (0..count).map(|i| start + step * i as f64).collect()
            }
        }
        other => vec![number(key, other)?],
    };
    if values.is_empty() {
        return Err(CliError::config(format!("`{key}` list is empty")));
    }
    Ok(values)
}
