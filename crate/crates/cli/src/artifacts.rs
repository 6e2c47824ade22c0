//! CSV and JSON artifacts of a run.
//!
//! Floats are written with 17 significant digits so values round-trip
//! exactly; masked distribution values are written as `NaN`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use floquet_dmft::dmft::{ConvergenceRecord, Solution, SolverConfig};
use floquet_dmft::observables::{SpectralResult, SumRule};
use serde::Serialize;

use crate::error::CliError;

pub const SPECTRA_FILE: &str = "spectra.csv";
pub const DISTRIBUTION_FILE: &str = "distribution.csv";
pub const SELF_ENERGY_FILE: &str = "self_energy.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLOT_FILE: &str = "plot.gp";

/// Record of one run: what was solved, how it converged, what was written.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config: SolverConfig,
    pub version: &'static str,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
    pub convergence: ConvergenceRecord,
    pub sum_rule_residual: f64,
    pub sum_rule: SumRule,
    pub occupation: f64,
    /// Output files, relative to the manifest's directory.
    pub files: Vec<String>,
}

pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn csv(header: &str, rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt17).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn spectra_csv(r: &SpectralResult) -> String {
    csv(
        "omega [D],ldos_row0 [1/D],ldos_full [1/D]",
        (0..r.omega.len()).map(|k| vec![r.omega[k], r.ldos_row0[k], r.ldos_full[k]]),
    )
}

pub fn distribution_csv(r: &SpectralResult) -> String {
    csv(
        "omega [D],f [1]",
        (0..r.omega.len()).map(|k| vec![r.omega[k], r.distribution[k].unwrap_or(f64::NAN)]),
    )
}

pub fn self_energy_csv(sol: &Solution, r: &SpectralResult) -> String {
    let c = sol.self_energy.idx.center();
    csv(
        "omega [D],re_sigma_r_00 [D],im_sigma_r_00 [D],im_sigma_k_00 [D],scattering_rate [D]",
        sol.self_energy.values.iter().enumerate().map(|(k, p)| {
            vec![
                r.omega[k],
                p.retarded[(c, c)].re,
                p.retarded[(c, c)].im,
                p.keldysh[(c, c)].im,
                r.scattering_rate[k],
            ]
        }),
    )
}

/// Gnuplot script drawing the LDOS and distribution of one run.
pub fn run_plot_script() -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set multiplot layout 2,1");
    let _ = writeln!(s, "set xlabel 'omega [D]'");
    let _ = writeln!(s, "set ylabel 'A(omega) [1/D]'");
    let _ = writeln!(s, "plot '{SPECTRA_FILE}' using 1:2 with lines");
    let _ = writeln!(s, "set ylabel 'f(omega)'");
    let _ = writeln!(s, "set yrange [-0.1:1.1]");
    let _ = writeln!(s, "plot '{DISTRIBUTION_FILE}' using 1:2 with lines");
    let _ = writeln!(s, "unset multiplot");
    s
}

/// Gnuplot heatmap script for a long-format sweep aggregate.
pub fn sweep_plot_script(aggregate: &str, t: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set xlabel 'omega [D]'");
    let _ = writeln!(s, "set ylabel 'Omega_L [D]'");
    let _ = writeln!(s, "set view map");
    let _ = writeln!(s, "set multiplot layout 2,1 title 'T = {t}'");
    let _ = writeln!(s, "set title 'LDOS'");
    let _ = writeln!(s, "splot '{aggregate}' every ::1 using 3:($1=={t} ? $2 : 1/0):4 with points pointtype 5 pointsize 0.3 palette notitle");
    let _ = writeln!(s, "set title 'f'");
    let _ = writeln!(s, "set cbrange [0:1]");
    let _ = writeln!(s, "splot '{aggregate}' every ::1 using 3:($1=={t} ? $2 : 1/0):5 with points pointtype 5 pointsize 0.3 palette notitle");
    let _ = writeln!(s, "unset multiplot");
    s
}

/// Writes every artifact of one run into `dir` and returns the manifest.
pub fn write_run(
    dir: &Path,
    cfg: &SolverConfig,
    sol: &Solution,
    result: &SpectralResult,
    started: DateTime<Utc>,
    emit_plots: bool,
) -> Result<RunManifest, CliError> {
    create_dir(dir)?;
    let config_text = toml::to_string(cfg).map_err(|e| CliError::config(e.to_string()))?;
    let mut files = vec![
        (SPECTRA_FILE, spectra_csv(result)),
        (DISTRIBUTION_FILE, distribution_csv(result)),
        (SELF_ENERGY_FILE, self_energy_csv(sol, result)),
        (CONFIG_FILE, config_text),
    ];
    if emit_plots {
        files.push((PLOT_FILE, run_plot_script()));
    }
    for (name, text) in &files {
        write_file(&dir.join(name), text)?;
    }
    let mut names: Vec<String> = files.iter().map(|(n, _)| n.to_string()).collect();
    names.push(MANIFEST_FILE.to_string());
    let manifest = RunManifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION"),
        started,
        finished: Utc::now(),
        convergence: sol.record.clone(),
        sum_rule_residual: result.sum_rule.residual,
        sum_rule: result.sum_rule.clone(),
        occupation: result.occupation,
        files: names,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::config(e.to_string()))?;
    write_file(path, &(text + "\n"))
}

/// Directory name of one sweep point.
pub fn point_dir(root: &Path, t: f64, omega_l: f64) -> PathBuf {
    root.join(format!("T{t}_Omega{omega_l}"))
}
