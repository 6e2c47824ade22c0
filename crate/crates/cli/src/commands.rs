//! The `run` and `sweep` subcommands.

use std::path::Path;

use chrono::{DateTime, Utc};
use floquet_dmft::dmft::{SeedPolicy, Solver, SolverConfig};
use floquet_dmft::ipt::SelfEnergy;
use floquet_dmft::observables::SpectralResult;
use serde::Serialize;

use crate::artifacts::{self, fmt17, point_dir, write_file, write_json, RunManifest};
use crate::config::ConfigFile;
use crate::error::CliError;

pub const AGGREGATE_FILE: &str = "sweep.csv";
pub const SWEEP_MANIFEST_FILE: &str = "sweep_manifest.json";

/// Outcome of a command that ran the solver: whether everything converged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    NotConverged,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Self::Converged => 0,
            Self::NotConverged => 2,
        }
    }
}

struct PointRun {
    manifest: RunManifest,
    result: SpectralResult,
    sigma: SelfEnergy,
}

fn solve_point(
    cfg: &SolverConfig,
    seed: Option<&SelfEnergy>,
    dir: &Path,
    emit_plots: bool,
) -> Result<PointRun, CliError> {
    let started = Utc::now();
    let solver = Solver::new(cfg)?;
    let sol = solver.run(seed)?;
    let result = SpectralResult::new(&sol, solver.problem());
    let manifest = artifacts::write_run(dir, cfg, &sol, &result, started, emit_plots)?;
    Ok(PointRun {
        manifest,
        result,
        sigma: sol.self_energy,
    })
}

pub fn run(config: &ConfigFile, out: &Path, emit_plots: bool) -> Result<Outcome, CliError> {
    let cfg = config.single()?;
    let point = solve_point(&cfg, None, out, emit_plots)?;
    let record = &point.manifest.convergence;
    log::info!(
        "{} after {} iterations; sum-rule residual {:.3e}; artifacts in {}",
        if record.converged { "converged" } else { "not converged" },
        record.iterations,
        point.manifest.sum_rule_residual,
        out.display()
    );
    Ok(if record.converged {
        Outcome::Converged
    } else {
        Outcome::NotConverged
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Converged,
    NotConverged,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    #[serde(rename = "T")]
    pub t_amp: f64,
    #[serde(rename = "Omega_L")]
    pub omega_l: f64,
    pub status: PointStatus,
    pub dir: String,
    pub warm_started: bool,
    pub iterations: Option<usize>,
    pub final_residual: Option<f64>,
    pub sum_rule_residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepManifest {
    pub version: &'static str,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
    pub base_config: SolverConfig,
    pub points: Vec<SweepPoint>,
    pub files: Vec<String>,
}

/// Runs every `(T, Ω_L)` point, ascending in `Ω_L` for each `T`, seeding each
/// point with the previous converged self-energy unless the configuration
/// asks for `seed_policy = "zero_sigma"`.
pub fn sweep(config: &ConfigFile, out: &Path, emit_plots: bool) -> Result<Outcome, CliError> {
    if config.point_count() < 2 {
        return Err(CliError::config(
            "a sweep needs at least two points; give `Omega_L` or `T` as a list or range",
        ));
    }
    let warm = config.explicit_seed_policy != Some(SeedPolicy::ZeroSigma);
    let started = Utc::now();
    artifacts::create_dir(out)?;
    let mut aggregate = String::from("T [D],Omega_L [D],omega [D],ldos [1/D],f [1]\n");
    let mut points = Vec::new();
    let mut files = Vec::new();
    for &t in &config.t_values {
        let mut seed: Option<SelfEnergy> = None;
        for &w in &config.omega_values {
            let cfg = SolverConfig {
                t_amp: t,
                omega_l: w,
                seed_policy: if warm { SeedPolicy::WarmStart } else { SeedPolicy::ZeroSigma },
                ..config.base.clone()
            };
            let dir = point_dir(out, t, w);
            let rel = dir.strip_prefix(out).unwrap_or(&dir).display().to_string();
            log::info!("sweep point T = {t}, Omega_L = {w}");
            let warm_started = warm && seed.is_some();
            match solve_point(&cfg, seed.as_ref().filter(|_| warm), &dir, emit_plots) {
                Ok(p) => {
                    let rec = &p.manifest.convergence;
                    let r = &p.result;
                    for k in 0..r.omega.len() {
                        let f = r.distribution[k].unwrap_or(f64::NAN);
                        let row = [t, w, r.omega[k], r.ldos_row0[k], f].map(fmt17);
                        aggregate.push_str(&row.join(","));
                        aggregate.push('\n');
                    }
                    files.extend(p.manifest.files.iter().map(|f| format!("{rel}/{f}")));
                    points.push(SweepPoint {
                        t_amp: t,
                        omega_l: w,
                        status: if rec.converged {
                            PointStatus::Converged
                        } else {
                            PointStatus::NotConverged
                        },
                        dir: rel,
                        warm_started,
                        iterations: Some(rec.iterations),
                        final_residual: rec.final_residual(),
                        sum_rule_residual: Some(p.manifest.sum_rule_residual),
                        error: None,
                    });
                    seed = Some(p.sigma);
                }
                Err(e @ CliError::Io { .. }) => return Err(e),
                Err(e) => {
                    log::error!("sweep point T = {t}, Omega_L = {w} failed: {e}");
                    points.push(SweepPoint {
                        t_amp: t,
                        omega_l: w,
                        status: PointStatus::Failed,
                        dir: rel,
                        warm_started,
                        iterations: None,
                        final_residual: None,
                        sum_rule_residual: None,
                        error: Some(e.to_string()),
                    });
                }
            }
        }
    }
    write_file(&out.join(AGGREGATE_FILE), &aggregate)?;
    files.push(AGGREGATE_FILE.to_string());
    if emit_plots {
        for (i, &t) in config.t_values.iter().enumerate() {
            let name = format!("sweep_T{i}.gp");
            write_file(&out.join(&name), &artifacts::sweep_plot_script(AGGREGATE_FILE, t))?;
            files.push(name);
        }
    }
    files.push(SWEEP_MANIFEST_FILE.to_string());
    let all_converged = points.iter().all(|p| matches!(p.status, PointStatus::Converged));
    let manifest = SweepManifest {
        version: env!("CARGO_PKG_VERSION"),
        started,
        finished: Utc::now(),
        base_config: config.base.clone(),
        points,
        files,
    };
    write_json(&out.join(SWEEP_MANIFEST_FILE), &manifest)?;
    Ok(if all_converged {
        Outcome::Converged
    } else {
        Outcome::NotConverged
    })
}
