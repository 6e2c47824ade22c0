//! DMFT self-consistency: lattice Green's function, Weiss field, damped
//! fixed-point iteration around the IPT impurity solver.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    invert_with_residual, multiply, FloquetIndexSet, FloquetMatrix, FrequencyGrid, KeldyshPropagator, C64,
    INVERSION_RESIDUAL_LIMIT, ONE, ZERO,
};
use crate::error::{config_error, Error, Result};
use crate::ipt::{ipt_self_energy, SelfEnergy};
use crate::lattice::{BandKind, BandModel, Quadrature};
use crate::reference::{bath_keldysh, zero_temperature_fermi, DriveParams, EdgeEmbedding};
use crate::transform::{to_greater_lesser, wigner_to_time, TimeGrid};

mod modal;
mod schur;
mod split;

use split::SplitMatrix;

/// How the iteration is seeded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Start from `Σ = 0`.
    #[default]
    ZeroSigma,
    /// Start from a previously converged self-energy (sweeps).
    WarmStart,
}

/// Physical and numerical parameters of one solver run. Energies in units of `D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "E")]
    pub e_amp: f64,
    #[serde(rename = "T")]
    pub t_amp: f64,
    #[serde(rename = "Omega_L")]
    pub omega_l: f64,
    #[serde(rename = "D")]
    pub half_bandwidth: f64,
    pub eta: f64,
    pub n_max: usize,
    pub band: BandKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dos_table: Option<PathBuf>,
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_omega: usize,
    pub n_eps: usize,
    pub mixing: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed_policy: SeedPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            u: 4.0,
            e_amp: 1.0,
            t_amp: 2.0,
            omega_l: 0.5,
            half_bandwidth: 1.0,
            eta: 0.01,
            n_max: 10,
            band: BandKind::Semielliptic,
            dos_table: None,
            omega_min: -8.0,
            omega_max: 8.0,
            n_omega: 4096,
            n_eps: 64,
            mixing: 0.3,
            tol: 1e-5,
            max_iter: 300,
            seed_policy: SeedPolicy::ZeroSigma,
        }
    }
}

impl SolverConfig {
    /// Checks every range constraint, naming the first offending field.
    pub fn validate(&self) -> Result<()> {
        if !(self.u >= 0.0 && self.u.is_finite()) {
            return Err(config_error("U", "interaction must be finite and >= 0"));
        }
        if !self.e_amp.is_finite() {
            return Err(config_error("E", "must be finite"));
        }
        if !self.t_amp.is_finite() {
            return Err(config_error("T", "must be finite"));
        }
        if !(self.omega_l > 0.0 && self.omega_l.is_finite()) {
            return Err(config_error("Omega_L", "modulation frequency must be > 0"));
        }
        if !(self.half_bandwidth > 0.0 && self.half_bandwidth.is_finite()) {
            return Err(config_error("D", "half-bandwidth must be > 0"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(config_error("eta", "bath broadening must be > 0"));
        }
        if self.n_max < 1 {
            return Err(config_error("n_max", "at least one side-band per direction is required"));
        }
        if !(self.omega_min.is_finite() && self.omega_max.is_finite() && self.omega_min < self.omega_max) {
            return Err(config_error("omega_min", "frequency window must satisfy omega_min < omega_max"));
        }
        if self.n_omega < 2 {
            return Err(config_error("n_omega", "at least two frequency points are required"));
        }
        if self.n_eps < 2 {
            return Err(config_error("n_eps", "at least two band-energy nodes are required"));
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return Err(config_error("mixing", "must lie in (0, 1]"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(config_error("tol", "must be > 0"));
        }
        if self.max_iter < 1 {
            return Err(config_error("max_iter", "must be >= 1"));
        }
        if self.band == BandKind::Table && self.dos_table.is_none() {
            return Err(config_error("dos_table", "band = \"table\" needs a dos_table path"));
        }
        Ok(())
    }

    pub fn drive(&self) -> Result<DriveParams> {
        DriveParams::new(self.e_amp, self.t_amp, self.omega_l, self.eta)?.with_half_bandwidth(self.half_bandwidth)
    }

    pub fn index_set(&self) -> Result<FloquetIndexSet> {
        FloquetIndexSet::new(self.n_max)
    }

    pub fn frequency_grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.omega_min, self.omega_max, self.n_omega)
    }

    pub fn band_model(&self) -> Result<BandModel> {
        BandModel::new(self.band, self.half_bandwidth, self.dos_table.as_deref())
    }
}

/// History of the fixed-point iteration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    /// `max |ΔG_loc^R|` over `(ω, m, n)` after each iteration.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ConvergenceRecord {
    pub fn final_residual(&self) -> Option<f64> {
        self.residuals.last().copied()
    }
}

/// Everything needed to evaluate the band integral, precomputed once per run.
#[derive(Clone, Debug)]
pub struct LatticeProblem {
    drive: DriveParams,
    idx: FloquetIndexSet,
    freq: FrequencyGrid,
    quad: Quadrature,
    /// Exterior-mode embeddings, `[k·n_ε + i]` for `(ω_k, ε_i)`.
    edges: Vec<EdgeEmbedding>,
}

impl LatticeProblem {
    pub fn new(cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let drive = cfg.drive()?;
        let idx = cfg.index_set()?;
        let freq = cfg.frequency_grid()?;
        let quad = cfg.band_model()?.quadrature(cfg.n_eps)?;
        let f = zero_temperature_fermi;
        let edges = if drive.is_driven() {
            (0..freq.len())
                .into_par_iter()
                .flat_map_iter(|k| {
                    let w = freq.omega(k);
                    let quad = &quad;
                    let drive = &drive;
                    quad.nodes().iter().map(move |&e| EdgeEmbedding::exact(e, w, drive, &idx, &f))
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            drive,
            idx,
            freq,
            quad,
            edges,
        })
    }

    pub fn drive(&self) -> &DriveParams {
        &self.drive
    }

    pub fn index_set(&self) -> &FloquetIndexSet {
        &self.idx
    }

    pub fn frequency_grid(&self) -> &FrequencyGrid {
        &self.freq
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    fn edge(&self, k: usize, i: usize) -> EdgeEmbedding {
        if self.edges.is_empty() {
            EdgeEmbedding::NONE
        } else {
            self.edges[k * self.quad.len() + i]
        }
    }

    /// `G_loc(ω) = ∫dε D(ε) [G₀^{-1}(ε, ω) − Σ(ω)]^{-1}` in all three Keldysh blocks.
    pub fn lattice_green(&self, sigma: &SelfEnergy) -> Result<Vec<KeldyshPropagator>> {
        if sigma.values.len() != self.freq.len() {
            return Err(Error::DimensionMismatch {
                left: sigma.values.len(),
                right: self.freq.len(),
            });
        }
        if sigma.idx != self.idx {
            return Err(Error::DimensionMismatch {
                left: sigma.idx.dim(),
                right: self.idx.dim(),
            });
        }
        if !self.drive.is_driven() && sigma.is_diagonal() {
            return Ok(self.lattice_green_diagonal(sigma));
        }
        (0..self.freq.len())
            .into_par_iter()
            .map(|k| self.node_sum(k, &sigma.values[k]))
            .collect()
    }

    fn lattice_green_diagonal(&self, sigma: &SelfEnergy) -> Vec<KeldyshPropagator> {
        let p = &self.drive;
        let f = zero_temperature_fermi;
        (0..self.freq.len())
            .into_par_iter()
            .map(|k| {
                let w = self.freq.omega(k);
                let s = &sigma.values[k];
                let mut gr = vec![ZERO; self.idx.dim()];
                let mut gk = vec![ZERO; self.idx.dim()];
                for (c, m) in self.idx.modes().enumerate() {
                    let level = C64::new(w - m as f64 * p.omega_l, p.eta) - s.retarded[(c, c)];
                    let sk = bath_keldysh(w, m, p, &f) + s.keldysh[(c, c)];
                    for (&e, &wt) in self.quad.nodes().iter().zip(self.quad.measure()) {
                        let g = ONE / (level - e);
                        gr[c] += g * wt;
                        gk[c] += sk * g.norm_sqr() * wt;
                    }
                }
                let keldysh = FloquetMatrix::from_diagonal(&gk).antihermitian_part();
                KeldyshPropagator::from_retarded_keldysh(FloquetMatrix::from_diagonal(&gr), keldysh)
            })
            .collect()
    }

    /// Band sum at one frequency, in node order.
    fn node_sum(&self, k: usize, sigma: &KeldyshPropagator) -> Result<KeldyshPropagator> {
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx512f") {
                // SAFETY: the required CPU feature was detected at runtime.
                return unsafe { self.node_sum_avx512(k, sigma) };
            }
            if std::arch::is_x86_feature_detected!("avx2") {
                // SAFETY: as above.
                return unsafe { self.node_sum_avx2(k, sigma) };
            }
        }
        self.node_sum_inline(k, sigma)
    }

    /// Modal form first; dense per-node inversion where it is not accurate.
    #[inline(always)]
    fn node_sum_inline(&self, k: usize, sigma: &KeldyshPropagator) -> Result<KeldyshPropagator> {
        match self.modal_node_sum(k, sigma) {
            Some(g) => Ok(g),
            None => self.node_sum_generic(k, sigma),
        }
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx512f")]
    unsafe fn node_sum_avx512(&self, k: usize, sigma: &KeldyshPropagator) -> Result<KeldyshPropagator> {
        self.node_sum_inline(k, sigma)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn node_sum_avx2(&self, k: usize, sigma: &KeldyshPropagator) -> Result<KeldyshPropagator> {
        self.node_sum_inline(k, sigma)
    }

    // Vector width changes the instruction selection only; each element sees
    // the same operations in the same order, so all variants agree bitwise.
    #[inline(always)]
    fn node_sum_generic(&self, k: usize, sigma: &KeldyshPropagator) -> Result<KeldyshPropagator> {
        let n = self.idx.dim();
        let last = n - 1;
        let p = &self.drive;
        let w = self.freq.omega(k);
        let f = zero_temperature_fermi;
        let sr = SplitMatrix::from_complex(sigma.retarded.as_slice(), n);
        let mut sk = SplitMatrix::from_complex(sigma.keldysh.as_slice(), n);
        for (c, m) in self.idx.modes().enumerate() {
            sk.add_at(c, c, bath_keldysh(w, m, p, &f));
        }

        let mut g = SplitMatrix::zeros(n);
        let mut s = sk.clone();
        let mut x = SplitMatrix::zeros(n);
        let mut gd = SplitMatrix::zeros(n);
        let mut acc_r = SplitMatrix::zeros(n);
        let mut acc_k = SplitMatrix::zeros(n);
        let mut pivots = vec![0usize; n];
        let mut probe = vec![ZERO; n];

        for (i, (&e, &wt)) in self.quad.nodes().iter().zip(self.quad.measure()).enumerate() {
            let edge = self.edge(k, i);
            let hop = C64::new(-0.5 * p.amplitude(e), 0.0);
            let diag = |c: usize| {
                let mut d = C64::new(w - self.idx.mode(c) as f64 * p.omega_l - e, p.eta);
                if c == 0 {
                    d -= edge.retarded[0];
                }
                if c == last {
                    d -= edge.retarded[1];
                }
                d
            };
            g.assign_neg(&sr);
            for c in 0..n {
                g.add_at(c, c, diag(c));
                if c > 0 {
                    g.add_at(c, c - 1, hop);
                }
                if c < last {
                    g.add_at(c, c + 1, hop);
                }
            }
            let residual = if g.invert_in_place(&mut pivots).is_err() {
                f64::INFINITY
            } else {
                // Probe the inverse with the all-ones vector: ‖M·(G·1) − 1‖.
                for (a, pv) in probe.iter_mut().enumerate() {
                    *pv = g.row_sum(a);
                }
                (0..n)
                    .map(|a| {
                        let mut r = diag(a) * probe[a];
                        if a > 0 {
                            r += hop * probe[a - 1];
                        }
                        if a < last {
                            r += hop * probe[a + 1];
                        }
                        for (b, pb) in probe.iter().enumerate() {
                            r -= sr.at(a, b) * pb;
                        }
                        (r - ONE).norm()
                    })
                    .fold(0.0, f64::max)
            };
            if !(residual <= INVERSION_RESIDUAL_LIMIT) {
                return Err(Error::NodeInversion {
                    eps: e,
                    omega: w,
                    residual,
                });
            }

            s.set(0, 0, sk.at(0, 0) + edge.keldysh[0]);
            s.set(last, last, sk.at(last, last) + edge.keldysh[1]);
            x.assign_product(&g, &s);
            gd.assign_dagger(&g);
            // G^K = X·G^† is anti-hermitian: accumulate the upper triangle only.
            acc_k.add_product(wt, &x, &gd, true);
            acc_r.add_scaled(wt, &g);
        }
        let mut gk = acc_k.to_complex();
        for a in 0..n {
            gk[a * n + a] = C64::new(0.0, gk[a * n + a].im);
            for b in 0..a {
                gk[a * n + b] = -gk[b * n + a].conj();
            }
        }
        Ok(KeldyshPropagator::from_retarded_keldysh(
            FloquetMatrix::from_row_major(n, acc_r.to_complex()),
            FloquetMatrix::from_row_major(n, gk),
        ))
    }
}

/// Local lattice propagator for `sigma` under `cfg`.
pub fn lattice_green(sigma: &SelfEnergy, cfg: &SolverConfig) -> Result<Vec<KeldyshPropagator>> {
    LatticeProblem::new(cfg)?.lattice_green(sigma)
}

/// Weiss field from `𝒢^{-1} = G_loc^{-1} + Σ`, blockwise in the `(R, A, K)` basis:
/// `𝒢^R = (G^{R,-1} + Σ^R)^{-1}` and
/// `𝒢^K = 𝒢^R [G^{R,-1} G^K G^{A,-1} − Σ^K] 𝒢^A`.
pub fn weiss_field(g_loc: &[KeldyshPropagator], sigma: &SelfEnergy) -> Result<Vec<KeldyshPropagator>> {
    if g_loc.len() != sigma.values.len() {
        return Err(Error::DimensionMismatch {
            left: g_loc.len(),
            right: sigma.values.len(),
        });
    }
    g_loc
        .par_iter()
        .zip(&sigma.values)
        .enumerate()
        .map(|(k, (g, s))| {
            let omega = sigma.freq.omega(k);
            let fail = |e: Error| match e {
                Error::InversionFailure { residual } => Error::WeissInversion { omega, residual },
                other => other,
            };
            let (g_inv, _) = invert_with_residual(&g.retarded).map_err(fail)?;
            let (weiss_r, _) = invert_with_residual(&g_inv.add(&s.retarded)?).map_err(fail)?;
            let weiss_a = weiss_r.dagger();
            let inner = multiply(&multiply(&g_inv, &g.keldysh)?, &g_inv.dagger())?.sub(&s.keldysh)?;
            let weiss_k = multiply(&multiply(&weiss_r, &inner)?, &weiss_a)?.antihermitian_part();
            Ok(KeldyshPropagator {
                retarded: weiss_r,
                advanced: weiss_a,
                keldysh: weiss_k,
            })
        })
        .collect()
}

/// Converged (or iteration-capped) state of one run.
#[derive(Clone, Debug)]
pub struct Solution {
    pub self_energy: SelfEnergy,
    pub local: Vec<KeldyshPropagator>,
    pub record: ConvergenceRecord,
}

impl Solution {
    pub fn converged(&self) -> bool {
        self.record.converged
    }
}

/// The fixed-point iteration for one configuration.
#[derive(Clone, Debug)]
pub struct Solver {
    cfg: SolverConfig,
    problem: LatticeProblem,
    grid: TimeGrid,
    /// Undriven with a symmetric band and grid: Σ is kept particle-hole even.
    particle_hole: bool,
}

impl Solver {
    pub fn new(cfg: &SolverConfig) -> Result<Self> {
        let problem = LatticeProblem::new(cfg)?;
        let grid = TimeGrid::new(problem.freq, problem.idx.n_max(), cfg.omega_l);
        let particle_hole = !problem.drive.is_driven() && problem.freq.is_symmetric() && problem.quad.is_symmetric();
        Ok(Self {
            cfg: cfg.clone(),
            problem,
            grid,
            particle_hole,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn problem(&self) -> &LatticeProblem {
        &self.problem
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn zero_self_energy(&self) -> SelfEnergy {
        SelfEnergy::zero(self.problem.idx, self.problem.freq, self.cfg.omega_l)
    }

    /// A self-energy from another run carried over to this run's drive
    /// frequency and time grid.
    pub fn adopt_seed(&self, seed: &SelfEnergy) -> Result<SelfEnergy> {
        if seed.idx != self.problem.idx {
            return Err(config_error("n_max", "warm-start seed has a different Floquet truncation"));
        }
        if seed.freq != self.problem.freq {
            return Err(config_error("n_omega", "warm-start seed lives on a different frequency grid"));
        }
        let same_grid = seed.harmonics.as_ref().is_none_or(|h| h.grid == self.grid);
        if seed.omega_l == self.cfg.omega_l && same_grid {
            return Ok(seed.clone());
        }
        Ok(seed.rebuilt_for(self.cfg.omega_l, &self.grid))
    }

    /// One impurity step: Weiss field from `(G_loc, Σ)`, then the IPT self-energy.
    /// For a particle-hole symmetric lattice the result is projected onto
    /// its particle-hole even part.
    pub fn impurity_step(&self, g_loc: &[KeldyshPropagator], sigma: &SelfEnergy) -> Result<SelfEnergy> {
        if self.cfg.u == 0.0 {
            return Ok(self.zero_self_energy());
        }
        let weiss = weiss_field(g_loc, sigma)?;
        let contour = wigner_to_time(&to_greater_lesser(&weiss), &self.grid, &self.problem.idx, self.cfg.omega_l);
        let mut fresh = ipt_self_energy(&contour, self.cfg.u, &self.problem.idx);
        if self.particle_hole {
            fresh.project_particle_hole();
        }
        Ok(fresh)
    }

    /// Runs the damped iteration `Σ ← (1 − α)Σ + α·Σ_IPT[𝒢]` from `seed`
    /// (zero when `None`) until `max |ΔG_loc^R| < tol` or `max_iter`.
    pub fn run(&self, seed: Option<&SelfEnergy>) -> Result<Solution> {
        let mut sigma = match seed {
            Some(s) => self.adopt_seed(s)?,
            None => self.zero_self_energy(),
        };
        let mut g = self.problem.lattice_green(&sigma)?;
        let mut record = ConvergenceRecord::default();
        for it in 1..=self.cfg.max_iter {
            let fresh = self.impurity_step(&g, &sigma)?;
            let mixed = sigma.mix(&fresh, self.cfg.mixing);
            let (g_next, residual) = if mixed.is_zero() && sigma.is_zero() {
                (g, 0.0)
            } else {
                let g_next = self.problem.lattice_green(&mixed)?;
                let r = max_retarded_change(&g, &g_next);
                (g_next, r)
            };
            log::info!("iteration {it}: residual {residual:.3e}");
            record.residuals.push(residual);
            record.iterations = it;
            sigma = mixed;
            g = g_next;
            if residual < self.cfg.tol {
                record.converged = true;
                break;
            }
        }
        if !record.converged {
            log::warn!(
                "not converged after {} iterations (residual {:.3e})",
                record.iterations,
                record.final_residual().unwrap_or(f64::NAN)
            );
        }
        Ok(Solution {
            self_energy: sigma,
            local: g,
            record,
        })
    }
}

/// `max |A^R − B^R|` over every frequency and Floquet pair.
pub fn max_retarded_change(a: &[KeldyshPropagator], b: &[KeldyshPropagator]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.retarded.max_abs_diff(&y.retarded))
        .fold(0.0, f64::max)
}

/// Solves `cfg` from `Σ = 0`.
pub fn solve(cfg: &SolverConfig) -> Result<Solution> {
    Solver::new(cfg)?.run(None)
}

/// Solves `cfg` starting from `seed`, which may come from a run at another
/// modulation frequency.
pub fn solve_with_seed(cfg: &SolverConfig, seed: &SelfEnergy) -> Result<Solution> {
    Solver::new(cfg)?.run(Some(seed))
}
