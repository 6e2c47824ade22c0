//! Physical outputs of a converged run: local density of states, the
//! nonequilibrium distribution function, scattering rate, occupation and
//! sum-rule diagnostics.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{FloquetIndexSet, FrequencyGrid, KeldyshPropagator};
use crate::dmft::{LatticeProblem, Solution};
use crate::ipt::SelfEnergy;
use crate::lattice::Quadrature;
use crate::reference::{floquet_retention, DriveParams};

/// `|Im G^R_00|` below which the distribution ratio is not reported.
pub const DISTRIBUTION_MASK: f64 = 1e-6;

/// Sum-rule diagnostics of the row-0 spectral weight.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SumRule {
    /// `max(conservation, 1 − retention)`.
    pub residual: f64,
    /// `|Σ_n w_n − 1|` for the integrated weights `w_n` of the stored block.
    pub conservation: f64,
    /// Band-averaged row-0 weight kept by the Floquet truncation.
    pub retention: f64,
    /// `(n, w_n)` with `w_n = −(1/π)∫dω Im G^R_{0n}(ω)`.
    pub per_mode: Vec<(i32, f64)>,
}

/// Observables of one run on its frequency grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralResult {
    pub omega: Vec<f64>,
    pub ldos_row0: Vec<f64>,
    pub ldos_full: Vec<f64>,
    /// `None` where the spectral weight is below [`DISTRIBUTION_MASK`].
    pub distribution: Vec<Option<f64>>,
    pub scattering_rate: Vec<f64>,
    pub sum_rule: SumRule,
    /// Occupation per spin.
    pub occupation: f64,
}

impl SpectralResult {
    pub fn new(solution: &Solution, problem: &LatticeProblem) -> Self {
        let idx = problem.index_set();
        let freq = problem.frequency_grid();
        let g = &solution.local;
        Self {
            omega: freq.points(),
            ldos_row0: ldos_row0(g, idx),
            ldos_full: ldos_full(g),
            distribution: distribution(g, idx),
            scattering_rate: scattering_rate(&solution.self_energy),
            sum_rule: sum_rule_check(g, freq, idx, problem.drive(), problem.quadrature()),
            occupation: occupation(g, freq, idx),
        }
    }

    /// Mean of the unmasked distribution over `lo ≤ ω ≤ hi`.
    pub fn mean_distribution(&self, lo: f64, hi: f64) -> Option<f64> {
        let picked: Vec<f64> = self
            .omega
            .iter()
            .zip(&self.distribution)
            .filter(|(w, _)| **w >= lo && **w <= hi)
            .filter_map(|(_, f)| *f)
            .collect();
        (!picked.is_empty()).then(|| picked.iter().sum::<f64>() / picked.len() as f64)
    }

    /// Mean of the row-0 LDOS over `|ω| < half_width`.
    pub fn mean_ldos_within(&self, half_width: f64) -> f64 {
        let picked: Vec<f64> = self
            .omega
            .iter()
            .zip(&self.ldos_row0)
            .filter(|(w, _)| w.abs() < half_width)
            .map(|(_, a)| *a)
            .collect();
        picked.iter().sum::<f64>() / picked.len().max(1) as f64
    }
}

/// `−(1/π) Im Σ_n G^R_{0n}(ω)`.
pub fn ldos_row0(g_loc: &[KeldyshPropagator], idx: &FloquetIndexSet) -> Vec<f64> {
    let c = idx.center();
    g_loc
        .iter()
        .map(|p| -p.retarded.row(c).iter().map(|z| z.im).sum::<f64>() / PI)
        .collect()
}

/// `−(1/π) Im Σ_{mn} G^R_{mn}(ω)`.
pub fn ldos_full(g_loc: &[KeldyshPropagator]) -> Vec<f64> {
    g_loc
        .iter()
        .map(|p| -p.retarded.as_slice().iter().map(|z| z.im).sum::<f64>() / PI)
        .collect()
}

/// `f(ω) = ½[1 − Im G^K_00 / (2 Im G^R_00)]`, masked where `|Im G^R_00| < 1e-6`.
pub fn distribution(g_loc: &[KeldyshPropagator], idx: &FloquetIndexSet) -> Vec<Option<f64>> {
    let c = idx.center();
    g_loc
        .iter()
        .map(|p| {
            let r = p.retarded[(c, c)].im;
            (r.abs() >= DISTRIBUTION_MASK).then(|| 0.5 * (1.0 - p.keldysh[(c, c)].im / (2.0 * r)))
        })
        .collect()
}

/// `−2 Im Σ^R_00(ω)`.
pub fn scattering_rate(sigma: &SelfEnergy) -> Vec<f64> {
    let c = sigma.idx.center();
    sigma.values.iter().map(|p| -2.0 * p.retarded[(c, c)].im).collect()
}

/// `∫dω f(ω)·A_00(ω)`, evaluated as `(1/2π)∫dω [Im G^K_00/2 − Im G^R_00]`
/// so that masked points still contribute.
pub fn occupation(g_loc: &[KeldyshPropagator], freq: &FrequencyGrid, idx: &FloquetIndexSet) -> f64 {
    let c = idx.center();
    let filled: Vec<f64> = g_loc
        .iter()
        .map(|p| (0.5 * p.keldysh[(c, c)].im - p.retarded[(c, c)].im) / (2.0 * PI))
        .collect();
    freq.integrate(&filled)
}

/// Integrated row-0 weights and the truncation retention of the band.
pub fn sum_rule_check(
    g_loc: &[KeldyshPropagator],
    freq: &FrequencyGrid,
    idx: &FloquetIndexSet,
    drive: &DriveParams,
    quad: &Quadrature,
) -> SumRule {
    let c = idx.center();
    let per_mode: Vec<(i32, f64)> = idx
        .modes()
        .enumerate()
        .map(|(j, n)| {
            let curve: Vec<f64> = g_loc.iter().map(|p| -p.retarded[(c, j)].im / PI).collect();
            (n, freq.integrate(&curve))
        })
        .collect();
    let total: f64 = per_mode.iter().map(|(_, w)| w).sum();
    let conservation = (total - 1.0).abs();
    let retention = quad.integrate(|e| floquet_retention(drive.bessel_argument(e), idx.n_max()));
    SumRule {
        residual: conservation.max(1.0 - retention),
        conservation,
        retention,
        per_mode,
    }
}

/// Real part of a retarded function from its imaginary part,
/// `Re F(ω) = (1/π) P∫dω' Im F(ω')/(ω' − ω)`, by Maclaurin's rule (odd offsets
/// with doubled weight) on the grid.
pub fn hilbert_real_part(imag: &[f64], freq: &FrequencyGrid) -> Vec<f64> {
    let n = imag.len();
    let w = freq.points();
    let scale = 2.0 * freq.step() / PI;
    (0..n)
        .into_par_iter()
        .map(|k| {
            let mut acc = 0.0;
            let mut j = if k % 2 == 0 { 1 } else { 0 };
            while j < n {
                acc += imag[j] / (w[j] - w[k]);
                j += 2;
            }
            scale * acc
        })
        .collect()
}

/// `max |Re G^R_00 − H[Im G^R_00]|` over the grid.
pub fn kramers_kronig_defect(g_loc: &[KeldyshPropagator], freq: &FrequencyGrid, idx: &FloquetIndexSet) -> f64 {
    let c = idx.center();
    let imag: Vec<f64> = g_loc.iter().map(|p| p.retarded[(c, c)].im).collect();
    let rebuilt = hilbert_real_part(&imag, freq);
    g_loc
        .iter()
        .zip(&rebuilt)
        .map(|(p, r)| (p.retarded[(c, c)].re - r).abs())
        .fold(0.0, f64::max)
}
