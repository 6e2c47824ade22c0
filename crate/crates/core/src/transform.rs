//! Transforms between Floquet matrices on a frequency grid and contour
//! functions in the mixed (relative time, harmonic) representation.
//!
//! A two-time function is written as
//! `G(t, t') = Σ_l e^{ilΩt} g_l(t − t')`, and its Floquet matrix is
//! `G_mn(ω) = g_{m−n}(ω − nΩ)` with `g(ω) = ∫dτ e^{iωτ} g(τ)`. Column `n = 0`
//! therefore carries the harmonics on the grid, and any other entry is a
//! harmonic evaluated at a shifted frequency. Matrix products of Floquet
//! matrices correspond to time convolutions under this map.
//!
//! Time samples are `τ_j = jΔt` for `j ∈ [−N/2, N/2)`, stored in FFT order,
//! with `Δt = 2π/(NΔω)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::algebra::{FloquetIndexSet, FloquetMatrix, FrequencyGrid, KeldyshPropagator, C64};

/// Relative-time grid conjugate to a frequency grid, with cached FFT plans.
#[derive(Clone)]
pub struct TimeGrid {
    freq: FrequencyGrid,
    n_fft: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for TimeGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TimeGrid")
            .field("freq", &self.freq)
            .field("n_fft", &self.n_fft)
            .finish()
    }
}

impl PartialEq for TimeGrid {
    fn eq(&self, other: &Self) -> bool {
        self.freq == other.freq && self.n_fft == other.n_fft
    }
}

impl TimeGrid {
    /// FFT length large enough that third-order products and Floquet shifts up
    /// to `n_max·Ω` do not alias back onto the frequency window.
    pub fn required_size(freq: &FrequencyGrid, n_max: usize, omega_l: f64) -> usize {
        let w = freq.omega_min().abs().max(freq.omega_max().abs());
        let span = 2.0 * (3.0 * w).max(w + n_max as f64 * omega_l);
        let needed = ((span / freq.step()).ceil() as usize).max(2 * freq.len());
        needed.next_power_of_two()
    }

    pub fn new(freq: FrequencyGrid, n_max: usize, omega_l: f64) -> Self {
        Self::with_size(freq, Self::required_size(&freq, n_max, omega_l))
    }

    pub fn with_size(freq: FrequencyGrid, n_fft: usize) -> Self {
        assert!(n_fft >= freq.len() && n_fft % 2 == 0, "FFT length must cover the frequency grid");
        let mut planner = FftPlanner::new();
        Self {
            freq,
            n_fft,
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft),
        }
    }

    pub fn freq(&self) -> &FrequencyGrid {
        &self.freq
    }

    pub fn len(&self) -> usize {
        self.n_fft
    }

    pub fn is_empty(&self) -> bool {
        self.n_fft == 0
    }

    pub fn dt(&self) -> f64 {
        2.0 * PI / (self.n_fft as f64 * self.freq.step())
    }

    /// Signed sample index of storage position `j`.
    pub fn signed_index(&self, j: usize) -> i64 {
        if j < self.n_fft / 2 {
            j as i64
        } else {
            j as i64 - self.n_fft as i64
        }
    }

    pub fn tau(&self, j: usize) -> f64 {
        self.signed_index(j) as f64 * self.dt()
    }

    /// Storage position of `−τ_j`.
    pub fn reflect(&self, j: usize) -> usize {
        (self.n_fft - j) % self.n_fft
    }

    /// `e^{iφτ_j}` for every sample.
    pub fn phases(&self, phi: f64) -> Vec<C64> {
        (0..self.n_fft)
            .map(|j| {
                let (s, c) = (phi * self.tau(j)).sin_cos();
                C64::new(c, s)
            })
            .collect()
    }

    /// Samples on the frequency grid (zero outside it) to `g(τ_j)`.
    pub fn freq_to_time(&self, values: &[C64]) -> Vec<C64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.n_fft];
        self.freq_to_time_into(values, &mut buf, &self.phases(-self.freq.omega_min()));
        buf
    }

    fn freq_to_time_into(&self, values: &[C64], buf: &mut [C64], phase: &[C64]) {
        debug_assert_eq!(values.len(), self.freq.len());
        buf[..values.len()].copy_from_slice(values);
        buf[values.len()..].fill(C64::new(0.0, 0.0));
        self.forward.process(buf);
        let scale = self.freq.step() / (2.0 * PI);
        for (x, p) in buf.iter_mut().zip(phase) {
            *x *= p * scale;
        }
    }

    /// `ĝ(ω_k − shift)` on the frequency grid from time samples.
    pub fn time_to_freq(&self, samples: &[C64], shift: f64) -> Vec<C64> {
        let phase = self.phases(self.freq.omega_min() - shift);
        let mut buf = vec![C64::new(0.0, 0.0); self.n_fft];
        self.time_to_freq_into(samples, &phase, &mut buf);
        buf.truncate(self.freq.len());
        buf
    }

    fn time_to_freq_into(&self, samples: &[C64], phase: &[C64], buf: &mut [C64]) {
        debug_assert_eq!(samples.len(), self.n_fft);
        let dt = self.dt();
        for ((b, s), p) in buf.iter_mut().zip(samples).zip(phase) {
            *b = s * p * dt;
        }
        self.inverse.process(buf);
    }
}

/// Harmonics `g_l(τ_j)` for `|l| ≤ l_max`, each a full time series.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicSeries {
    l_max: usize,
    data: Vec<Vec<C64>>,
}

impl HarmonicSeries {
    pub fn zeros(l_max: usize, n_fft: usize) -> Self {
        Self {
            l_max,
            data: vec![vec![C64::new(0.0, 0.0); n_fft]; 2 * l_max + 1],
        }
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn harmonic(&self, l: i64) -> Option<&[C64]> {
        let pos = l + self.l_max as i64;
        (pos >= 0 && (pos as usize) < self.data.len()).then(|| self.data[pos as usize].as_slice())
    }

    pub fn harmonic_mut(&mut self, l: i64) -> Option<&mut Vec<C64>> {
        let pos = l + self.l_max as i64;
        (pos >= 0 && (pos as usize) < self.data.len()).then(move || &mut self.data[pos as usize])
    }

    pub fn harmonics(&self) -> impl Iterator<Item = (i64, &[C64])> {
        let l0 = self.l_max as i64;
        self.data.iter().enumerate().map(move |(k, v)| (k as i64 - l0, v.as_slice()))
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.data.iter_mut().flatten() {
            *v *= s;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let lm = self.l_max.max(other.l_max) as i64;
        let mut worst: f64 = 0.0;
        for l in -lm..=lm {
            match (self.harmonic(l), other.harmonic(l)) {
                (Some(a), Some(b)) => {
                    for (x, y) in a.iter().zip(b) {
                        worst = worst.max((x - y).norm());
                    }
                }
                (Some(a), None) | (None, Some(a)) => {
                    worst = worst.max(a.iter().map(|z| z.norm()).fold(0.0, f64::max));
                }
                (None, None) => {}
            }
        }
        worst
    }

    /// Harmonics of `G(t', t)` given those of `G(t, t')`:
    /// `r_l(τ) = e^{−ilΩτ} g_l(−τ)`.
    pub fn reversed(&self, grid: &TimeGrid, omega_l: f64) -> Self {
        let mut out = Self::zeros(self.l_max, grid.len());
        for (k, (l, src)) in self.harmonics().enumerate() {
            let phase = grid.phases(-(l as f64) * omega_l);
            for (j, dst) in out.data[k].iter_mut().enumerate() {
                *dst = phase[j] * src[grid.reflect(j)];
            }
        }
        out
    }

    /// Projection onto functions with `G(t, t')* = −G(t', t)`, the symmetry of
    /// the greater and lesser components:
    /// `g_l(τ) ← ½[g_l(τ) − e^{−ilΩτ} conj(g_{−l}(−τ))]`. The sample at
    /// `τ = −NΔt/2` has no mirror partner on the grid and is set to zero.
    pub fn antihermitian_projection(&self, grid: &TimeGrid, omega_l: f64) -> Self {
        let mut out = Self::zeros(self.l_max, grid.len());
        for (k, (l, src)) in self.harmonics().enumerate() {
            let mirror = self.harmonic(-l).expect("harmonic range is symmetric");
            let phase = grid.phases(-(l as f64) * omega_l);
            for (j, dst) in out.data[k].iter_mut().enumerate() {
                *dst = 0.5 * (src[j] - phase[j] * mirror[grid.reflect(j)].conj());
            }
            out.data[k][grid.len() / 2] = C64::new(0.0, 0.0);
        }
        out
    }

    /// Pointwise product in time with harmonics convolved, keeping `|l| ≤ l_out`.
    pub fn product(&self, other: &Self, l_out: usize) -> Self {
        let n = self.data[0].len();
        let (la, lb) = (self.l_max as i64, other.l_max as i64);
        let data: Vec<Vec<C64>> = (-(l_out as i64)..=l_out as i64)
            .into_par_iter()
            .map(|big_l| {
                let mut acc = vec![C64::new(0.0, 0.0); n];
                for l1 in (-la).max(big_l - lb)..=la.min(big_l + lb) {
                    let a = self.harmonic(l1).unwrap();
                    let b = other.harmonic(big_l - l1).unwrap();
                    for ((c, x), y) in acc.iter_mut().zip(a).zip(b) {
                        *c += x * y;
                    }
                }
                acc
            })
            .collect();
        Self { l_max: l_out, data }
    }

    /// Linear combination `a·self + b·other` on a common harmonic range.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.l_max, other.l_max);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * a + q * b).collect())
            .collect();
        Self {
            l_max: self.l_max,
            data,
        }
    }

    /// Multiplies every harmonic by `w(τ_j)`.
    pub fn window(&self, w: &[f64]) -> Self {
        let data = self
            .data
            .iter()
            .map(|v| v.iter().zip(w).map(|(x, s)| x * s).collect())
            .collect();
        Self {
            l_max: self.l_max,
            data,
        }
    }

    /// Re-expresses the series on a grid with another FFT length but the same
    /// frequency spacing, by passing through the frequency domain.
    pub fn resample(&self, from: &TimeGrid, to: &TimeGrid) -> Self {
        if from.len() == to.len() {
            return self.clone();
        }
        let dw = from.freq().step();
        let w0 = from.freq().omega_min();
        let (n_from, n_to) = (from.len() as i64, to.len() as i64);
        let half_to = 0.5 * n_to as f64 * dw;
        let data = self
            .data
            .iter()
            .map(|series| {
                let spec = from.time_to_freq_full(series);
                let mut out = vec![C64::new(0.0, 0.0); to.len()];
                // Unwrap each sample to its frequency nearest zero, then re-wrap.
                for (k, v) in spec.iter().enumerate() {
                    let mut kk = k as i64;
                    if w0 + kk as f64 * dw >= 0.5 * n_from as f64 * dw {
                        kk -= n_from;
                    }
                    let nu = w0 + kk as f64 * dw;
                    if nu >= -half_to && nu < half_to {
                        out[kk.rem_euclid(n_to) as usize] = *v;
                    }
                }
                to.full_freq_to_time(&out)
            })
            .collect();
        Self {
            l_max: self.l_max,
            data,
        }
    }
}

impl TimeGrid {
    fn time_to_freq_full(&self, samples: &[C64]) -> Vec<C64> {
        let phase = self.phases(self.freq.omega_min());
        let mut buf = vec![C64::new(0.0, 0.0); self.n_fft];
        self.time_to_freq_into(samples, &phase, &mut buf);
        buf
    }

    fn full_freq_to_time(&self, spectrum: &[C64]) -> Vec<C64> {
        let mut buf = spectrum.to_vec();
        self.forward.process(&mut buf);
        let scale = self.freq.step() / (2.0 * PI);
        let phase = self.phases(-self.freq.omega_min());
        for (x, p) in buf.iter_mut().zip(&phase) {
            *x *= p * scale;
        }
        buf
    }
}

/// Greater and lesser components of a two-time function in the harmonic
/// representation.
#[derive(Clone, Debug, PartialEq)]
pub struct ContourGF {
    pub grid: TimeGrid,
    pub omega_l: f64,
    pub greater: HarmonicSeries,
    pub lesser: HarmonicSeries,
    /// Largest `|G|` on the outermost frequency points relative to its peak.
    pub edge_leakage: f64,
}

impl ContourGF {
    /// Period-averaged density `−i g^<_0(τ = 0)` per spin.
    pub fn density(&self) -> f64 {
        (self.lesser.harmonic(0).unwrap()[0] * C64::new(0.0, -1.0)).re
    }

    /// Instantaneous density `−i G^<(t, t)` at time `t`.
    pub fn density_at(&self, t: f64) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for (l, h) in self.lesser.harmonics() {
            let (s, c) = (l as f64 * self.omega_l * t).sin_cos();
            acc += C64::new(c, s) * h[0];
        }
        (acc * C64::new(0.0, -1.0)).re
    }

    /// Projects both components onto the contour symmetry `G(t,t')* = −G(t',t)`.
    pub fn symmetrized(&self) -> Self {
        Self {
            greater: self.greater.antihermitian_projection(&self.grid, self.omega_l),
            lesser: self.lesser.antihermitian_projection(&self.grid, self.omega_l),
            ..self.clone()
        }
    }
}

/// `G^< = ½(G^K − G^R + G^A)` and `G^> = ½(G^K + G^R − G^A)`, returned as
/// `(greater, lesser)` per frequency.
pub fn to_greater_lesser(g: &[KeldyshPropagator]) -> Vec<(FloquetMatrix, FloquetMatrix)> {
    g.iter().map(|p| (p.greater(), p.lesser())).collect()
}

/// Column-0 harmonics `g_l(ω) = G_{l,0}(ω)`, `|l| ≤ n_max`, transformed to time.
pub fn wigner_to_time(
    g_freq: &[(FloquetMatrix, FloquetMatrix)],
    grid: &TimeGrid,
    idx: &FloquetIndexSet,
    omega_l: f64,
) -> ContourGF {
    assert_eq!(g_freq.len(), grid.freq().len(), "one matrix pair per frequency point");
    let n_max = idx.n_max();
    let c0 = idx.center();
    let phase = grid.phases(-grid.freq().omega_min());
    let column = |which: usize, l: i64| -> Vec<C64> {
        let row = (l + n_max as i64) as usize;
        g_freq
            .iter()
            .map(|(gt, lt)| if which == 0 { gt[(row, c0)] } else { lt[(row, c0)] })
            .collect()
    };
    let transform = |which: usize| -> HarmonicSeries {
        let data: Vec<Vec<C64>> = (-(n_max as i64)..=n_max as i64)
            .into_par_iter()
            .map(|l| {
                let mut buf = vec![C64::new(0.0, 0.0); grid.len()];
                grid.freq_to_time_into(&column(which, l), &mut buf, &phase);
                buf
            })
            .collect();
        HarmonicSeries { l_max: n_max, data }
    };
    let leakage = {
        let mut peak: f64 = 0.0;
        let mut edge: f64 = 0.0;
        let last = g_freq.len() - 1;
        for (k, (gt, lt)) in g_freq.iter().enumerate() {
            for i in 0..idx.dim() {
                let v = gt[(i, c0)].norm().max(lt[(i, c0)].norm());
                peak = peak.max(v);
                if k == 0 || k == last {
                    edge = edge.max(v);
                }
            }
        }
        if peak > 0.0 {
            edge / peak
        } else {
            0.0
        }
    };
    if leakage > 1e-4 {
        log::debug!("frequency window edge leakage {leakage:.2e} exceeds 1e-4 of the peak");
    }
    ContourGF {
        grid: grid.clone(),
        omega_l,
        greater: transform(0),
        lesser: transform(1),
        edge_leakage: leakage,
    }
}

/// Floquet matrices `G_mn(ω_k) = ĝ_{m−n}(ω_k − nΩ)` from time harmonics.
/// Harmonics beyond the series' range are zero.
pub fn harmonics_to_floquet(
    series: &HarmonicSeries,
    grid: &TimeGrid,
    idx: &FloquetIndexSet,
    omega_l: f64,
) -> Vec<FloquetMatrix> {
    let dim = idx.dim();
    let n_omega = grid.freq().len();
    let shift_phases: Vec<Vec<C64>> = idx
        .modes()
        .map(|n| grid.phases(grid.freq().omega_min() - n as f64 * omega_l))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..dim)
        .flat_map(|i| (0..dim).map(move |j| (i, j)))
        .filter(|&(i, j)| series.harmonic(idx.mode(i) as i64 - idx.mode(j) as i64).is_some())
        .collect();
    let columns: Vec<Vec<C64>> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let l = idx.mode(i) as i64 - idx.mode(j) as i64;
            let mut buf = vec![C64::new(0.0, 0.0); grid.len()];
            grid.time_to_freq_into(series.harmonic(l).unwrap(), &shift_phases[j], &mut buf);
            buf.truncate(n_omega);
            buf
        })
        .collect();
    let mut out = vec![FloquetMatrix::zeros(dim); n_omega];
    for (&(i, j), col) in jobs.iter().zip(&columns) {
        for (m, v) in out.iter_mut().zip(col) {
            m[(i, j)] = *v;
        }
    }
    out
}

/// Inverse of [`wigner_to_time`]: `(greater, lesser)` Floquet matrices per frequency.
pub fn time_to_wigner(g: &ContourGF, idx: &FloquetIndexSet) -> Vec<(FloquetMatrix, FloquetMatrix)> {
    let gt = harmonics_to_floquet(&g.greater, &g.grid, idx, g.omega_l);
    let lt = harmonics_to_floquet(&g.lesser, &g.grid, idx, g.omega_l);
    gt.into_iter().zip(lt).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{g0_keldysh, zero_temperature_fermi, DriveParams};

    fn small_grid() -> FrequencyGrid {
        FrequencyGrid::symmetric(8.0, 1024).unwrap()
    }

    #[test]
    fn fft_size_rule() {
        let freq = FrequencyGrid::symmetric(8.0, 4096).unwrap();
        assert_eq!(TimeGrid::required_size(&freq, 10, 0.5), 16384);
        let g = TimeGrid::new(freq, 10, 0.5);
        assert!((g.dt() * g.len() as f64 * freq.step() - 2.0 * PI).abs() < 1e-12);
        assert_eq!(g.reflect(0), 0);
        assert_eq!(g.tau(g.reflect(5)), -g.tau(5));
    }

    #[test]
    fn static_lorentzian_decays_exponentially() {
        let freq = FrequencyGrid::symmetric(40.0, 8001).unwrap();
        let grid = TimeGrid::with_size(freq, 32768);
        let (e0, gamma) = (0.3, 0.5);
        let vals: Vec<C64> = freq.points().iter().map(|&w| 1.0 / C64::new(w - e0, gamma)).collect();
        let t = grid.freq_to_time(&vals);
        // Retarded pair: g(τ) = −iθ(τ)e^{−iε₀τ−Γτ}.
        for target in [3.0, 6.0, 9.0] {
            let j = (target / grid.dt()).round() as usize;
            let tau = grid.tau(j);
            let exact = C64::new(0.0, -1.0) * C64::new(0.0, -e0 * tau).exp() * (-gamma * tau).exp();
            // Cutting the 1/ω tail at ±W rings like 1/(πWτ).
            let ringing = 1.5 / (PI * 40.0 * tau);
            assert!((t[j] - exact).norm() < ringing, "τ = {tau}: {} vs {exact}", t[j]);
            assert!(t[grid.reflect(j)].norm() < ringing);
        }
    }

    fn solver_like_input(grid: &TimeGrid, idx: &FloquetIndexSet, p: &DriveParams) -> Vec<(FloquetMatrix, FloquetMatrix)> {
        let g: Vec<KeldyshPropagator> = grid
            .freq()
            .points()
            .iter()
            .map(|&w| g0_keldysh(0.25, w, p, idx, zero_temperature_fermi).unwrap())
            .collect();
        to_greater_lesser(&g)
    }

    #[test]
    fn round_trip_recovers_column_zero() {
        let freq = small_grid();
        let idx = FloquetIndexSet::new(3).unwrap();
        let p = DriveParams::new(1.0, 2.0, 0.7, 0.05).unwrap();
        let grid = TimeGrid::new(freq, idx.n_max(), p.omega_l);
        let input = solver_like_input(&grid, &idx, &p);
        let back = time_to_wigner(&wigner_to_time(&input, &grid, &idx, p.omega_l), &idx);
        let c0 = idx.center();
        for ((gt, lt), (bt, bl)) in input.iter().zip(&back) {
            for i in 0..idx.dim() {
                assert!((gt[(i, c0)] - bt[(i, c0)]).norm() < 1e-12);
                assert!((lt[(i, c0)] - bl[(i, c0)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_reproduces_full_matrices() {
        // Every entry within the harmonic range is a shifted column-0 harmonic,
        // so the shift-invariant embedded solution is reconstructed up to
        // interpolation and window error. Off-grid shifts interpolate, so the
        // smooth retarded block is used rather than the Fermi-edge steps.
        let freq = FrequencyGrid::symmetric(8.0, 2048).unwrap();
        let idx = FloquetIndexSet::new(3).unwrap();
        let p = DriveParams::new(0.0, 0.8, 1.0, 0.1).unwrap();
        let grid = TimeGrid::new(freq, idx.n_max(), p.omega_l);
        let input: Vec<(FloquetMatrix, FloquetMatrix)> = freq
            .points()
            .iter()
            .map(|&w| {
                let g = g0_keldysh(0.25, w, &p, &idx, zero_temperature_fermi).unwrap();
                (g.retarded.clone(), g.advanced)
            })
            .collect();
        let back = time_to_wigner(&wigner_to_time(&input, &grid, &idx, p.omega_l), &idx);
        // Compare on the interior of the window, away from truncated tails.
        let mut worst: f64 = 0.0;
        for (k, ((gt, _), (bt, _))) in input.iter().zip(&back).enumerate() {
            let w = freq.omega(k);
            if w.abs() > 4.0 {
                continue;
            }
            for i in 0..idx.dim() {
                for j in 0..idx.dim() {
                    let in_range = i.abs_diff(j) <= idx.n_max();
                    if in_range && (idx.mode(j) as f64 * p.omega_l).abs() + w.abs() < 6.0 {
                        worst = worst.max((gt[(i, j)] - bt[(i, j)]).norm());
                    }
                }
            }
        }
        assert!(worst < 1e-3, "worst {worst}");
    }

    #[test]
    fn driven_level_matches_closed_form_two_time_function() {
        // Level ε₀ + A cos Ωt with bath Γ:
        // G^R(t, t') = −iθ(τ) e^{−iε₀τ − Γτ} e^{−i(A/Ω)(sin Ωt − sin Ωt')}.
        let freq = FrequencyGrid::symmetric(80.0, 32001).unwrap();
        let idx = FloquetIndexSet::new(6).unwrap();
        let p = DriveParams::new(0.9, 0.0, 1.1, 0.4).unwrap();
        let e0 = 0.25;
        let grid = TimeGrid::with_size(freq, 65536);
        let ret: Vec<(FloquetMatrix, FloquetMatrix)> = freq
            .points()
            .iter()
            .map(|&w| {
                let g = g0_keldysh(e0, w, &p, &idx, zero_temperature_fermi).unwrap();
                (g.retarded.clone(), FloquetMatrix::zeros(idx.dim()))
            })
            .collect();
        let c = wigner_to_time(&ret, &grid, &idx, p.omega_l);
        let x = p.e_amp / p.omega_l;
        for &t in &[0.0, 0.7, 2.3] {
            for target in [1.5, 3.0, 5.5] {
                let j = (target / grid.dt()).round() as usize;
                let tau = grid.tau(j);
                let mut num = C64::new(0.0, 0.0);
                for (l, h) in c.greater.harmonics() {
                    let (s, co) = (l as f64 * p.omega_l * t).sin_cos();
                    num += C64::new(co, s) * h[j];
                }
                let tp = t - tau;
                let phase = -e0 * tau - x * ((p.omega_l * t).sin() - (p.omega_l * tp).sin());
                let exact = C64::new(0.0, -1.0) * C64::new(0.0, phase).exp() * (-p.eta * tau).exp();
                let ringing = 1.5 / (PI * 80.0 * tau);
                assert!((num - exact).norm() < ringing, "t = {t}, τ = {tau}: {num} vs {exact}");
            }
        }
    }

    #[test]
    fn single_harmonic_maps_to_adjacent_modes() {
        let freq = small_grid();
        let idx = FloquetIndexSet::new(3).unwrap();
        let grid = TimeGrid::new(freq, 3, 0.7);
        let mut s = HarmonicSeries::zeros(6, grid.len());
        let lor: Vec<C64> = freq.points().iter().map(|&w| 1.0 / C64::new(w, 0.5)).collect();
        *s.harmonic_mut(1).unwrap() = grid.freq_to_time(&lor);
        *s.harmonic_mut(-1).unwrap() = grid.freq_to_time(&lor);
        let mats = harmonics_to_floquet(&s, &grid, &idx, 0.7);
        for m in &mats {
            for i in 0..idx.dim() {
                for j in 0..idx.dim() {
                    if i.abs_diff(j) != 1 {
                        assert_eq!(m[(i, j)], C64::new(0.0, 0.0));
                    }
                }
            }
        }
        assert!(mats[512][(idx.center() + 1, idx.center())].norm() > 0.1);
    }

    #[test]
    fn greater_minus_lesser_is_spectral() {
        let idx = FloquetIndexSet::new(2).unwrap();
        let p = DriveParams::new(1.0, 2.0, 0.7, 0.01).unwrap();
        let g = g0_keldysh(-0.1, 0.4, &p, &idx, zero_temperature_fermi).unwrap();
        let (gt, lt) = &to_greater_lesser(std::slice::from_ref(&g))[0];
        let lhs = gt.sub(lt).unwrap();
        let rhs = g.retarded.sub(&g.advanced).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-14);
    }

    #[test]
    fn filled_and_empty_levels() {
        let idx = FloquetIndexSet::new(1).unwrap();
        let p = DriveParams::new(0.0, 0.0, 5.0, 0.01).unwrap();
        // Level at −0.5, probed below the Fermi edge in mode 0.
        let g = g0_keldysh(-0.5, -0.3, &p, &idx, zero_temperature_fermi).unwrap();
        let (gt, lt) = &to_greater_lesser(std::slice::from_ref(&g))[0];
        let c = idx.center();
        assert!(gt[(c, c)].norm() < 1e-14);
        assert!((lt[(c, c)] - (g.advanced[(c, c)] - g.retarded[(c, c)])).norm() < 1e-14);
        let g = g0_keldysh(0.5, 0.3, &p, &idx, zero_temperature_fermi).unwrap();
        let (_, lt) = &to_greater_lesser(std::slice::from_ref(&g))[0];
        assert!(lt[(c, c)].norm() < 1e-14);
    }

    #[test]
    fn density_of_half_filled_symmetric_level_pair() {
        let freq = FrequencyGrid::symmetric(8.0, 4096).unwrap();
        let idx = FloquetIndexSet::new(2).unwrap();
        let p = DriveParams::new(0.0, 0.0, 0.5, 0.05).unwrap();
        let grid = TimeGrid::new(freq, 2, 0.5);
        let input: Vec<_> = freq
            .points()
            .iter()
            .map(|&w| {
                let a = g0_keldysh(-0.7, w, &p, &idx, zero_temperature_fermi).unwrap();
                let b = g0_keldysh(0.7, w, &p, &idx, zero_temperature_fermi).unwrap();
                let avg = |x: &FloquetMatrix, y: &FloquetMatrix| x.add(y).unwrap().scale(0.5.into());
                KeldyshPropagator {
                    retarded: avg(&a.retarded, &b.retarded),
                    advanced: avg(&a.advanced, &b.advanced),
                    keldysh: avg(&a.keldysh, &b.keldysh),
                }
            })
            .collect();
        let c = wigner_to_time(&to_greater_lesser(&input), &grid, &idx, 0.5);
        let n = c.density();
        assert!((n - 0.5).abs() < 0.02, "density {n}");
        assert!((0.0..=1.0).contains(&c.density_at(0.4)));
    }

    #[test]
    fn resampling_preserves_the_spectrum() {
        let freq = small_grid();
        let a = TimeGrid::with_size(freq, 4096);
        let b = TimeGrid::with_size(freq, 8192);
        let vals: Vec<C64> = freq.points().iter().map(|&w| 1.0 / C64::new(w - 0.2, 0.3)).collect();
        let mut s = HarmonicSeries::zeros(0, a.len());
        *s.harmonic_mut(0).unwrap() = a.freq_to_time(&vals);
        let r = s.resample(&a, &b).resample(&b, &a);
        assert!(r.max_abs_diff(&s) < 1e-12);
        let back = b.time_to_freq(s.resample(&a, &b).harmonic(0).unwrap(), 0.0);
        for (x, y) in back.iter().zip(&vals) {
            assert!((x - y).norm() < 1e-10);
        }
    }
}
