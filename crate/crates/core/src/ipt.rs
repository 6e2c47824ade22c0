//! Second-order (IPT) impurity self-energy on the Keldysh contour.
//!
//! At half filling the Hartree term cancels against the chemical potential,
//! leaving `Σ^≷(t, t') = U² 𝒢^≷(t, t')² 𝒢^≶(t', t)`. The products are local in
//! the two-time representation, so they are formed on the relative-time grid
//! with the drive harmonics convolved.

use crate::algebra::{dagger, FloquetIndexSet, FloquetMatrix, FrequencyGrid, KeldyshPropagator};
use crate::transform::{harmonics_to_floquet, ContourGF, HarmonicSeries, TimeGrid};

/// Time-domain harmonics of a self-energy, kept so the Floquet matrices can
/// be rebuilt at another modulation frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaHarmonics {
    pub grid: TimeGrid,
    pub retarded: HarmonicSeries,
    pub keldysh: HarmonicSeries,
}

/// Impurity self-energy on the frequency grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfEnergy {
    pub idx: FloquetIndexSet,
    pub freq: FrequencyGrid,
    pub omega_l: f64,
    pub values: Vec<KeldyshPropagator>,
    pub harmonics: Option<SigmaHarmonics>,
}

impl SelfEnergy {
    pub fn zero(idx: FloquetIndexSet, freq: FrequencyGrid, omega_l: f64) -> Self {
        Self {
            idx,
            freq,
            omega_l,
            values: vec![KeldyshPropagator::zeros(idx.dim()); freq.len()],
            harmonics: None,
        }
    }

    /// True when every block vanishes identically.
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|p| {
            [&p.retarded, &p.advanced, &p.keldysh]
                .iter()
                .all(|m| m.as_slice().iter().all(|z| z.re == 0.0 && z.im == 0.0))
        })
    }

    /// True when no Floquet off-diagonal element is nonzero.
    pub fn is_diagonal(&self) -> bool {
        let n = self.idx.dim();
        self.values.iter().all(|p| {
            (0..n).all(|i| {
                (0..n).all(|j| i == j || (p.retarded[(i, j)] == 0.0.into() && p.keldysh[(i, j)] == 0.0.into()))
            })
        })
    }

    /// Replaces Σ by its particle-hole even part,
    /// `Σ^R_mn(ω) ← ½[Σ^R_mn(ω) − Σ^R_{−m,−n}(−ω)*]` and
    /// `Σ^K_mn(ω) ← ½[Σ^K_mn(ω) + Σ^K_{−m,−n}(−ω)*]`.
    /// The frequency grid must be symmetric about zero. The harmonics are
    /// left as they are.
    pub fn project_particle_hole(&mut self) {
        let (n, d) = (self.values.len(), self.idx.dim());
        let old = self.values.clone();
        for (k, v) in self.values.iter_mut().enumerate() {
            let (a, b) = (&old[k], &old[n - 1 - k]);
            v.retarded = FloquetMatrix::from_fn(d, |i, j| (a.retarded[(i, j)] - b.retarded[(d - 1 - i, d - 1 - j)].conj()) * 0.5);
            v.keldysh = FloquetMatrix::from_fn(d, |i, j| (a.keldysh[(i, j)] + b.keldysh[(d - 1 - i, d - 1 - j)].conj()) * 0.5);
            v.advanced = dagger(&v.retarded);
        }
    }

    /// `(1 − α)·self + α·new` for both the Floquet matrices and the harmonics.
    pub fn mix(&self, new: &Self, alpha: f64) -> Self {
        let blend = |a: &FloquetMatrix, b: &FloquetMatrix| {
            FloquetMatrix::from_fn(a.dim(), |i, j| a[(i, j)] * (1.0 - alpha) + b[(i, j)] * alpha)
        };
        let values = self
            .values
            .iter()
            .zip(&new.values)
            .map(|(a, b)| {
                let retarded = blend(&a.retarded, &b.retarded);
                KeldyshPropagator {
                    advanced: dagger(&retarded),
                    retarded,
                    keldysh: blend(&a.keldysh, &b.keldysh),
                }
            })
            .collect();
        let harmonics = match (&self.harmonics, &new.harmonics) {
            (Some(a), Some(b)) => Some(SigmaHarmonics {
                grid: b.grid.clone(),
                retarded: a.resampled(&b.grid).0.combine(1.0 - alpha, &b.retarded, alpha),
                keldysh: a.resampled(&b.grid).1.combine(1.0 - alpha, &b.keldysh, alpha),
            }),
            (None, Some(b)) => Some(SigmaHarmonics {
                grid: b.grid.clone(),
                retarded: b.retarded.combine(alpha, &b.retarded, 0.0),
                keldysh: b.keldysh.combine(alpha, &b.keldysh, 0.0),
            }),
            (Some(a), None) => Some(SigmaHarmonics {
                grid: a.grid.clone(),
                retarded: a.retarded.combine(1.0 - alpha, &a.retarded, 0.0),
                keldysh: a.keldysh.combine(1.0 - alpha, &a.keldysh, 0.0),
            }),
            (None, None) => None,
        };
        Self {
            idx: self.idx,
            freq: self.freq,
            omega_l: self.omega_l,
            values,
            harmonics,
        }
    }

    /// Floquet matrices of the same two-time self-energy at another modulation
    /// frequency. Without stored harmonics (a zero self-energy) the result is zero.
    pub fn rebuilt_for(&self, omega_l: f64, grid: &TimeGrid) -> Self {
        match &self.harmonics {
            None => Self::zero(self.idx, self.freq, omega_l),
            Some(h) => {
                let (retarded, keldysh) = h.resampled(grid);
                let harmonics = SigmaHarmonics {
                    grid: grid.clone(),
                    retarded,
                    keldysh,
                };
                Self {
                    idx: self.idx,
                    freq: self.freq,
                    omega_l,
                    values: floquet_from_harmonics(&harmonics, &self.idx, omega_l),
                    harmonics: Some(harmonics),
                }
            }
        }
    }

    /// Largest elementwise change of the retarded block.
    pub fn max_retarded_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.retarded.max_abs_diff(&b.retarded))
            .fold(0.0, f64::max)
    }
}

impl SigmaHarmonics {
    fn resampled(&self, grid: &TimeGrid) -> (HarmonicSeries, HarmonicSeries) {
        (
            self.retarded.resample(&self.grid, grid),
            self.keldysh.resample(&self.grid, grid),
        )
    }
}

fn floquet_from_harmonics(h: &SigmaHarmonics, idx: &FloquetIndexSet, omega_l: f64) -> Vec<KeldyshPropagator> {
    let ret = harmonics_to_floquet(&h.retarded, &h.grid, idx, omega_l);
    let kel = harmonics_to_floquet(&h.keldysh, &h.grid, idx, omega_l);
    ret.into_iter()
        .zip(kel)
        .map(|(r, k)| KeldyshPropagator {
            advanced: dagger(&r),
            retarded: r,
            keldysh: k.antihermitian_part(),
        })
        .collect()
}

/// `θ(τ_j)` with `θ(0) = ½`; the aliasing sample `j = −N/2` is dropped.
pub(crate) fn step_window(grid: &TimeGrid) -> Vec<f64> {
    (0..grid.len())
        .map(|j| match grid.signed_index(j) {
            0 => 0.5,
            s if s > 0 => 1.0,
            _ => 0.0,
        })
        .collect()
}

/// Greater and lesser self-energy harmonics, `|l| ≤ 2·n_max`, before the `U²`
/// factor is applied.
pub fn second_order_kernel(weiss: &ContourGF, idx: &FloquetIndexSet) -> (HarmonicSeries, HarmonicSeries) {
    let sym = weiss.symmetrized();
    let l_out = 2 * idx.n_max();
    let gg = sym.greater.product(&sym.greater, l_out);
    let ll = sym.lesser.product(&sym.lesser, l_out);
    let greater = gg.product(&sym.lesser.reversed(&sym.grid, sym.omega_l), l_out);
    let lesser = ll.product(&sym.greater.reversed(&sym.grid, sym.omega_l), l_out);
    (greater, lesser)
}

/// IPT self-energy from the Weiss field in the contour representation.
pub fn ipt_self_energy(g0_weiss: &ContourGF, u: f64, idx: &FloquetIndexSet) -> SelfEnergy {
    let grid = &g0_weiss.grid;
    if u == 0.0 {
        return SelfEnergy::zero(*idx, *grid.freq(), g0_weiss.omega_l);
    }
    let (mut greater, mut lesser) = second_order_kernel(g0_weiss, idx);
    let u2 = u * u;
    greater.scale(u2);
    lesser.scale(u2);
    let retarded = greater.combine(1.0, &lesser, -1.0).window(&step_window(grid));
    let keldysh = greater.combine(1.0, &lesser, 1.0);
    let harmonics = SigmaHarmonics {
        grid: grid.clone(),
        retarded,
        keldysh,
    };
    SelfEnergy {
        idx: *idx,
        freq: *grid.freq(),
        omega_l: g0_weiss.omega_l,
        values: floquet_from_harmonics(&harmonics, idx, g0_weiss.omega_l),
        harmonics: Some(harmonics),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::BandModel;
    use crate::reference::{g0_keldysh, zero_temperature_fermi, DriveParams};
    use crate::transform::{to_greater_lesser, wigner_to_time};
    use std::f64::consts::PI;

    /// Band-averaged non-interacting local propagator, used as a Weiss field.
    fn local_noninteracting(p: &DriveParams, idx: &FloquetIndexSet, freq: &FrequencyGrid, n_eps: usize) -> Vec<KeldyshPropagator> {
        let quad = BandModel::semielliptic(1.0).unwrap().quadrature(n_eps).unwrap();
        freq.points()
            .iter()
            .map(|&w| {
                let mut acc = KeldyshPropagator::zeros(idx.dim());
                for (&e, &m) in quad.nodes().iter().zip(quad.measure()) {
                    let g = g0_keldysh(e, w, p, idx, zero_temperature_fermi).unwrap();
                    acc.retarded.add_scaled(m.into(), &g.retarded);
                    acc.advanced.add_scaled(m.into(), &g.advanced);
                    acc.keldysh.add_scaled(m.into(), &g.keldysh);
                }
                acc
            })
            .collect()
    }

    fn weiss_contour(p: &DriveParams, idx: &FloquetIndexSet, freq: FrequencyGrid, n_eps: usize) -> ContourGF {
        let g = local_noninteracting(p, idx, &freq, n_eps);
        let grid = TimeGrid::new(freq, idx.n_max(), p.omega_l);
        wigner_to_time(&to_greater_lesser(&g), &grid, idx, p.omega_l)
    }

    #[test]
    fn zero_interaction_gives_zero() {
        let idx = FloquetIndexSet::new(2).unwrap();
        let freq = FrequencyGrid::symmetric(8.0, 256).unwrap();
        let p = DriveParams::new(1.0, 2.0, 0.7, 0.05).unwrap();
        let s = ipt_self_energy(&weiss_contour(&p, &idx, freq, 16), 0.0, &idx);
        assert!(s.is_zero());
    }

    /// Equilibrium second-order self-energy by direct frequency convolution:
    /// `Im Σ(ω) = −πU² ∫∫ A₁A₂A₃ [(1−f₁)(1−f₂)f₃ + f₁f₂(1−f₃)]`, `ω₃ = ω₁ + ω₂ − ω`.
    fn convolution_oracle(spec: &[f64], freq: &FrequencyGrid, u: f64) -> Vec<f64> {
        let n = spec.len();
        let dw = freq.step();
        let f = |k: usize| zero_temperature_fermi(freq.omega(k));
        // Pair spectra on ν = ω₁ + ω₂, index a + b (offset by the grid origin twice).
        let mut holes = vec![0.0; 2 * n - 1];
        let mut parts = vec![0.0; 2 * n - 1];
        for a in 0..n {
            for b in 0..n {
                let w = spec[a] * spec[b] * dw * dw;
                holes[a + b] += w * (1.0 - f(a)) * (1.0 - f(b));
                parts[a + b] += w * f(a) * f(b);
            }
        }
        // ω₃ = ν − ω has index (a + b) − k relative to the same origin.
        (0..n)
            .map(|k| {
                let mut acc = 0.0;
                for s in 0..2 * n - 1 {
                    let c = s as i64 - k as i64;
                    if c < 0 || c >= n as i64 {
                        continue;
                    }
                    let c = c as usize;
                    acc += spec[c] * (holes[s] * f(c) + parts[s] * (1.0 - f(c)));
                }
                -PI * u * u * acc
            })
            .collect()
    }

    #[test]
    fn equilibrium_matches_convolution_oracle() {
        let idx = FloquetIndexSet::new(1).unwrap();
        let freq = FrequencyGrid::symmetric(8.0, 1601).unwrap();
        let p = DriveParams::new(0.0, 0.0, 0.5, 0.05).unwrap();
        let g = local_noninteracting(&p, &idx, &freq, 128);
        let c = idx.center();
        let spec: Vec<f64> = g.iter().map(|x| -x.retarded[(c, c)].im / PI).collect();
        let grid = TimeGrid::new(freq, idx.n_max(), p.omega_l);
        let weiss = wigner_to_time(&to_greater_lesser(&g), &grid, &idx, p.omega_l);
        let sigma = ipt_self_energy(&weiss, 1.0, &idx);
        let oracle = convolution_oracle(&spec, &freq, 1.0);
        let mut worst: f64 = 0.0;
        for (k, o) in oracle.iter().enumerate() {
            worst = worst.max((sigma.values[k].retarded[(c, c)].im - o).abs());
        }
        assert!(worst < 1e-3, "max deviation {worst}");
    }

    #[test]
    fn driven_self_energy_invariants() {
        let idx = FloquetIndexSet::new(3).unwrap();
        let freq = FrequencyGrid::symmetric(8.0, 512).unwrap();
        let p = DriveParams::new(1.0, 2.0, 0.7, 0.05).unwrap();
        let weiss = weiss_contour(&p, &idx, freq, 24);
        let s1 = ipt_self_energy(&weiss, 1.0, &idx);
        let s2 = ipt_self_energy(&weiss, 2.0, &idx);
        let h = s1.harmonics.as_ref().unwrap();
        let (gt, lt) = second_order_kernel(&weiss, &idx);
        let spectral = harmonics_to_floquet(&gt.combine(1.0, &lt, -1.0), &h.grid, &idx, p.omega_l);
        for (k, v) in s1.values.iter().enumerate() {
            assert!(v.advanced_defect() < 1e-14);
            assert!(v.keldysh_defect() < 1e-14);
            for i in 0..idx.dim() {
                assert!(v.retarded[(i, i)].im <= 1e-10, "causality at ω = {}", freq.omega(k));
            }
            let diff = v.retarded.sub(&v.advanced).unwrap();
            assert!(diff.max_abs_diff(&spectral[k]) < 1e-8);
            let twice = &s2.values[k];
            for i in 0..idx.dim() {
                for j in 0..idx.dim() {
                    let a = v.retarded[(i, j)];
                    let b = twice.retarded[(i, j)];
                    assert!((b - 4.0 * a).norm() <= 1e-10 * a.norm().max(1e-300));
                }
            }
        }
    }

    /// `Σ^R_{−m,−n}(−ω) = −conj Σ^R_mn(ω)`, possibly with a `(−1)^{m+n}` factor.
    fn particle_hole_defect(s: &SelfEnergy, staggered: bool) -> f64 {
        let n = s.idx.dim();
        let len = s.values.len();
        let mut worst: f64 = 0.0;
        for k in 0..len {
            let a = &s.values[k].retarded;
            let b = &s.values[len - 1 - k].retarded;
            for i in 0..n {
                for j in 0..n {
                    let sign = if staggered && (i + j) % 2 == 1 { -1.0 } else { 1.0 };
                    worst = worst.max((b[(n - 1 - i, n - 1 - j)] + sign * a[(i, j)].conj()).norm());
                }
            }
        }
        worst
    }

    #[test]
    fn particle_hole_symmetry_at_half_filling() {
        let idx = FloquetIndexSet::new(3).unwrap();
        let freq = FrequencyGrid::symmetric(8.0, 512).unwrap();
        // Undriven and pure hopping drive: plain reflection.
        for p in [
            DriveParams::new(0.0, 0.0, 0.7, 0.05).unwrap(),
            DriveParams::new(0.0, 2.0, 0.7, 0.05).unwrap(),
        ] {
            let s = ipt_self_energy(&weiss_contour(&p, &idx, freq, 24), 1.0, &idx);
            assert!(particle_hole_defect(&s, false) < 1e-6);
        }
        // Pure onsite drive: reflection combined with a half-period shift.
        let p = DriveParams::new(1.0, 0.0, 0.7, 0.05).unwrap();
        let s = ipt_self_energy(&weiss_contour(&p, &idx, freq, 24), 1.0, &idx);
        assert!(particle_hole_defect(&s, true) < 1e-6);
    }

    #[test]
    fn rebuild_at_same_frequency_is_identity() {
        let idx = FloquetIndexSet::new(2).unwrap();
        let freq = FrequencyGrid::symmetric(8.0, 256).unwrap();
        // Drive frequency on the grid so every shifted evaluation lands on a sample.
        let p = DriveParams::new(1.0, 2.0, 11.0 * freq.step(), 0.05).unwrap();
        let weiss = weiss_contour(&p, &idx, freq, 16);
        let s = ipt_self_energy(&weiss, 1.5, &idx);
        let r = s.rebuilt_for(p.omega_l, &weiss.grid);
        assert!(r.max_retarded_diff(&s) == 0.0);
        let other = TimeGrid::with_size(freq, 2 * weiss.grid.len());
        let moved = s.rebuilt_for(p.omega_l, &other);
        let d = moved.max_retarded_diff(&s);
        assert!(d < 1e-10, "{d}");
    }

    fn block_particle_hole_defect(s: &SelfEnergy) -> f64 {
        let (n, d) = (s.values.len(), s.idx.dim());
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let (a, b) = (&s.values[k], &s.values[n - 1 - k]);
            for i in 0..d {
                for j in 0..d {
                    let (r, c) = (d - 1 - i, d - 1 - j);
                    worst = worst
                        .max((a.retarded[(i, j)] + b.retarded[(r, c)].conj()).norm())
                        .max((a.keldysh[(i, j)] - b.keldysh[(r, c)].conj()).norm());
                }
            }
        }
        worst
    }

    #[test]
    fn particle_hole_projection_is_an_idempotent_symmetrisation() {
        let idx = FloquetIndexSet::new(2).unwrap();
        let freq = FrequencyGrid::symmetric(4.0, 64).unwrap();
        let mut s = SelfEnergy::zero(idx, freq, 0.7);
        for (k, v) in s.values.iter_mut().enumerate() {
            let z = |i: usize, j: usize, q: f64| crate::algebra::C64::new((1.3 * k as f64 + 2.1 * i as f64 + q).sin(), (0.7 * j as f64 - q * k as f64).cos());
            v.retarded = FloquetMatrix::from_fn(idx.dim(), |i, j| z(i, j, 0.4));
            v.keldysh = FloquetMatrix::from_fn(idx.dim(), |i, j| z(i, j, 1.9));
            v.advanced = dagger(&v.retarded);
        }
        assert!(block_particle_hole_defect(&s) > 0.1);
        s.project_particle_hole();
        assert!(block_particle_hole_defect(&s) < 1e-15);
        let once = s.clone();
        s.project_particle_hole();
        assert_eq!(s.max_retarded_diff(&once), 0.0);
        assert!(s.values.iter().all(|v| v.advanced_defect() == 0.0));
    }

    #[test]
    fn undriven_self_energy_is_already_particle_hole_even() {
        let idx = FloquetIndexSet::new(2).unwrap();
        let freq = FrequencyGrid::symmetric(8.0, 512).unwrap();
        let p = DriveParams::new(0.0, 0.0, 0.7, 0.05).unwrap();
        let s = ipt_self_energy(&weiss_contour(&p, &idx, freq, 24), 2.0, &idx);
        assert!(block_particle_hole_defect(&s) < 1e-10, "{}", block_particle_hole_defect(&s));
        let mut projected = s.clone();
        projected.project_particle_hole();
        assert!(projected.max_retarded_diff(&s) < 1e-10);
    }
}
