//! Exact non-interacting Green's functions of the driven lattice.
//!
//! Two independent forms are provided: the Bessel spectral sum and the inverse
//! of the tridiagonal Floquet Hamiltonian. Modes outside the retained block are
//! never dropped: the tridiagonal form is padded with exterior modes until the
//! neglected Bessel weight is below roundoff, and the solver uses the
//! equivalent continued-fraction embedding of the same exterior chain.

use serde::{Deserialize, Serialize};

use crate::algebra::{invert, keldysh_from_dyson, FloquetIndexSet, FloquetMatrix, KeldyshPropagator, C64};
use crate::error::{config_error, Error, Result};
use crate::lattice::coupling_amplitude;

/// Largest Bessel order accepted by [`bessel_j`].
pub const BESSEL_MAX_ORDER: i64 = 10 * 10 + 64;

/// Magnitude below which Bessel weights are treated as zero.
pub const BESSEL_THRESHOLD: f64 = 1e-14;

/// Drive and broadening parameters of the non-interacting problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Static onsite modulation amplitude `E`.
    pub e_amp: f64,
    /// Hopping modulation amplitude `T`.
    pub t_amp: f64,
    /// Modulation frequency `Ω_L`.
    pub omega_l: f64,
    /// Bath broadening `η`.
    pub eta: f64,
    /// Half-bandwidth `D`.
    pub half_bandwidth: f64,
}

impl DriveParams {
    pub fn new(e_amp: f64, t_amp: f64, omega_l: f64, eta: f64) -> Result<Self> {
        let p = Self {
            e_amp,
            t_amp,
            omega_l,
            eta,
            half_bandwidth: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_half_bandwidth(mut self, d: f64) -> Result<Self> {
        self.half_bandwidth = d;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_l > 0.0 && self.omega_l.is_finite()) {
            return Err(config_error("Omega_L", "modulation frequency must be positive"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(config_error("eta", "broadening must be positive"));
        }
        if !(self.half_bandwidth > 0.0 && self.half_bandwidth.is_finite()) {
            return Err(config_error("D", "half-bandwidth must be positive"));
        }
        if !self.e_amp.is_finite() || !self.t_amp.is_finite() {
            return Err(config_error("E", "modulation amplitudes must be finite"));
        }
        Ok(())
    }

    /// `A(ε)`.
    pub fn amplitude(&self, eps: f64) -> f64 {
        coupling_amplitude(eps, self.e_amp, self.t_amp, self.half_bandwidth)
    }

    /// Bessel argument `A(ε)/Ω_L`.
    pub fn bessel_argument(&self, eps: f64) -> f64 {
        self.amplitude(eps) / self.omega_l
    }

    pub fn is_driven(&self) -> bool {
        self.e_amp != 0.0 || self.t_amp != 0.0
    }
}

/// Zero-temperature Fermi function at zero chemical potential.
pub fn zero_temperature_fermi(x: f64) -> f64 {
    if x < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Bessel function of the first kind `J_order(x)`.
pub fn bessel_j(order: i64, x: f64) -> Result<f64> {
    if order.abs() > BESSEL_MAX_ORDER {
        return Err(Error::BesselOrder {
            order,
            limit: BESSEL_MAX_ORDER,
        });
    }
    let n = order.unsigned_abs() as usize;
    let seq = bessel_sequence(x, n);
    let sign = if order < 0 && n % 2 == 1 { -1.0 } else { 1.0 };
    Ok(sign * seq[n])
}

/// `J_0(x), …, J_n(x)` by Miller's downward recurrence, normalized with
/// `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_sequence(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    let ax = x.abs();
    if ax == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if ax < 1e-3 {
        // Three-term power series; the next term is below 1e-19.
        let h = 0.5 * ax;
        let mut lead = 1.0;
        for (k, slot) in out.iter_mut().enumerate() {
            if k > 0 {
                lead *= h / k as f64;
            }
            let kf = k as f64;
            *slot = lead * (1.0 - h * h / (kf + 1.0) + h.powi(4) / (2.0 * (kf + 1.0) * (kf + 2.0)));
            if lead == 0.0 {
                break;
            }
        }
    } else {
        let top = (n as f64).max(ax);
        let mut start = (top + 30.0 + (60.0 * top).sqrt()) as usize;
        start += start % 2;
        let mut next = 0.0f64;
        let mut current = 1e-300f64;
        let mut norm = 0.0f64;
        for k in (1..=start).rev() {
            let prev = 2.0 * k as f64 / ax * current - next;
            next = current;
            current = prev;
            // `current` now holds the unnormalized J_{k-1}.
            let order = k - 1;
            if order <= n {
                out[order] = current;
            }
            if order > 0 && order % 2 == 0 {
                norm += 2.0 * current;
            }
            if current.abs() > 1e200 {
                current *= 1e-200;
                next *= 1e-200;
                norm *= 1e-200;
                for v in out.iter_mut().skip(order) {
                    *v *= 1e-200;
                }
            }
        }
        norm += current;
        for v in &mut out {
            *v /= norm;
        }
    }
    if x < 0.0 {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// Smallest `ν₀` with `|J_ν(x)| < threshold` for every `|ν| > ν₀`.
pub fn bessel_cutoff(x: f64, threshold: f64) -> usize {
    let ax = x.abs();
    let mut len = (ax + 20.0 + 4.0 * ax.cbrt() * 4.0) as usize + 8;
    loop {
        let seq = bessel_sequence(ax, len);
        let last = seq.iter().rposition(|v| v.abs() >= threshold).unwrap_or(0);
        if last + 8 < len {
            return last;
        }
        len *= 2;
    }
}

/// Number of exterior modes kept on each side of the block at argument `x`.
///
/// A Floquet state couples two modes only if both lie within the Bessel
/// cutoff of its centre, so twice the cutoff decouples the dropped modes.
pub fn exterior_depth(x: f64) -> usize {
    2 * bessel_cutoff(x, BESSEL_THRESHOLD) + 4
}

/// Integer-order Bessel values `J_ν(x)` for `|ν| ≤ n`, indexed by `ν + n`.
fn bessel_two_sided(x: f64, n: usize) -> Vec<f64> {
    let seq = bessel_sequence(x, n);
    let mut out = vec![0.0; 2 * n + 1];
    for (k, &v) in seq.iter().enumerate() {
        out[n + k] = v;
        out[n - k] = if k % 2 == 1 { -v } else { v };
    }
    out
}

/// Retarded `G_mn(ε, ω)` from the Bessel spectral sum.
pub fn g0_retarded_bessel(eps: f64, omega: f64, p: &DriveParams, idx: &FloquetIndexSet) -> FloquetMatrix {
    let x = p.bessel_argument(eps);
    let n_max = idx.n_max() as i64;
    let pad = bessel_cutoff(x, 1e-12) as i64 + 1;
    let rho_max = n_max + pad;
    let order_max = (rho_max + n_max) as usize;
    let j = bessel_two_sided(x, order_max);
    let jv = |nu: i64| j[(nu + order_max as i64) as usize];
    let dim = idx.dim();
    let mut g = FloquetMatrix::zeros(dim);
    for rho in -rho_max..=rho_max {
        let denom = 1.0 / C64::new(omega - rho as f64 * p.omega_l - eps, p.eta);
        let col: Vec<f64> = idx.modes().map(|m| jv(rho - m as i64)).collect();
        for a in 0..dim {
            if col[a] == 0.0 {
                continue;
            }
            let s = denom * col[a];
            for b in 0..dim {
                g[(a, b)] += s * col[b];
            }
        }
    }
    g
}

/// Retarded `G_mn(ε, ω)` as the inverse of the tridiagonal Floquet matrix
/// `(ω − mΩ − ε + iη)δ_mn − (A/2)(δ_{m,n+1} + δ_{m,n−1})`.
///
/// The matrix is built on the block padded by [`exterior_depth`] modes per side,
/// inverted densely, and cropped to the block.
pub fn g0_inverse_tridiagonal(eps: f64, omega: f64, p: &DriveParams, idx: &FloquetIndexSet) -> Result<FloquetMatrix> {
    let a = p.amplitude(eps);
    let pad = if a == 0.0 { 0 } else { exterior_depth(a / p.omega_l) };
    let big = FloquetIndexSet::new(idx.n_max() + pad)?;
    let inverse = tridiagonal_inverse_matrix(eps, omega, p, &big);
    let full = invert(&inverse)?;
    Ok(FloquetMatrix::from_fn(idx.dim(), |i, j| full[(i + pad, j + pad)]))
}

/// The bare tridiagonal `G₀^{R,−1}` on exactly the modes of `idx`.
pub fn tridiagonal_inverse_matrix(eps: f64, omega: f64, p: &DriveParams, idx: &FloquetIndexSet) -> FloquetMatrix {
    let half = -0.5 * p.amplitude(eps);
    FloquetMatrix::from_fn(idx.dim(), |i, j| {
        if i == j {
            C64::new(omega - idx.mode(i) as f64 * p.omega_l - eps, p.eta)
        } else if i.abs_diff(j) == 1 {
            C64::new(half, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Bath Keldysh self-energy `−2iη(1 − 2f(ω − mΩ))` of mode `m`.
pub fn bath_keldysh(omega: f64, m: i32, p: &DriveParams, f: &impl Fn(f64) -> f64) -> C64 {
    C64::new(0.0, -2.0 * p.eta * (1.0 - 2.0 * f(omega - m as f64 * p.omega_l)))
}

/// Self-energies that the exterior modes impose on the two block edges.
///
/// `retarded[0]`/`keldysh[0]` act on mode `−n_max`, index 1 on `+n_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeEmbedding {
    pub retarded: [C64; 2],
    pub keldysh: [C64; 2],
}

impl EdgeEmbedding {
    pub const NONE: Self = Self {
        retarded: [C64::new(0.0, 0.0); 2],
        keldysh: [C64::new(0.0, 0.0); 2],
    };

    /// Continued fraction over `depth` exterior modes on each side, each
    /// carrying its own bath.
    pub fn new(
        eps: f64,
        omega: f64,
        p: &DriveParams,
        idx: &FloquetIndexSet,
        depth: usize,
        f: &impl Fn(f64) -> f64,
    ) -> Self {
        let t2 = 0.25 * p.amplitude(eps).powi(2);
        if t2 == 0.0 || depth == 0 {
            return Self::NONE;
        }
        let n_max = idx.n_max() as i32;
        let mut out = Self::NONE;
        for (side, sign) in [(0usize, -1i32), (1, 1)] {
            let mut gr = C64::new(0.0, 0.0);
            let mut gk = C64::new(0.0, 0.0);
            for k in (1..=depth as i32).rev() {
                let m = sign * (n_max + k);
                let level = C64::new(omega - m as f64 * p.omega_l - eps, p.eta);
                let new_r = 1.0 / (level - t2 * gr);
                gk = new_r.norm_sqr() * (bath_keldysh(omega, m, p, f) + t2 * gk);
                gr = new_r;
            }
            out.retarded[side] = t2 * gr;
            out.keldysh[side] = t2 * gk;
        }
        out
    }

    /// Depth matching [`exterior_depth`] at this `ε`.
    pub fn exact(eps: f64, omega: f64, p: &DriveParams, idx: &FloquetIndexSet, f: &impl Fn(f64) -> f64) -> Self {
        let a = p.amplitude(eps);
        if a == 0.0 {
            return Self::NONE;
        }
        Self::new(eps, omega, p, idx, exterior_depth(a / p.omega_l), f)
    }
}

/// Embedded inverse `G₀^{R,−1}` on the block: tridiagonal matrix with the
/// exterior self-energies subtracted on the edge modes.
pub fn embedded_inverse_matrix(
    eps: f64,
    omega: f64,
    p: &DriveParams,
    idx: &FloquetIndexSet,
    edge: &EdgeEmbedding,
) -> FloquetMatrix {
    let mut m = tridiagonal_inverse_matrix(eps, omega, p, idx);
    let last = idx.dim() - 1;
    m[(0, 0)] -= edge.retarded[0];
    m[(last, last)] -= edge.retarded[1];
    m
}

/// Total non-interacting Keldysh self-energy on the block: mode baths plus
/// exterior leakage on the edges.
pub fn block_keldysh_self_energy(
    omega: f64,
    p: &DriveParams,
    idx: &FloquetIndexSet,
    edge: &EdgeEmbedding,
    f: &impl Fn(f64) -> f64,
) -> FloquetMatrix {
    let diag: Vec<C64> = idx.modes().map(|m| bath_keldysh(omega, m, p, f)).collect();
    let mut s = FloquetMatrix::from_diagonal(&diag);
    let last = idx.dim() - 1;
    s[(0, 0)] += edge.keldysh[0];
    s[(last, last)] += edge.keldysh[1];
    s
}

/// Non-interacting Keldysh propagator at `(ε, ω)` with the bath distribution `f`.
pub fn g0_keldysh(
    eps: f64,
    omega: f64,
    p: &DriveParams,
    idx: &FloquetIndexSet,
    f: impl Fn(f64) -> f64,
) -> Result<KeldyshPropagator> {
    let edge = EdgeEmbedding::exact(eps, omega, p, idx, &f);
    let gr = invert(&embedded_inverse_matrix(eps, omega, p, idx, &edge))?;
    let ga = gr.dagger();
    let sk = block_keldysh_self_energy(omega, p, idx, &edge, &f);
    let mut gk = keldysh_from_dyson(&gr, &ga, &sk)?;
    gk = gk.antihermitian_part();
    Ok(KeldyshPropagator {
        retarded: gr,
        advanced: ga,
        keldysh: gk,
    })
}

/// Row-0 spectral weight kept when the Floquet-state sum and the column sum are
/// both restricted to the retained modes:
/// `Σ_{|ρ|≤n_max} J_ρ(x) Σ_{|n|≤n_max} J_{ρ−n}(x)`. Equals one without truncation.
pub fn floquet_retention(x: f64, n_max: usize) -> f64 {
    let j = bessel_two_sided(x, 2 * n_max);
    let jv = |nu: i64| j[(nu + 2 * n_max as i64) as usize];
    let n = n_max as i64;
    let mut total = 0.0;
    for rho in -n..=n {
        let inner: f64 = (-n..=n).map(|m| jv(rho - m)).sum();
        total += jv(rho) * inner;
    }
    total
}
