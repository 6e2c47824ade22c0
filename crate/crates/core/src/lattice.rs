//! Band dispersion, density of states and band-energy quadrature.
//!
//! Momentum sums are reduced to one-dimensional integrals over the scalar band
//! energy `ε`. The modulated hopping shares the structure factor of the static
//! hopping, so the drive amplitude seen by a state depends on `ε` only.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algebra::FloquetMatrix;
use crate::error::{config_error, Error, Result};

/// Which density of states closes the self-consistency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandKind {
    /// Bethe-lattice semicircle `(2/πD²)·√(D² − ε²)`.
    Semielliptic,
    /// Simple cubic nearest-neighbour lattice scaled to half-bandwidth `D`.
    Cubic3d,
    /// Two-column text file `(ε, D(ε))`.
    Table,
}

impl fmt::Display for BandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BandKind::Semielliptic => "semielliptic",
            BandKind::Cubic3d => "cubic3d",
            BandKind::Table => "table",
        })
    }
}

impl FromStr for BandKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semielliptic" => Ok(BandKind::Semielliptic),
            "cubic3d" => Ok(BandKind::Cubic3d),
            "table" => Ok(BandKind::Table),
            other => Err(config_error(
                "band",
                format!("unknown band `{other}` (expected semielliptic, cubic3d or table)"),
            )),
        }
    }
}

/// A band with its density of states.
#[derive(Clone, Debug, PartialEq)]
pub struct BandModel {
    kind: BandKind,
    half_bandwidth: f64,
    table: Option<DosTable>,
}

#[derive(Clone, Debug, PartialEq)]
struct DosTable {
    eps: Vec<f64>,
    dos: Vec<f64>,
}

impl BandModel {
    pub fn semielliptic(half_bandwidth: f64) -> Result<Self> {
        Self::analytic(BandKind::Semielliptic, half_bandwidth)
    }

    pub fn cubic3d(half_bandwidth: f64) -> Result<Self> {
        Self::analytic(BandKind::Cubic3d, half_bandwidth)
    }

    fn analytic(kind: BandKind, half_bandwidth: f64) -> Result<Self> {
        check_half_bandwidth(half_bandwidth)?;
        Ok(Self {
            kind,
            half_bandwidth,
            table: None,
        })
    }

    /// Builds a band of the given kind; `table` is required for [`BandKind::Table`].
    pub fn new(kind: BandKind, half_bandwidth: f64, table: Option<&Path>) -> Result<Self> {
        match kind {
            BandKind::Table => {
                let path = table.ok_or_else(|| config_error("dos_table", "band = \"table\" requires a dos_table path"))?;
                Self::from_table_file(path, half_bandwidth)
            }
            _ => Self::analytic(kind, half_bandwidth),
        }
    }

    /// Loads a tabulated DOS. The table is normalized to unit weight and
    /// interpolated linearly; it must be nonnegative, mirror symmetric and
    /// supported inside `[−D, D]`.
    pub fn from_table_file(path: &Path, half_bandwidth: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_table_text(&text, half_bandwidth).map_err(|e| match e {
            Error::DosTable { reason, .. } => Error::DosTable {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn from_table_text(text: &str, half_bandwidth: f64) -> Result<Self> {
        check_half_bandwidth(half_bandwidth)?;
        let bad = |reason: String| Error::DosTable {
            path: PathBuf::new(),
            reason,
        };
        let mut eps = Vec::new();
        let mut dos = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
            if cols.len() != 2 {
                return Err(bad(format!("line {}: expected two columns", lineno + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("line {}: `{s}` is not a number", lineno + 1)))
            };
            let (e, d) = (parse(cols[0])?, parse(cols[1])?);
            if !e.is_finite() || !d.is_finite() || d < 0.0 {
                return Err(bad(format!("line {}: values must be finite and D(ε) ≥ 0", lineno + 1)));
            }
            if let Some(&last) = eps.last() {
                if e <= last {
                    return Err(bad(format!("line {}: ε must be strictly increasing", lineno + 1)));
                }
            }
            eps.push(e);
            dos.push(d);
        }
        if eps.len() < 3 {
            return Err(bad("at least three rows are required".into()));
        }
        let tol = 1e-9 * half_bandwidth;
        if eps[0] < -half_bandwidth - tol || eps[eps.len() - 1] > half_bandwidth + tol {
            return Err(bad(format!("support exceeds [-{half_bandwidth}, {half_bandwidth}]")));
        }
        let mut table = DosTable { eps, dos };
        let peak = table.dos.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            return Err(bad("density vanishes everywhere".into()));
        }
        let asym = table
            .eps
            .iter()
            .map(|&e| (table.eval(e) - table.eval(-e)).abs())
            .fold(0.0, f64::max);
        if asym > 1e-3 * peak {
            return Err(bad(format!(
                "density is not mirror symmetric (max |D(ε) − D(−ε)| = {asym:.3e})"
            )));
        }
        let norm = table.trapezoid();
        for d in &mut table.dos {
            *d /= norm;
        }
        Ok(Self {
            kind: BandKind::Table,
            half_bandwidth,
            table: Some(table),
        })
    }

    pub fn kind(&self) -> BandKind {
        self.kind
    }

    pub fn half_bandwidth(&self) -> f64 {
        self.half_bandwidth
    }

    /// Density of states per unit energy, zero outside the band.
    pub fn dos(&self, eps: f64) -> f64 {
        let d = self.half_bandwidth;
        if !(eps.abs() < d) {
            return 0.0;
        }
        match self.kind {
            BandKind::Semielliptic => 2.0 / (PI * d * d) * (d * d - eps * eps).sqrt(),
            BandKind::Cubic3d => cubic_dos_unit(eps.abs() / d) / d,
            BandKind::Table => self.table.as_ref().map_or(0.0, |t| t.eval(eps)),
        }
    }

    /// Gauss-Legendre quadrature with `n` nodes for this band.
    pub fn quadrature(&self, n: usize) -> Result<Quadrature> {
        Quadrature::new(self, n)
    }
}

fn check_half_bandwidth(d: f64) -> Result<()> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(config_error("D", "half-bandwidth must be positive"));
    }
    Ok(())
}

impl DosTable {
    fn eval(&self, e: f64) -> f64 {
        let n = self.eps.len();
        if e < self.eps[0] || e > self.eps[n - 1] {
            return 0.0;
        }
        let k = self.eps.partition_point(|&x| x <= e).clamp(1, n - 1);
        let (x0, x1) = (self.eps[k - 1], self.eps[k]);
        let t = (e - x0) / (x1 - x0);
        self.dos[k - 1] * (1.0 - t) + self.dos[k] * t
    }

    fn trapezoid(&self) -> f64 {
        self.eps
            .windows(2)
            .zip(self.dos.windows(2))
            .map(|(e, d)| 0.5 * (e[1] - e[0]) * (d[0] + d[1]))
            .sum()
    }
}

/// Drive amplitude `A(ε) = E + T·ε/D` entering the Floquet coupling.
pub fn coupling_amplitude(eps: f64, e_amp: f64, t_amp: f64, half_bandwidth: f64) -> f64 {
    e_amp + t_amp * eps / half_bandwidth
}

/// Fixed band-energy nodes with measure weights.
///
/// Nodes are Gauss-Legendre points in `θ` with `ε = D·sin θ`, which absorbs the
/// square-root band edges. `weights` are the raw quadrature weights for `dε`;
/// `measure` is `weights · D(ε)` rescaled so that it sums to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    measure: Vec<f64>,
}

impl Quadrature {
    pub fn new(band: &BandModel, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(config_error("n_eps", "at least two band-energy nodes are required"));
        }
        let d = band.half_bandwidth();
        let (x, w) = gauss_legendre(n);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (&xi, &wi) in x.iter().zip(&w) {
            let theta = 0.5 * PI * xi;
            nodes.push(d * theta.sin());
            weights.push(wi * 0.5 * PI * d * theta.cos());
        }
        let raw: Vec<f64> = nodes.iter().zip(&weights).map(|(&e, &w)| w * band.dos(e)).collect();
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(config_error("band", "density of states has no weight on the quadrature nodes"));
        }
        let measure = raw.iter().map(|m| m / total).collect();
        Ok(Self {
            nodes,
            weights,
            measure,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Normalized `w_i·D(ε_i)`.
    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// True when nodes and measure are mirror images under `ε → −ε`.
    pub fn is_symmetric(&self) -> bool {
        let n = self.len();
        let scale = self.nodes.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        (0..n).all(|i| {
            let j = n - 1 - i;
            (self.nodes[i] + self.nodes[j]).abs() <= 1e-12 * scale
                && (self.measure[i] - self.measure[j]).abs() <= 1e-12 * self.measure[i].abs().max(1e-300)
        })
    }

    /// `Σ_i w_i D(ε_i) f(ε_i)` for a scalar integrand.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.measure).map(|(&e, &m)| m * f(e)).sum()
    }
}

/// `∫dε D(ε) f(ε)` for a matrix-valued integrand, summed in node order.
pub fn band_integrate<F>(quad: &Quadrature, mut f: F) -> Result<FloquetMatrix>
where
    F: FnMut(f64) -> Result<FloquetMatrix>,
{
    let mut acc: Option<FloquetMatrix> = None;
    for (&e, &m) in quad.nodes.iter().zip(&quad.measure) {
        let value = f(e)?;
        match acc.as_mut() {
            None => acc = Some(value.scale(m.into())),
            Some(sum) => {
                if sum.dim() != value.dim() {
                    return Err(Error::DimensionMismatch {
                        left: sum.dim(),
                        right: value.dim(),
                    });
                }
                sum.add_scaled(m.into(), &value)
            }
        }
    }
    Ok(acc.expect("quadrature has at least two nodes"))
}

/// Gauss-Legendre nodes and weights on `[−1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

/// Complete elliptic integral of the first kind through the complementary
/// modulus, `K = π / (2·AGM(1, k'))`.
fn elliptic_k_from_complement(kp: f64) -> f64 {
    let (mut a, mut b) = (1.0f64, kp);
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    PI / (2.0 * a)
}

/// Simple cubic DOS for `ε_k = −(cos kx + cos ky + cos kz)/3`, support `[−1, 1]`.
///
/// The 2D square-lattice DOS of `e = −(cos kx + cos ky)` is
/// `K(√(1 − e²/4))/π²`; the remaining `kz` integral is done by tanh-sinh
/// quadrature split at the logarithmic point and the 2D band edges.
fn cubic_dos_unit(eps: f64) -> f64 {
    if eps.abs() >= 1.0 {
        return 0.0;
    }
    let s = 3.0 * eps;
    // e2(kz) = s + cos kz must satisfy |e2| < 2; integrand singular where e2 = 0.
    let integrand = |kz: f64| {
        let e2 = s + kz.cos();
        if e2.abs() >= 2.0 {
            0.0
        } else {
            elliptic_k_from_complement((0.5 * e2.abs()).max(1e-300))
        }
    };
    let mut breaks = vec![0.0, PI];
    for c in [-s, 2.0 - s, -2.0 - s] {
        if c > -1.0 && c < 1.0 {
            breaks.push(c.acos());
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let total: f64 = breaks
        .windows(2)
        .map(|w| tanh_sinh(&integrand, w[0], w[1]))
        .sum();
    3.0 / (PI * PI * PI) * total
}

/// Tanh-sinh quadrature on `[a, b]`, tolerant of integrable endpoint singularities.
fn tanh_sinh(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    if half <= 0.0 {
        return 0.0;
    }
    let h = 1.0 / 32.0;
    let mut sum = 0.0;
    for k in -160i32..=160 {
        let t = k as f64 * h;
        let u = 0.5 * PI * t.sinh();
        let weight = 0.5 * PI * t.cosh() / u.cosh().powi(2);
        // Distance from the nearest endpoint, computed without cancellation.
        let gap = half / (u.exp() * u.cosh()).max(f64::MIN_POSITIVE);
        let gap_low = half / ((-u).exp() * u.cosh()).max(f64::MIN_POSITIVE);
        let x = if u >= 0.0 { b - gap } else { a + gap_low };
        if x <= a || x >= b || weight < 1e-300 {
            continue;
        }
        sum += weight * f(x);
    }
    sum * half * h
}
