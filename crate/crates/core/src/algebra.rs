//! Floquet-indexed matrices, Keldysh propagators and the dense linear algebra
//! used by the Dyson equations.
//!
//! Keldysh structure is kept in the rotated (retarded, advanced, Keldysh)
//! representation. Only the retarded block is ever inverted; the Keldysh block
//! follows from `G^K = G^R Σ^K G^A`.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config_error, Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Residual `‖A·A⁻¹ − I‖_max` above which an inversion is rejected.
pub const INVERSION_RESIDUAL_LIMIT: f64 = 1e-6;

/// The retained Floquet modes `m ∈ {-n_max, …, n_max}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FloquetIndexSet {
    n_max: usize,
}

impl FloquetIndexSet {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(config_error("n_max", "at least one side mode is required"));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Matrix dimension `2·n_max + 1`.
    pub fn dim(&self) -> usize {
        2 * self.n_max + 1
    }

    /// Mode labels in storage order.
    pub fn modes(&self) -> impl Iterator<Item = i32> + Clone {
        let n = self.n_max as i32;
        -n..=n
    }

    /// Storage position of mode `m`, if retained.
    pub fn position(&self, m: i32) -> Option<usize> {
        let shifted = m + self.n_max as i32;
        (shifted >= 0 && (shifted as usize) < self.dim()).then_some(shifted as usize)
    }

    /// Mode label at storage position `pos`.
    pub fn mode(&self, pos: usize) -> i32 {
        pos as i32 - self.n_max as i32
    }

    /// Storage position of the central mode `m = 0`.
    pub fn center(&self) -> usize {
        self.n_max
    }
}

/// Dense complex matrix with rows and columns labelled by Floquet modes.
///
/// Storage is row-major; `matrix[(i, j)]` addresses storage positions, while
/// [`FloquetMatrix::at`] takes mode labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FloquetMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl FloquetMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out.data[i * dim + i] = ONE;
        }
        out
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut out = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            out.data[i * diag.len() + i] = d;
        }
        out
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Wraps row-major storage. Panics if the length is not a square.
    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), dim * dim, "row-major data has wrong length");
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    /// Element addressed by Floquet mode labels.
    pub fn at(&self, idx: &FloquetIndexSet, m: i32, n: i32) -> C64 {
        let (i, j) = (
            idx.position(m).expect("row mode outside index set"),
            idx.position(n).expect("column mode outside index set"),
        );
        self[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn dagger(&self) -> Self {
        dagger(self)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dims(self, other)?;
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dims(self, other)?;
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// In-place `self += s · other`.
    pub fn add_scaled(&mut self, s: C64, other: &Self) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `‖A − A†‖_max`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `‖A + A†‖_max`, zero for an anti-hermitian matrix.
    pub fn antihermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] + self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Projects onto the anti-hermitian part, `(A − A†)/2`.
    pub fn antihermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| 0.5 * (self[(i, j)] - self[(j, i)].conj()))
    }
}

impl Index<(usize, usize)> for FloquetMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for FloquetMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

fn check_dims(a: &FloquetMatrix, b: &FloquetMatrix) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    Ok(())
}

/// Complex matrix product `a·b`.
pub fn multiply(a: &FloquetMatrix, b: &FloquetMatrix) -> Result<FloquetMatrix> {
    check_dims(a, b)?;
    let mut c = FloquetMatrix::zeros(a.dim);
    kernel::matmul(&a.data, &b.data, &mut c.data, a.dim);
    Ok(c)
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
///
/// The residual `‖A·A⁻¹ − I‖_max` is always evaluated; above
/// [`INVERSION_RESIDUAL_LIMIT`] the inversion fails with that residual.
pub fn invert(a: &FloquetMatrix) -> Result<FloquetMatrix> {
    invert_with_residual(a).map(|(inv, _)| inv)
}

/// Like [`invert`], also returning the residual.
pub fn invert_with_residual(a: &FloquetMatrix) -> Result<(FloquetMatrix, f64)> {
    let n = a.dim;
    let mut inv = a.clone();
    let mut pivots = vec![0usize; n];
    if kernel::invert_in_place(&mut inv.data, n, &mut pivots).is_err() {
        return Err(Error::InversionFailure {
            residual: f64::INFINITY,
        });
    }
    let mut prod = FloquetMatrix::zeros(n);
    kernel::matmul(&a.data, &inv.data, &mut prod.data, n);
    let residual = prod.max_abs_diff(&FloquetMatrix::identity(n));
    if !(residual <= INVERSION_RESIDUAL_LIMIT) || !inv.is_finite() {
        return Err(Error::InversionFailure { residual });
    }
    Ok((inv, residual))
}

/// Conjugate transpose.
pub fn dagger(a: &FloquetMatrix) -> FloquetMatrix {
    FloquetMatrix::from_fn(a.dim, |i, j| a[(j, i)].conj())
}

/// Steady-state Keldysh component `G^K = G^R · Σ^K_total · G^A`.
pub fn keldysh_from_dyson(
    g_r: &FloquetMatrix,
    g_a: &FloquetMatrix,
    sigma_k_total: &FloquetMatrix,
) -> Result<FloquetMatrix> {
    multiply(&multiply(g_r, sigma_k_total)?, g_a)
}

/// Retarded, advanced and Keldysh blocks at one frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct KeldyshPropagator {
    pub retarded: FloquetMatrix,
    pub advanced: FloquetMatrix,
    pub keldysh: FloquetMatrix,
}

impl KeldyshPropagator {
    /// Builds the triple with `advanced = retarded†`.
    pub fn from_retarded_keldysh(retarded: FloquetMatrix, keldysh: FloquetMatrix) -> Self {
        let advanced = retarded.dagger();
        Self {
            retarded,
            advanced,
            keldysh,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            retarded: FloquetMatrix::zeros(dim),
            advanced: FloquetMatrix::zeros(dim),
            keldysh: FloquetMatrix::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.retarded.dim()
    }

    /// `‖A − R†‖_max`.
    pub fn advanced_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.advanced[(i, j)] - self.retarded[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `‖K + K†‖_max`.
    pub fn keldysh_defect(&self) -> f64 {
        self.keldysh.antihermiticity_defect()
    }

    /// `G^< = (G^K − G^R + G^A) / 2`.
    pub fn lesser(&self) -> FloquetMatrix {
        FloquetMatrix::from_fn(self.dim(), |i, j| {
            0.5 * (self.keldysh[(i, j)] - self.retarded[(i, j)] + self.advanced[(i, j)])
        })
    }

    /// `G^> = (G^K + G^R − G^A) / 2`.
    pub fn greater(&self) -> FloquetMatrix {
        FloquetMatrix::from_fn(self.dim(), |i, j| {
            0.5 * (self.keldysh[(i, j)] + self.retarded[(i, j)] - self.advanced[(i, j)])
        })
    }

    pub fn is_finite(&self) -> bool {
        self.retarded.is_finite() && self.advanced.is_finite() && self.keldysh.is_finite()
    }
}

/// Uniform real-frequency grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    omega_min: f64,
    omega_max: f64,
    n_points: usize,
}

impl FrequencyGrid {
    pub fn new(omega_min: f64, omega_max: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(config_error("n_omega", "at least two frequency points are required"));
        }
        if !(omega_max > omega_min) || !omega_min.is_finite() || !omega_max.is_finite() {
            return Err(config_error("omega_max", "frequency window must satisfy omega_min < omega_max"));
        }
        Ok(Self {
            omega_min,
            omega_max,
            n_points,
        })
    }

    /// Grid symmetric about zero.
    pub fn symmetric(half_width: f64, n_points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_points)
    }

    pub fn omega_min(&self) -> f64 {
        self.omega_min
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn step(&self) -> f64 {
        (self.omega_max - self.omega_min) / (self.n_points - 1) as f64
    }

    pub fn omega(&self, k: usize) -> f64 {
        // Integer offset from the centre keeps mirrored points exact negatives.
        let last = (self.n_points - 1) as f64;
        let offset = 2.0 * k as f64 - last;
        0.5 * (self.omega_min + self.omega_max) + 0.5 * (self.omega_max - self.omega_min) * (offset / last)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.omega(k)).collect()
    }

    /// Index of the grid point nearest to `omega` (clamped to the grid).
    pub fn nearest(&self, omega: f64) -> usize {
        let k = ((omega - self.omega_min) / self.step()).round();
        k.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    pub fn is_symmetric(&self) -> bool {
        (self.omega_min + self.omega_max).abs() <= 1e-12 * self.omega_max.abs().max(1.0)
    }

    /// Trapezoidal integral of samples on this grid.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_points);
        let inner: f64 = values.iter().sum();
        (inner - 0.5 * (values[0] + values[values.len() - 1])) * self.step()
    }
}

/// Low-level kernels on row-major slices. The solver's inner loop calls these
/// directly to avoid allocation.
pub(crate) mod kernel {
    use super::{C64, ONE, ZERO};

    /// `c = a·b`.
    pub fn matmul(a: &[C64], b: &[C64], c: &mut [C64], n: usize) {
        for i in 0..n {
            let row = &mut c[i * n..(i + 1) * n];
            row.fill(ZERO);
            for k in 0..n {
                let aik = a[i * n + k];
                if aik == ZERO {
                    continue;
                }
                let brow = &b[k * n..(k + 1) * n];
                for (cij, bkj) in row.iter_mut().zip(brow) {
                    *cij += aik * bkj;
                }
            }
        }
    }

    /// Gauss-Jordan inversion in place with partial pivoting.
    /// Returns the failing column on an exactly singular pivot.
    pub fn invert_in_place(a: &mut [C64], n: usize, pivots: &mut [usize]) -> Result<(), usize> {
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].norm_sqr();
            for i in k + 1..n {
                let v = a[i * n + k].norm_sqr();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            pivots[k] = p;
            if best == 0.0 || !best.is_finite() {
                return Err(k);
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
            }
            let inv_pivot = ONE / a[k * n + k];
            a[k * n + k] = ONE;
            for j in 0..n {
                a[k * n + j] *= inv_pivot;
            }
            let (before, rest) = a.split_at_mut(k * n);
            let (pivot_row, after) = rest.split_at_mut(n);
            for row in before.chunks_exact_mut(n).chain(after.chunks_exact_mut(n)) {
                let factor = row[k];
                if factor == ZERO {
                    continue;
                }
                row[k] = ZERO;
                for (x, y) in row.iter_mut().zip(pivot_row.iter()) {
                    *x -= factor * y;
                }
            }
        }
        for k in (0..n).rev() {
            let p = pivots[k];
            if p != k {
                for i in 0..n {
                    a.swap(i * n + k, i * n + p);
                }
            }
        }
        Ok(())
    }
}
