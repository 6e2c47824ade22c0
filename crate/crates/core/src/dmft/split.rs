//! Split-plane complex matrices for the band-sum inner loop.
//!
//! Rows are padded to a multiple of eight doubles so every row update is a
//! whole number of vector lengths. Padding columns stay zero under all the
//! operations below.

use crate::algebra::C64;

const PAD: usize = 8;

#[derive(Clone, Debug)]
pub(super) struct SplitMatrix {
    n: usize,
    ld: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// `y += a·x` on split complex rows of equal length.
#[inline(always)]
fn axpy(ar: f64, ai: f64, xr: &[f64], xi: &[f64], yr: &mut [f64], yi: &mut [f64]) {
    let m = yr.len();
    let (xr, xi, yi) = (&xr[..m], &xi[..m], &mut yi[..m]);
    for j in 0..m {
        yr[j] += ar * xr[j] - ai * xi[j];
        yi[j] += ar * xi[j] + ai * xr[j];
    }
}

/// `y += Σ_q a_q·x_q` over four rows `x_q` spaced `ld` apart.
#[inline(always)]
fn axpy4(ar: [f64; 4], ai: [f64; 4], xr: &[f64], xi: &[f64], ld: usize, yr: &mut [f64], yi: &mut [f64]) {
    let m = yr.len();
    let yi = &mut yi[..m];
    let (r0, r1, r2, r3) = (&xr[..m], &xr[ld..ld + m], &xr[2 * ld..2 * ld + m], &xr[3 * ld..3 * ld + m]);
    let (i0, i1, i2, i3) = (&xi[..m], &xi[ld..ld + m], &xi[2 * ld..2 * ld + m], &xi[3 * ld..3 * ld + m]);
    for j in 0..m {
        yr[j] += (ar[0] * r0[j] - ai[0] * i0[j] + (ar[1] * r1[j] - ai[1] * i1[j]))
            + (ar[2] * r2[j] - ai[2] * i2[j] + (ar[3] * r3[j] - ai[3] * i3[j]));
        yi[j] += (ar[0] * i0[j] + ai[0] * r0[j] + (ar[1] * i1[j] + ai[1] * r1[j]))
            + (ar[2] * i2[j] + ai[2] * r2[j] + (ar[3] * i3[j] + ai[3] * r3[j]));
    }
}

impl SplitMatrix {
    pub fn zeros(n: usize) -> Self {
        let ld = n.div_ceil(PAD) * PAD;
        Self {
            n,
            ld,
            re: vec![0.0; n * ld],
            im: vec![0.0; n * ld],
        }
    }

    /// From a dense row-major `n×n` slice.
    pub fn from_complex(data: &[C64], n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, data[i * n + j]);
            }
        }
        m
    }

    /// Dense row-major `n×n` copy.
    pub fn to_complex(&self) -> Vec<C64> {
        let n = self.n;
        (0..n * n).map(|q| self.at(q / n, q % n)).collect()
    }

    #[inline(always)]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        C64::new(self.re[i * self.ld + j], self.im[i * self.ld + j])
    }

    #[inline(always)]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.re[i * self.ld + j] = v.re;
        self.im[i * self.ld + j] = v.im;
    }

    #[inline(always)]
    pub fn add_at(&mut self, i: usize, j: usize, v: C64) {
        self.re[i * self.ld + j] += v.re;
        self.im[i * self.ld + j] += v.im;
    }

    /// `self = −other`.
    #[inline(always)]
    pub fn assign_neg(&mut self, other: &Self) {
        for (a, b) in self.re.iter_mut().zip(&other.re) {
            *a = -b;
        }
        for (a, b) in self.im.iter_mut().zip(&other.im) {
            *a = -b;
        }
    }

    #[inline(always)]
    pub fn add_scaled(&mut self, s: f64, other: &Self) {
        for (a, b) in self.re.iter_mut().zip(&other.re) {
            *a += s * b;
        }
        for (a, b) in self.im.iter_mut().zip(&other.im) {
            *a += s * b;
        }
    }

    /// Sum of row `i` over the stored columns.
    #[inline(always)]
    pub fn row_sum(&self, i: usize) -> C64 {
        let row = i * self.ld..(i + 1) * self.ld;
        C64::new(self.re[row.clone()].iter().sum(), self.im[row].iter().sum())
    }

    /// `self += s·a·b`. With `upper_only`, rows start at the vector block that
    /// contains the diagonal, so only the upper triangle is guaranteed.
    #[inline(always)]
    pub fn add_product(&mut self, s: f64, a: &Self, b: &Self, upper_only: bool) {
        let (n, ld) = (self.n, self.ld);
        for i in 0..n {
            let j0 = if upper_only { i / PAD * PAD } else { 0 };
            let row = i * ld + j0..(i + 1) * ld;
            let (yr, yi) = (&mut self.re[row.clone()], &mut self.im[row]);
            let ar = &a.re[i * ld..i * ld + n];
            let ai = &a.im[i * ld..i * ld + n];
            let mut k = 0;
            while k + 4 <= n {
                axpy4(
                    [s * ar[k], s * ar[k + 1], s * ar[k + 2], s * ar[k + 3]],
                    [s * ai[k], s * ai[k + 1], s * ai[k + 2], s * ai[k + 3]],
                    &b.re[k * ld + j0..],
                    &b.im[k * ld + j0..],
                    ld,
                    yr,
                    yi,
                );
                k += 4;
            }
            while k < n {
                let brow = k * ld + j0..(k + 1) * ld;
                axpy(s * ar[k], s * ai[k], &b.re[brow.clone()], &b.im[brow], yr, yi);
                k += 1;
            }
        }
    }

    /// `self = a·b`.
    #[inline(always)]
    pub fn assign_product(&mut self, a: &Self, b: &Self) {
        self.re.fill(0.0);
        self.im.fill(0.0);
        self.add_product(1.0, a, b, false);
    }

    #[inline(always)]
    pub fn assign_dagger(&mut self, a: &Self) {
        let (n, ld) = (self.n, self.ld);
        for i in 0..n {
            for j in 0..n {
                self.re[i * ld + j] = a.re[j * ld + i];
                self.im[i * ld + j] = -a.im[j * ld + i];
            }
        }
    }

    /// Gauss-Jordan inversion with partial pivoting; errors on an exactly
    /// singular pivot.
    #[inline(always)]
    pub fn invert_in_place(&mut self, pivots: &mut [usize]) -> Result<(), usize> {
        let (n, ld) = (self.n, self.ld);
        for k in 0..n {
            let mut p = k;
            let mut best = self.at(k, k).norm_sqr();
            for i in k + 1..n {
                let v = self.at(i, k).norm_sqr();
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
                for j in 0..ld {
                    self.re.swap(k * ld + j, p * ld + j);
                    self.im.swap(k * ld + j, p * ld + j);
                }
            }
            let inv = self.at(k, k).conj() / best;
            self.set(k, k, C64::new(1.0, 0.0));
            for j in k * ld..(k + 1) * ld {
                let (r, i) = (self.re[j], self.im[j]);
                self.re[j] = r * inv.re - i * inv.im;
                self.im[j] = r * inv.im + i * inv.re;
            }
            let (re_before, re_rest) = self.re.split_at_mut(k * ld);
            let (re_pivot, re_after) = re_rest.split_at_mut(ld);
            let (im_before, im_rest) = self.im.split_at_mut(k * ld);
            let (im_pivot, im_after) = im_rest.split_at_mut(ld);
            let rows = re_before
                .chunks_exact_mut(ld)
                .chain(re_after.chunks_exact_mut(ld))
                .zip(im_before.chunks_exact_mut(ld).chain(im_after.chunks_exact_mut(ld)));
            for (rr, ri) in rows {
                let (fr, fi) = (rr[k], ri[k]);
                if fr == 0.0 && fi == 0.0 {
                    continue;
                }
                rr[k] = 0.0;
                ri[k] = 0.0;
                axpy(-fr, -fi, re_pivot, im_pivot, rr, ri);
            }
        }
        for k in (0..n).rev() {
            let p = pivots[k];
            if p != k {
                for i in 0..n {
                    self.re.swap(i * ld + k, i * ld + p);
                    self.im.swap(i * ld + k, i * ld + p);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{invert, multiply, FloquetMatrix};

    fn sample(n: usize, seed: u64) -> FloquetMatrix {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut m = FloquetMatrix::from_fn(n, |_, _| C64::new(next(), next()));
        for i in 0..n {
            m[(i, i)] += C64::new(2.0, 1.0);
        }
        m
    }

    #[test]
    fn matches_dense_algebra() {
        for n in [1, 5, 8, 21] {
            let a = sample(n, 3 + n as u64);
            let b = sample(n, 11 + n as u64);
            let (sa, sb) = (SplitMatrix::from_complex(a.as_slice(), n), SplitMatrix::from_complex(b.as_slice(), n));

            let mut prod = SplitMatrix::zeros(n);
            prod.assign_product(&sa, &sb);
            let dense = multiply(&a, &b).unwrap();
            let got = FloquetMatrix::from_row_major(n, prod.to_complex());
            assert!(got.max_abs_diff(&dense) < 1e-13);

            let mut upper = SplitMatrix::zeros(n);
            upper.add_product(0.5, &sa, &sb, true);
            let got = upper.to_complex();
            for i in 0..n {
                for j in i..n {
                    assert!((got[i * n + j] - dense[(i, j)] * 0.5).norm() < 1e-13);
                }
            }

            let mut inv = sa.clone();
            inv.invert_in_place(&mut vec![0; n]).unwrap();
            let got = FloquetMatrix::from_row_major(n, inv.to_complex());
            assert!(got.max_abs_diff(&invert(&a).unwrap()) < 1e-12);

            let mut d = SplitMatrix::zeros(n);
            d.assign_dagger(&sa);
            assert_eq!(FloquetMatrix::from_row_major(n, d.to_complex()), a.dagger());
        }
    }
}
