//! Complex Schur decomposition `A = Q T Q†` of small dense matrices:
//! Householder reduction to Hessenberg form, then single-shift QR with
//! Wilkinson shifts and Givens rotations.

use crate::algebra::{C64, ZERO};

const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

fn identity(n: usize) -> Vec<C64> {
    let mut q = vec![ZERO; n * n];
    for i in 0..n {
        q[i * n + i] = C64::new(1.0, 0.0);
    }
    q
}

/// `|re| + |im|`, a cheap magnitude for deflation tests.
fn abs1(z: C64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Reduces `a` (row-major) to upper Hessenberg form in place and returns `Q`.
fn hessenberg(a: &mut [C64], n: usize) -> Vec<C64> {
    let mut q = identity(n);
    let mut v = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let norm = (k + 1..n).map(|i| a[i * n + k].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let phase = if x0.norm() == 0.0 { C64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        for i in k + 1..n {
            v[i] = a[i * n + k];
        }
        v[k + 1] -= alpha;
        let vnorm = (k + 1..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for x in &mut v[k + 1..n] {
            *x /= vnorm;
        }
        // A ← (1 − 2vv†) A (1 − 2vv†), Q ← Q (1 − 2vv†).
        for j in k..n {
            let s: C64 = (k + 1..n).map(|i| v[i].conj() * a[i * n + j]).sum::<C64>() * 2.0;
            for i in k + 1..n {
                a[i * n + j] -= v[i] * s;
            }
        }
        for m in [&mut *a, &mut q[..]] {
            for i in 0..n {
                let row = &mut m[i * n..(i + 1) * n];
                let s: C64 = (k + 1..n).map(|j| row[j] * v[j]).sum::<C64>() * 2.0;
                for j in k + 1..n {
                    row[j] -= s * v[j].conj();
                }
            }
        }
        a[(k + 1) * n + k] = alpha;
        for i in k + 2..n {
            a[i * n + k] = ZERO;
        }
    }
    q
}

/// Eigenvalue of the trailing 2×2 block closest to its last diagonal entry.
fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half = (a - d) * 0.5;
    let root = (half * half + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let (l1, l2) = (mid + root, mid - root);
    if (l1 - d).norm_sqr() <= (l2 - d).norm_sqr() {
        l1
    } else {
        l2
    }
}

/// `(Q, T)` with `A = Q T Q†`, `Q` unitary and `T` upper triangular, both
/// row-major. `None` if the QR sweeps fail to converge.
pub(super) fn complex_schur(mut t: Vec<C64>, n: usize) -> Option<(Vec<C64>, Vec<C64>)> {
    let mut q = hessenberg(&mut t, n);
    let mut hi = n.saturating_sub(1);
    let mut sweeps = 0;
    let mut since_deflation = 0;
    let mut rot = vec![(ZERO, ZERO, 0.0); n];
    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let sub = abs1(t[lo * n + lo - 1]);
            let scale = abs1(t[(lo - 1) * n + lo - 1]) + abs1(t[lo * n + lo]);
            if sub <= f64::EPSILON * scale || sub < f64::MIN_POSITIVE {
                t[lo * n + lo - 1] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        sweeps += 1;
        since_deflation += 1;
        if sweeps > MAX_SWEEPS_PER_EIGENVALUE * n {
            return None;
        }
        let mu = if since_deflation % 11 == 0 {
            // Exceptional shift to break cycles.
            t[hi * n + hi] + t[hi * n + hi - 1].norm() * 0.75
        } else {
            wilkinson_shift(
                t[(hi - 1) * n + hi - 1],
                t[(hi - 1) * n + hi],
                t[hi * n + hi - 1],
                t[hi * n + hi],
            )
        };
        for i in lo..=hi {
            t[i * n + i] -= mu;
        }
        // H − μ = G† R: rotate rows from the left.
        for k in lo..hi {
            let x = t[k * n + k];
            let y = t[(k + 1) * n + k];
            let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let (c, s) = if r == 0.0 { (C64::new(1.0, 0.0), ZERO) } else { (x / r, y / r) };
            rot[k] = (c, s, r);
            for j in k..n {
                let (p, w) = (t[k * n + j], t[(k + 1) * n + j]);
                t[k * n + j] = c.conj() * p + s.conj() * w;
                t[(k + 1) * n + j] = c * w - s * p;
            }
        }
        // R G† + μ: rotate columns from the right, and accumulate Q.
        for k in lo..hi {
            let (c, s, _) = rot[k];
            let rows = (k + 2).min(hi + 1);
            for i in 0..rows {
                let (p, w) = (t[i * n + k], t[i * n + k + 1]);
                t[i * n + k] = p * c + w * s;
                t[i * n + k + 1] = w * c.conj() - p * s.conj();
            }
            for i in 0..n {
                let (p, w) = (q[i * n + k], q[i * n + k + 1]);
                q[i * n + k] = p * c + w * s;
                q[i * n + k + 1] = w * c.conj() - p * s.conj();
            }
        }
        for i in lo..=hi {
            t[i * n + i] += mu;
        }
    }
    for i in 1..n {
        for j in 0..i {
            t[i * n + j] = ZERO;
        }
    }
    Some((q, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::kernel;
    use proptest::prelude::*;

    fn reconstruct(q: &[C64], t: &[C64], n: usize) -> Vec<C64> {
        let mut qt = vec![ZERO; n * n];
        kernel::matmul(q, t, &mut qt, n);
        let mut qh = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                qh[j * n + i] = q[i * n + j].conj();
            }
        }
        let mut a = vec![ZERO; n * n];
        kernel::matmul(&qt, &qh, &mut a, n);
        a
    }

    proptest! {
        #[test]
        fn schur_factors_reconstruct_the_matrix(
            n in 1usize..24,
            seed in proptest::collection::vec(-1.0f64..1.0, 2 * 24 * 24),
        ) {
            let a: Vec<C64> = (0..n * n).map(|i| C64::new(seed[2 * i], seed[2 * i + 1])).collect();
            let (q, t) = complex_schur(a.clone(), n).unwrap();
            let back = reconstruct(&q, &t, n);
            let err = a.iter().zip(&back).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            prop_assert!(err < 1e-12 * n as f64, "reconstruction {err:e}");
            let qq = reconstruct(&q, &identity(n), n);
            let unit = qq.iter().zip(identity(n)).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            prop_assert!(unit < 1e-12 * n as f64, "unitarity {unit:e}");
            for i in 0..n {
                for j in 0..i {
                    prop_assert_eq!(t[i * n + j], ZERO);
                }
            }
        }
    }

    #[test]
    fn triangular_input_keeps_its_diagonal() {
        let n = 5;
        let mut a = vec![ZERO; n * n];
        for i in 0..n {
            for j in i..n {
                a[i * n + j] = C64::new((i + 2 * j) as f64, i as f64 - 1.0);
            }
        }
        let (_, t) = complex_schur(a.clone(), n).unwrap();
        let mut want: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
        let mut got: Vec<f64> = (0..n).map(|i| t[i * n + i].re).collect();
        want.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        for (x, y) in want.iter().zip(&got) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
