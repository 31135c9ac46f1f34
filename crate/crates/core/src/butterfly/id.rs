//! Interpolative decomposition `A ≈ A[:, S] P` by column-pivoted Householder
//! QR, followed by strong rank-revealing swaps so that every interpolation
//! coefficient is bounded by 2.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Bound on the interpolation coefficients enforced by the swap phase.
pub const COEFF_BOUND: f64 = 2.0;

/// `A ≈ A[:, skeleton] · P`, where `P[:, skeleton] = I` and
/// `P[:, rest] = coeffs`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpDecomp<T> {
    pub skeleton: Vec<usize>,
    pub rest: Vec<usize>,
    /// `r × (n - r)` row-major.
    pub coeffs: DenseMatrix<T>,
}

impl<T: Scalar> InterpDecomp<T> {
    pub fn rank(&self) -> usize {
        self.skeleton.len()
    }

    pub fn n_cols(&self) -> usize {
        self.skeleton.len() + self.rest.len()
    }

    /// The full `r × n` interpolation matrix.
    pub fn interpolation_matrix(&self) -> DenseMatrix<T> {
        let r = self.rank();
        let mut p = DenseMatrix::zeros(r, self.n_cols());
        for (i, &s) in self.skeleton.iter().enumerate() {
            p.set(i, s, T::one());
            for (j, &c) in self.rest.iter().enumerate() {
                p.set(i, c, self.coeffs.get(i, j));
            }
        }
        p
    }

    /// `P x` for `x` indexed like the decomposed columns.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.skeleton
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let row = self.coeffs.row(i);
                let mut acc = x[s];
                for (&c, &t) in self.rest.iter().zip(row) {
                    acc += t * x[c];
                }
                acc
            })
            .collect()
    }
}

// Column-major working copy.
struct Cols<T> {
    m: usize,
    data: Vec<T>,
}

impl<T: Scalar> Cols<T> {
    fn from_columns(a: &DenseMatrix<T>, cols: &[usize]) -> Self {
        let m = a.n_rows();
        let mut data = vec![T::zero(); m * cols.len()];
        for i in 0..m {
            let row = a.row(i);
            for (j, &c) in cols.iter().enumerate() {
                data[j * m + i] = row[c];
            }
        }
        Cols { m, data }
    }

    #[inline]
    fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.m..(j + 1) * self.m]
    }

    fn swap(&mut self, a: usize, b: usize) {
        if a != b {
            let m = self.m;
            let (lo, hi) = (a.min(b), a.max(b));
            let (x, y) = self.data.split_at_mut(hi * m);
            x[lo * m..(lo + 1) * m].swap_with_slice(&mut y[..m]);
        }
    }

    /// Householder step at (k, k) over columns k..n; returns the new diagonal.
    fn householder(&mut self, k: usize, n: usize) -> T {
        let m = self.m;
        let x = &self.data[k * m + k..(k + 1) * m];
        let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm == T::zero() {
            return T::zero();
        }
        let alpha = if x[0] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = x.to_vec();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|&t| t * t).sum();
        if vnorm2 > T::zero() {
            let two = T::lit(2.0);
            for j in k + 1..n {
                let col = &mut self.data[j * m + k..(j + 1) * m];
                let s = two * v.iter().zip(col.iter()).map(|(&a, &b)| a * b).sum::<T>() / vnorm2;
                for (c, &vi) in col.iter_mut().zip(&v) {
                    *c -= s * vi;
                }
            }
        }
        let col = &mut self.data[k * m + k..(k + 1) * m];
        col[0] = alpha;
        col[1..].iter_mut().for_each(|c| *c = T::zero());
        alpha
    }

    fn tail_norm(&self, j: usize, k: usize) -> T {
        self.col(j)[k..].iter().map(|&v| v * v).sum::<T>().sqrt()
    }
}

/// Solves `R11 T = R12` where both live in the first `r` rows of `q`.
fn solve_upper<T: Scalar>(q: &Cols<T>, r: usize, n: usize) -> DenseMatrix<T> {
    let mut t = DenseMatrix::zeros(r, n - r);
    for j in r..n {
        let b = q.col(j);
        for i in (0..r).rev() {
            let mut s = b[i];
            for k in i + 1..r {
                s -= q.col(k)[i] * t.get(k, j - r);
            }
            t.set(i, j - r, s / q.col(i)[i]);
        }
    }
    t
}

/// Row norms of `R11⁻¹`.
fn inverse_row_norms<T: Scalar>(q: &Cols<T>, r: usize) -> Vec<T> {
    let mut inv = vec![T::zero(); r * r];
    for c in 0..r {
        for i in (0..=c).rev() {
            let mut s = if i == c { T::one() } else { T::zero() };
            for k in i + 1..=c {
                s -= q.col(k)[i] * inv[k * r + c];
            }
            inv[i * r + c] = s / q.col(i)[i];
        }
    }
    (0..r)
        .map(|i| {
            inv[i * r..(i + 1) * r]
                .iter()
                .map(|&v| v * v)
                .sum::<T>()
                .sqrt()
        })
        .collect()
}

/// QR of `a[:, order]`: full pivoted factorization when `pivot`, otherwise in
/// the given order, stopping after `rank` steps (or by the tolerance when
/// `rank` is `None`). Returns the factored columns, final order and rank.
fn factor<T: Scalar>(
    a: &DenseMatrix<T>,
    mut order: Vec<usize>,
    eps: T,
    rank: Option<usize>,
) -> (Cols<T>, Vec<usize>, usize) {
    let n = order.len();
    let mut q = Cols::from_columns(a, &order);
    let kmax = a.n_rows().min(n);
    let mut r11 = T::zero();
    let mut r = 0;
    for k in 0..kmax {
        if let Some(target) = rank {
            if k == target {
                break;
            }
        } else {
            let (mut best, mut jbest) = (T::zero(), k);
            for j in k..n {
                let v = q.tail_norm(j, k);
                if v > best {
                    best = v;
                    jbest = j;
                }
            }
            if k == 0 {
                r11 = best;
            }
            if best == T::zero() || (k > 0 && best <= eps * r11) {
                break;
            }
            q.swap(k, jbest);
            order.swap(k, jbest);
        }
        q.householder(k, n);
        r = k + 1;
    }
    (q, order, r)
}

/// Interpolative decomposition at relative precision `eps`: the rank is the
/// number of pivots whose remaining column norm exceeds `eps` times the first
/// pivot. Coefficients satisfy `|P_ij| <= 2` (up to rounding).
pub fn interpolative_decomposition<T: Scalar>(
    a: &DenseMatrix<T>,
    eps: f64,
) -> Result<InterpDecomp<T>> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::invalid(format!(
            "interpolative decomposition of an empty {m}×{n} matrix"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!(
            "ID precision must lie in (0, 1), got {eps}"
        )));
    }
    let eps_t = T::lit(eps);
    let (mut q, mut order, r) = factor(a, (0..n).collect(), eps_t, None);
    if r == 0 {
        return Ok(InterpDecomp {
            skeleton: Vec::new(),
            rest: order,
            coeffs: DenseMatrix::zeros(0, n),
        });
    }
    // Strong rank-revealing swaps: exchange skeleton column i with residual
    // column j while T_ij² + (γ_j / ω_i)² exceeds the bound, where γ_j are the
    // residual column norms and 1/ω_i the row norms of R11⁻¹.
    let bound2 = T::lit(COEFF_BOUND * COEFF_BOUND * (1.0 + 1e-12));
    let max_swaps = 4 * n + 16;
    let mut swaps = 0;
    loop {
        let t = solve_upper(&q, r, n);
        if r == n {
            return Ok(InterpDecomp {
                skeleton: order,
                rest: Vec::new(),
                coeffs: t,
            });
        }
        let gamma: Vec<T> = (r..n).map(|j| q.tail_norm(j, r)).collect();
        let inv_rows = inverse_row_norms(&q, r);
        let mut worst = (bound2, None);
        for i in 0..r {
            for (jj, &g) in gamma.iter().enumerate() {
                let tij = t.get(i, jj);
                let gw = g * inv_rows[i];
                let rho = tij * tij + gw * gw;
                if rho > worst.0 {
                    worst = (rho, Some((i, r + jj)));
                }
            }
        }
        match worst.1 {
            Some((i, j)) if swaps < max_swaps => {
                swaps += 1;
                order.swap(i, j);
                let refactored = factor(a, order, eps_t, Some(r));
                q = refactored.0;
                order = refactored.1;
            }
            _ => {
                let skeleton = order[..r].to_vec();
                let rest = order[r..].to_vec();
                return Ok(InterpDecomp {
                    skeleton,
                    rest,
                    coeffs: t,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn reconstruct(a: &DenseMatrix<f64>, id: &InterpDecomp<f64>) -> DenseMatrix<f64> {
        let rows: Vec<usize> = (0..a.n_rows()).collect();
        let b = a.submatrix(&rows, &id.skeleton);
        b.matmul(&id.interpolation_matrix()).unwrap()
    }

    fn spectral_norm(a: &DenseMatrix<f64>) -> f64 {
        let m = nalgebra::DMatrix::from_row_slice(a.n_rows(), a.n_cols(), a.data());
        m.singular_values().iter().copied().fold(0.0, f64::max)
    }

    #[test]
    fn rank_one_exact() {
        let u = [1.0, -2.0, 0.5, 3.0, 1.5];
        let v = [0.3, 1.0, -0.7, 2.0];
        let a = DenseMatrix::from_fn(5, 4, |i, j| u[i] * v[j]).unwrap();
        let id = interpolative_decomposition(&a, 1e-10).unwrap();
        assert_eq!(id.rank(), 1);
        let err = reconstruct(&a, &id).sub(&a).unwrap().frobenius_norm();
        assert!(err <= 1e-13 * a.frobenius_norm());
    }

    #[test]
    fn identity_is_full_rank() {
        let a = DenseMatrix::<f64>::identity(4);
        let id = interpolative_decomposition(&a, 1e-10).unwrap();
        assert_eq!(id.rank(), 4);
        assert!(id.rest.is_empty());
        let mut s = id.skeleton.clone();
        s.sort_unstable();
        assert_eq!(s, vec![0, 1, 2, 3]);
        assert_eq!(reconstruct(&a, &id), a);
    }

    #[test]
    fn empty_and_bad_eps() {
        assert!(interpolative_decomposition(&DenseMatrix::<f64>::zeros(0, 3), 1e-3).is_err());
        assert!(interpolative_decomposition(&DenseMatrix::<f64>::identity(2), 1.5).is_err());
        let z = interpolative_decomposition(&DenseMatrix::<f64>::zeros(3, 3), 1e-3).unwrap();
        assert_eq!(z.rank(), 0);
    }

    #[test]
    fn embedded_identity_and_bounded_coefficients() {
        let mut rng = SeededRng::new(5);
        for trial in 0..20 {
            let (m, n) = (10 + trial, 8 + 2 * trial);
            let k = 4;
            let u = DenseMatrix::from_fn(m, k, |_, _| rng.normal()).unwrap();
            let v =
                DenseMatrix::from_fn(k, n, |_, _| rng.normal() * 10f64.powi(rng.below(6) as i32))
                    .unwrap();
            let a = u.matmul(&v).unwrap();
            let id = interpolative_decomposition(&a, 1e-12).unwrap();
            let p = id.interpolation_matrix();
            for (i, &s) in id.skeleton.iter().enumerate() {
                for i2 in 0..id.rank() {
                    assert_eq!(p.get(i2, s), if i == i2 { 1.0 } else { 0.0 });
                }
            }
            assert!(p.data().iter().all(|x| x.abs() <= 2.0 + 1e-8));
        }
    }

    #[test]
    fn planted_spectrum_bound() {
        let n = 32;
        let mut rng = SeededRng::new(6);
        let orth = |rng: &mut SeededRng| {
            let g = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.normal());
            g.qr().q()
        };
        let (u, v) = (orth(&mut rng), orth(&mut rng));
        let s = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                10f64.powi(-(i as i32 + 1))
            } else {
                0.0
            }
        });
        let a = &u * s * v.transpose();
        let a = DenseMatrix::from_fn(n, n, |i, j| a[(i, j)]).unwrap();
        let id = interpolative_decomposition(&a, 1e-8).unwrap();
        let r = id.rank();
        let sigma = 10f64.powi(-(r as i32 + 1));
        let err = spectral_norm(&reconstruct(&a, &id).sub(&a).unwrap());
        let bound = ((4 * r * (n - r) + 1) as f64).sqrt() * sigma;
        assert!(err <= bound + 1e-15, "r={r} err={err:e} bound={bound:e}");
        assert!((6..=9).contains(&r), "r={r}");
    }

    #[test]
    fn apply_matches_matrix() {
        let mut rng = SeededRng::new(7);
        let a = DenseMatrix::from_fn(6, 9, |_, _| rng.normal()).unwrap();
        let id = interpolative_decomposition(&a, 1e-3).unwrap();
        let x: Vec<f64> = (0..9).map(|_| rng.normal()).collect();
        let direct = id.interpolation_matrix().matvec(&x).unwrap();
        for (p, q) in id.apply(&x).iter().zip(&direct) {
            assert!((p - q).abs() < 1e-13);
        }
    }
}
