//! Symmetric eigensolvers: dense Householder tridiagonalization with implicit
//! QL, and a restarted Lanczos iteration for a few extreme eigenpairs.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::SeededRng;
use crate::scalar::{axpy, dot, norm2, Scalar};

/// Problems up to this size are solved densely.
pub const DENSE_LIMIT: usize = 256;

/// Eigen-decomposition with ascending eigenvalues; `vectors` holds one
/// eigenvector per column.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: DenseMatrix<T>,
}

impl<T: Scalar> SymEigen<T> {
    pub fn vector(&self, j: usize) -> Vec<T> {
        self.vectors.column(j)
    }
}

/// Full eigen-decomposition of a symmetric matrix (only the lower triangle is
/// read).
pub fn sym_eigen<T: Scalar>(a: &DenseMatrix<T>) -> Result<SymEigen<T>> {
    let n = a.n_rows();
    if n != a.n_cols() {
        return Err(Error::invalid("sym_eigen needs a square matrix"));
    }
    if n == 0 {
        return Ok(SymEigen {
            values: Vec::new(),
            vectors: DenseMatrix::zeros(0, 0),
        });
    }
    let mut v: Vec<T> = a.data().to_vec();
    for i in 0..n {
        for j in i + 1..n {
            v[i * n + j] = v[j * n + i];
        }
    }
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut v, &mut d, &mut e)?;
    Ok(sorted(n, d, v))
}

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off` (`off.len() == diag.len() - 1`).
pub fn tridiagonal_eigen<T: Scalar>(diag: &[T], off: &[T]) -> Result<SymEigen<T>> {
    let n = diag.len();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); n];
    e[1..n].copy_from_slice(&off[..n.saturating_sub(1)]);
    tql2(n, &mut v, &mut d, &mut e)?;
    Ok(sorted(n, d, v))
}

fn sorted<T: Scalar>(n: usize, d: Vec<T>, v: Vec<T>) -> SymEigen<T> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| d[k]).collect();
    let mut vecs = vec![T::zero(); n * n];
    for i in 0..n {
        for (j, &k) in order.iter().enumerate() {
            vecs[i * n + j] = v[i * n + k];
        }
    }
    SymEigen {
        values,
        vectors: DenseMatrix::from_parts(n, n, vecs),
    }
}

// Householder reduction to tridiagonal form (EISPACK tred2 ordering).
fn tred2<T: Scalar>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T]) {
    let zero = T::zero();
    d.copy_from_slice(&v[(n - 1) * n..n * n]);
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for &dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = zero;
                v[j * n + i] = zero;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }
            for j in 0..i {
                f = d[j];
                v[j * n + i] = f;
                g = e[j] + v[j * n + j] * f;
                for k in j + 1..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = zero;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1) * n + i] = v[i * n + i];
        v[i * n + i] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[k * n + i + 1] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[k * n + i + 1] * v[k * n + j];
                }
                for k in 0..=i {
                    v[k * n + j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k * n + i + 1] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
        v[(n - 1) * n + j] = zero;
    }
    v[(n - 1) * n + n - 1] = T::one();
    e[0] = zero;
}

// Implicit QL iterations on the tridiagonal (d, e), accumulating into v.
fn tql2<T: Scalar>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T]) -> Result<()> {
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;
    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    let max_iter = 60 * n.max(1);
    let mut total = 0usize;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            loop {
                total += 1;
                if total > max_iter {
                    return Err(Error::NoConvergence { iterations: total });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let row = k * n;
                        h = v[row + i + 1];
                        v[row + i + 1] = s * v[row + i] + c * h;
                        v[row + i] = c * v[row + i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    Ok(())
}

/// Largest eigenpairs of a symmetric operator restricted to the orthogonal
/// complement of `deflate` (orthonormal vectors).
#[derive(Clone, Debug)]
pub struct TopEigen<T> {
    /// Descending.
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

/// `k` largest eigenpairs of the symmetric matrix `a` orthogonal to `deflate`.
/// Dense for `n <= DENSE_LIMIT`, Lanczos otherwise.
pub fn top_eigenpairs<T: Scalar>(
    a: &DenseMatrix<T>,
    k: usize,
    deflate: &[Vec<T>],
) -> Result<TopEigen<T>> {
    let n = a.n_rows();
    if k + deflate.len() > n {
        return Err(Error::invalid(format!(
            "requested {k} eigenpairs beyond {} deflated directions in dimension {n}",
            deflate.len()
        )));
    }
    if n <= DENSE_LIMIT {
        top_dense(a, k, deflate)
    } else {
        let op = |x: &[T], y: &mut [T]| {
            for (yi, row) in y.iter_mut().zip(a.rows()) {
                *yi = dot(row, x);
            }
        };
        lanczos_top(n, &op, k, deflate, LanczosOptions::default())
    }
}

fn top_dense<T: Scalar>(a: &DenseMatrix<T>, k: usize, deflate: &[Vec<T>]) -> Result<TopEigen<T>> {
    let n = a.n_rows();
    // Shift deflated directions below the whole spectrum.
    let bound = a
        .rows()
        .map(|r| r.iter().fold(T::zero(), |s, &x| s + x.abs()))
        .fold(T::zero(), T::max);
    let shift = T::lit(2.0) * bound + T::one();
    let mut b = a.clone();
    for u in deflate {
        for i in 0..n {
            for j in 0..n {
                let v = b.get(i, j) - shift * u[i] * u[j];
                b.set(i, j, v);
            }
        }
    }
    let eig = sym_eigen(&b)?;
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for j in (0..n).rev().take(k) {
        values.push(eig.values[j]);
        vectors.push(eig.vector(j));
    }
    Ok(TopEigen { values, vectors })
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    /// Krylov dimension before a restart.
    pub max_basis: usize,
    pub max_restarts: usize,
    /// Residual tolerance relative to the largest Ritz value magnitude.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            max_basis: 160,
            max_restarts: 400,
            tol: f64::EPSILON.sqrt() / 100.0,
            seed: 0x1a2c_705e,
        }
    }
}

/// Restarted Lanczos with full reorthogonalization; eigenpairs are found one
/// at a time, each deflated before the next.
pub fn lanczos_top<T: Scalar>(
    n: usize,
    op: &dyn Fn(&[T], &mut [T]),
    k: usize,
    deflate: &[Vec<T>],
    opts: LanczosOptions,
) -> Result<TopEigen<T>> {
    let mut locked: Vec<Vec<T>> = deflate.to_vec();
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut rng = SeededRng::new(opts.seed);
    for _ in 0..k {
        let (theta, v) = lanczos_one(n, op, &locked, &mut rng, opts)?;
        values.push(theta);
        locked.push(v.clone());
        vectors.push(v);
    }
    Ok(TopEigen { values, vectors })
}

fn orthogonalize<T: Scalar>(w: &mut [T], basis: &[Vec<T>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
    }
}

fn lanczos_one<T: Scalar>(
    n: usize,
    op: &dyn Fn(&[T], &mut [T]),
    locked: &[Vec<T>],
    rng: &mut SeededRng,
    opts: LanczosOptions,
) -> Result<(T, Vec<T>)> {
    let tol = T::lit(opts.tol);
    let tiny = T::epsilon() * T::lit(100.0);
    let free = n - locked.len();
    let m_max = opts.max_basis.min(free).max(1);
    let mut start: Vec<T> = (0..n).map(|_| T::lit(rng.uniform() - 0.5)).collect();
    orthogonalize(&mut start, locked);
    let mut nrm = norm2(&start);
    if nrm <= tiny {
        return Err(Error::Degenerate(
            "Lanczos start vector lies in deflated span".into(),
        ));
    }
    start.iter_mut().for_each(|x| *x /= nrm);

    let mut total = 0usize;
    for _restart in 0..opts.max_restarts {
        let mut q: Vec<Vec<T>> = vec![start.clone()];
        let mut alpha: Vec<T> = Vec::new();
        let mut beta: Vec<T> = Vec::new();
        let mut w = vec![T::zero(); n];
        let mut result: Option<(T, Vec<T>)> = None;
        let mut last_ritz: Option<Vec<T>> = None;
        for j in 0..m_max {
            total += 1;
            op(&q[j], &mut w);
            let a = dot(&q[j], &w);
            alpha.push(a);
            orthogonalize(&mut w, locked);
            orthogonalize(&mut w, &q);
            let b = norm2(&w);
            let invariant = b <= tiny;
            let check = invariant || j + 1 == m_max || (j + 1) % 10 == 0;
            if check {
                let eig = tridiagonal_eigen(&alpha, &beta)?;
                let s = alpha.len();
                let theta = eig.values[s - 1];
                let y = eig.vector(s - 1);
                let scale = eig
                    .values
                    .iter()
                    .fold(T::zero(), |m, &x| m.max(x.abs()))
                    .max(tiny);
                let resid = (b * y[s - 1]).abs();
                let mut ritz = vec![T::zero(); n];
                for (qi, &yi) in q.iter().zip(&y) {
                    axpy(yi, qi, &mut ritz);
                }
                orthogonalize(&mut ritz, locked);
                nrm = norm2(&ritz);
                ritz.iter_mut().for_each(|x| *x /= nrm);
                if invariant || resid <= tol * scale {
                    result = Some((theta, ritz));
                    break;
                }
                last_ritz = Some(ritz);
            }
            if invariant || j + 1 == m_max {
                break;
            }
            beta.push(b);
            let next: Vec<T> = w.iter().map(|&x| x / b).collect();
            q.push(next);
        }
        if let Some(r) = result {
            return Ok(r);
        }
        start = last_ritz.expect("restart vector");
    }
    Err(Error::NoConvergence { iterations: total })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_sym(n: usize, seed: u64) -> DenseMatrix<f64> {
        let mut rng = SeededRng::new(seed);
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.uniform() - 0.5;
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        a
    }

    #[test]
    fn dense_reconstructs_and_matches_nalgebra() {
        let a = random_sym(20, 1);
        let eig = sym_eigen(&a).unwrap();
        let na = nalgebra::DMatrix::from_row_slice(20, 20, a.data());
        let mut oracle: Vec<f64> = na.symmetric_eigen().eigenvalues.iter().copied().collect();
        oracle.sort_by(f64::total_cmp);
        for (x, y) in eig.values.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-12);
        }
        for j in 0..20 {
            let v = eig.vector(j);
            let av = a.matvec(&v).unwrap();
            for i in 0..20 {
                assert!((av[i] - eig.values[j] * v[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tridiagonal_known_spectrum() {
        // Path-graph Laplacian-like tridiagonal: eigenvalues 2 - 2cos(kπ/(n+1)).
        let n = 12;
        let eig = tridiagonal_eigen(&vec![2.0; n], &vec![-1.0; n - 1]).unwrap();
        for (k, &l) in eig.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((l - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let n = 300;
        let a = random_sym(n, 2);
        let dense = sym_eigen(&a).unwrap();
        let top = top_eigenpairs(&a, 2, &[]).unwrap();
        assert!((top.values[0] - dense.values[n - 1]).abs() < 1e-8);
        assert!((top.values[1] - dense.values[n - 2]).abs() < 1e-8);
        let c = dot(&top.vectors[0], &dense.vector(n - 1)).abs();
        assert!(c > 1.0 - 1e-8);
    }

    #[test]
    fn deflation_skips_known_direction() {
        let a: DenseMatrix<f64> = DenseMatrix::from_rows(&[
            vec![3.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let top = top_eigenpairs(&a, 1, &[vec![1.0, 0.0, 0.0]]).unwrap();
        assert!((top.values[0] - 2.0f64).abs() < 1e-14);
    }

    #[test]
    fn single_precision_dense() {
        let a: DenseMatrix<f32> = random_sym(10, 3).cast();
        let eig = sym_eigen(&a).unwrap();
        let v = eig.vector(9);
        let av = a.matvec(&v).unwrap();
        for i in 0..10 {
            assert!((av[i] - eig.values[9] * v[i]).abs() < 1e-5);
        }
    }
}
