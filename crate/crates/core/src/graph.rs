//! Affinity matrices, normalized Laplacians, Fiedler vectors, landmark
//! (Nyström) approximation and diffusion-map coordinates.

use crate::eigen::{sym_eigen, top_eigenpairs};
use crate::error::{check_len, Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::{dot, norm2, Scalar};

/// Added to every degree so isolated nodes never divide by zero.
pub const DEGREE_EPS: f64 = 1e-12;

/// Symmetric, nonnegative similarity matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityMatrix<T> {
    w: DenseMatrix<T>,
}

impl<T: Scalar> AffinityMatrix<T> {
    /// Validates squareness, symmetry (to 1e-12 relative to the largest entry)
    /// and nonnegativity.
    pub fn new(w: DenseMatrix<T>) -> Result<Self> {
        let (n, m) = w.shape();
        check_len("AffinityMatrix columns", n, m)?;
        let scale = w.data().iter().fold(T::one(), |s, &x| s.max(x.abs()));
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(4.0)) * scale;
        for i in 0..n {
            for j in 0..=i {
                let (a, b) = (w.get(i, j), w.get(j, i));
                if a < T::zero() || b < T::zero() {
                    return Err(Error::invalid(format!("negative affinity at ({i}, {j})")));
                }
                if (a - b).abs() > tol {
                    return Err(Error::invalid(format!(
                        "affinity not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(AffinityMatrix { w })
    }

    /// Averages `W` with its transpose and clamps negatives to zero.
    pub fn symmetrized(w: &DenseMatrix<T>) -> Result<Self> {
        let (n, m) = w.shape();
        check_len("AffinityMatrix columns", n, m)?;
        let half = T::lit(0.5);
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = (half * (w.get(i, j) + w.get(j, i))).max(T::zero());
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        Ok(AffinityMatrix { w: out })
    }

    pub(crate) fn from_symmetric(w: DenseMatrix<T>) -> Self {
        AffinityMatrix { w }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.w.n_rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.w.get(i, j)
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.w
    }

    pub fn into_matrix(self) -> DenseMatrix<T> {
        self.w
    }

    /// Affinity restricted to `idx × idx`.
    pub fn restrict(&self, idx: &[usize]) -> Self {
        AffinityMatrix {
            w: self.w.submatrix(idx, idx),
        }
    }

    /// Row sums plus the degree regularization.
    pub fn degrees(&self) -> Vec<T> {
        let eps = T::lit(DEGREE_EPS);
        self.w
            .rows()
            .map(|r| r.iter().copied().sum::<T>() + eps)
            .collect()
    }
}

/// Gaussian bandwidth choice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Median of all pairwise Euclidean distances.
    Median,
}

/// Median of a nonempty list (mean of the two middle values for even length).
pub fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, &mut hi, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        hi
    } else {
        let lo = values[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// `W[i][j] = exp(-‖p_i - p_j‖² / (2σ²))` over the rows of `points`.
pub fn gaussian_affinity<T: Scalar>(
    points: &DenseMatrix<T>,
    sigma: Bandwidth,
) -> Result<AffinityMatrix<T>> {
    let n = points.n_rows();
    if n < 2 {
        return Err(Error::invalid(
            "gaussian_affinity needs at least two points",
        ));
    }
    let mut d2 = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = sq_dist(points.row(i), points.row(j));
            d2.set(i, j, v);
            d2.set(j, i, v);
        }
    }
    let s = match sigma {
        Bandwidth::Fixed(s) if s > 0.0 && s.is_finite() => s,
        Bandwidth::Fixed(s) => {
            return Err(Error::invalid(format!(
                "bandwidth must be positive, got {s}"
            )))
        }
        Bandwidth::Median => {
            let mut dists: Vec<f64> = (0..n)
                .flat_map(|i| (0..i).map(move |j| (i, j)))
                .map(|(i, j)| d2.get(i, j).as_f64().sqrt())
                .collect();
            let m = median(&mut dists);
            if m <= 0.0 {
                return Err(Error::Degenerate("median pairwise distance is zero".into()));
            }
            m
        }
    };
    let inv = T::lit(-1.0 / (2.0 * s * s));
    let data = d2.data().iter().map(|&x| (x * inv).exp()).collect();
    Ok(AffinityMatrix::from_symmetric(DenseMatrix::from_parts(
        n, n, data,
    )))
}

/// `W[i][j] = |⟨v_i, v_j⟩| / (‖v_i‖ ‖v_j‖)` where the vectors are the rows of
/// `vectors`.
pub fn cosine_affinity<T: Scalar>(vectors: &DenseMatrix<T>) -> Result<AffinityMatrix<T>> {
    let n = vectors.n_rows();
    let norms: Vec<T> = vectors.rows().map(norm2).collect();
    if let Some(i) = norms.iter().position(|&x| x == T::zero()) {
        return Err(Error::Degenerate(format!("vector {i} has zero norm")));
    }
    let mut w = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = if i == j {
                T::one()
            } else {
                (dot(vectors.row(i), vectors.row(j)) / (norms[i] * norms[j]))
                    .abs()
                    .min(T::one())
            };
            w.set(i, j, v);
            w.set(j, i, v);
        }
    }
    Ok(AffinityMatrix::from_symmetric(w))
}

/// Cosine affinity between the columns of `k`.
pub fn cosine_affinity_columns<T: Scalar>(k: &DenseMatrix<T>) -> Result<AffinityMatrix<T>> {
    cosine_affinity(&k.transpose())
}

/// `D^{-1/2} W D^{-1/2}`, the normalized adjacency whose top eigenvector is
/// `√d / ‖√d‖` with eigenvalue 1.
pub fn normalized_adjacency<T: Scalar>(w: &AffinityMatrix<T>) -> (DenseMatrix<T>, Vec<T>) {
    let n = w.n();
    let s: Vec<T> = w.degrees().iter().map(|&d| d.sqrt()).collect();
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, w.get(i, j) / (s[i] * s[j]));
        }
    }
    (m, s)
}

/// `L_sym = I - D^{-1/2} W D^{-1/2}`.
pub fn sym_laplacian<T: Scalar>(w: &AffinityMatrix<T>) -> DenseMatrix<T> {
    let (mut m, _) = normalized_adjacency(w);
    let n = w.n();
    for i in 0..n {
        for j in 0..n {
            let v = if i == j { T::one() } else { T::zero() } - m.get(i, j);
            m.set(i, j, v);
        }
    }
    m
}

/// Flips `v` so its first entry of non-negligible magnitude is positive.
pub fn fix_sign<T: Scalar>(v: &mut [T]) {
    let big = v.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    let thresh = big * T::epsilon().sqrt();
    if let Some(&first) = v.iter().find(|x| x.abs() > thresh) {
        if first < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn unit<T: Scalar>(mut v: Vec<T>) -> Vec<T> {
    let n = norm2(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Unit eigenvector of `L_sym` for the second-smallest eigenvalue, taken
/// orthogonal to `D^{1/2}·1`.
pub fn fiedler_vector<T: Scalar>(w: &AffinityMatrix<T>) -> Result<Vec<T>> {
    let n = w.n();
    if n < 2 {
        return Err(Error::invalid("fiedler_vector needs at least two nodes"));
    }
    let (m, s) = normalized_adjacency(w);
    let u0 = unit(s);
    let top = top_eigenpairs(&m, 1, &[u0])?;
    let mut v = top.vectors.into_iter().next().expect("one eigenvector");
    fix_sign(&mut v);
    Ok(v)
}

/// Nyström approximation of the Fiedler vector from the affinities of all `n`
/// points to `m` landmarks.
///
/// `w_cross` is `n × m`; `landmarks[j]` is the row index of landmark `j`, so
/// the landmark block is `w_cross[landmarks, :]`. The full affinity is
/// approximated by `C A⁺ Cᵀ` with `A` the landmark block (pseudo-inverse over
/// eigenvalues above `1e-12` of the largest). The approximation is exact when
/// every point is a landmark.
pub fn landmark_fiedler<T: Scalar>(
    w_cross: &DenseMatrix<T>,
    landmarks: &[usize],
) -> Result<Vec<T>> {
    let (n, m) = w_cross.shape();
    check_len("landmark_fiedler landmarks", m, landmarks.len())?;
    if m < 2 {
        return Err(Error::invalid(format!(
            "landmark_fiedler needs at least 2 landmarks, got {m}"
        )));
    }
    if let Some(&bad) = landmarks.iter().find(|&&l| l >= n) {
        return Err(Error::invalid(format!("landmark index {bad} out of range")));
    }
    let cols: Vec<usize> = (0..m).collect();
    let a = w_cross.submatrix(landmarks, &cols);
    let mut a_sym = a.clone();
    for i in 0..m {
        for j in 0..i {
            let v = T::lit(0.5) * (a.get(i, j) + a.get(j, i));
            a_sym.set(i, j, v);
            a_sym.set(j, i, v);
        }
    }
    let eig = sym_eigen(&a_sym)?;
    let lmax = eig.values.iter().fold(T::zero(), |s, &x| s.max(x.abs()));
    let cutoff = T::lit(1e-12) * lmax;
    let keep: Vec<usize> = (0..m).filter(|&j| eig.values[j].abs() > cutoff).collect();
    if keep.len() < 2 {
        return Err(Error::RankDeficient { rank: keep.len() });
    }
    let r = keep.len();
    // A⁺ = U Λ⁻¹ Uᵀ over the kept spectrum.
    let u = DenseMatrix::from_fn(m, r, |i, j| eig.vectors.get(i, keep[j]))?;
    let inv_l: Vec<T> = keep.iter().map(|&j| T::one() / eig.values[j]).collect();

    // Approximate degrees d = C A⁺ Cᵀ 1.
    let ones = vec![T::one(); n];
    let ct1 = w_cross.matvec_transpose(&ones)?;
    let utc = u.matvec_transpose(&ct1)?;
    let scaled: Vec<T> = utc.iter().zip(&inv_l).map(|(&x, &l)| x * l).collect();
    let ainv_ct1 = u.matvec(&scaled)?;
    let d_raw = w_cross.matvec(&ainv_ct1)?;
    let dmax = d_raw.iter().fold(T::zero(), |s, &x| s.max(x));
    if dmax <= T::zero() {
        return Err(Error::Degenerate(
            "approximate degrees are not positive".into(),
        ));
    }
    let floor = dmax * T::lit(1e-12);
    let eps = T::lit(DEGREE_EPS);
    let inv_sqrt_d: Vec<T> = d_raw
        .iter()
        .map(|&d| T::one() / (d.max(floor) + eps).sqrt())
        .collect();

    // H = D^{-1/2} C U  (n × r); normalized approximation = H Λ⁻¹ Hᵀ.
    let cu = w_cross.matmul(&u)?;
    let mut h = DenseMatrix::zeros(n, r);
    for i in 0..n {
        for j in 0..r {
            h.set(i, j, cu.get(i, j) * inv_sqrt_d[i]);
        }
    }
    // Thin QR of H by twice-iterated modified Gram-Schmidt.
    let mut qcols: Vec<Vec<T>> = Vec::with_capacity(r);
    let mut rmat = vec![vec![T::zero(); r]; r];
    let hnorm = h.frobenius_norm();
    for j in 0..r {
        let mut col = h.column(j);
        for _ in 0..2 {
            for (k, q) in qcols.iter().enumerate() {
                let c = dot(q, &col);
                rmat[k][j] += c;
                crate::scalar::axpy(-c, q, &mut col);
            }
        }
        let nc = norm2(&col);
        if nc > T::lit(1e-13) * hnorm {
            let k = qcols.len();
            rmat[k][j] = nc;
            col.iter_mut().for_each(|x| *x /= nc);
            qcols.push(col);
        }
    }
    let q_rank = qcols.len();
    if q_rank < 2 {
        return Err(Error::RankDeficient { rank: q_rank });
    }
    // S = R Λ⁻¹ Rᵀ (q_rank × q_rank).
    let s = DenseMatrix::from_fn(q_rank, q_rank, |a, b| {
        (0..r).map(|k| rmat[a][k] * inv_l[k] * rmat[b][k]).sum()
    })?;
    let se = sym_eigen(&s)?;
    let y = se.vector(q_rank - 2);
    let mut v = vec![T::zero(); n];
    for (q, &yk) in qcols.iter().zip(&y) {
        crate::scalar::axpy(yk, q, &mut v);
    }
    let mut v = unit(v);
    fix_sign(&mut v);
    Ok(v)
}

/// Diffusion-map coordinates: eigenvectors 2..=d+1 of `D⁻¹W` in descending
/// eigenvalue order, each normalized to unit length and scaled by its
/// eigenvalue. Returns an `n × d` matrix.
pub fn diffusion_embedding<T: Scalar>(w: &AffinityMatrix<T>, d: usize) -> Result<DenseMatrix<T>> {
    let n = w.n();
    if d == 0 || d >= n {
        return Err(Error::invalid(format!(
            "embedding dimension {d} must be in 1..{n}"
        )));
    }
    let (m, s) = normalized_adjacency(w);
    let u0 = unit(s.clone());
    let top = top_eigenpairs(&m, d, &[u0])?;
    let mut coords = DenseMatrix::zeros(n, d);
    for (c, (lambda, phi)) in top.values.iter().zip(&top.vectors).enumerate() {
        let psi: Vec<T> = phi.iter().zip(&s).map(|(&p, &si)| p / si).collect();
        let mut psi = unit(psi);
        fix_sign(&mut psi);
        for i in 0..n {
            coords.set(i, c, *lambda * psi[i]);
        }
    }
    Ok(coords)
}

/// Eigenvalues of `D⁻¹W` (ascending), via its symmetric similarity transform.
pub fn random_walk_spectrum<T: Scalar>(w: &AffinityMatrix<T>) -> Result<Vec<T>> {
    let (m, _) = normalized_adjacency(w);
    Ok(sym_eigen(&m)?.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn points(n: usize, dim: usize, seed: u64) -> DenseMatrix<f64> {
        let mut rng = SeededRng::new(seed);
        DenseMatrix::from_fn(n, dim, |_, _| rng.uniform()).unwrap()
    }

    fn random_affinity(n: usize, seed: u64) -> AffinityMatrix<f64> {
        gaussian_affinity(&points(n, 2, seed), Bandwidth::Median).unwrap()
    }

    fn oracle_eig(a: &DenseMatrix<f64>) -> (Vec<f64>, nalgebra::DMatrix<f64>) {
        let n = a.n_rows();
        let e = nalgebra::DMatrix::from_row_slice(n, n, a.data()).symmetric_eigen();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&i, &j| e.eigenvalues[i].total_cmp(&e.eigenvalues[j]));
        let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
        let vecs = nalgebra::DMatrix::from_fn(n, n, |r, c| e.eigenvectors[(r, idx[c])]);
        (vals, vecs)
    }

    #[test]
    fn gaussian_closed_forms() {
        let p = DenseMatrix::from_rows(&[vec![0.0], vec![0.0]]).unwrap();
        let w = gaussian_affinity(&p, Bandwidth::Fixed(1.0)).unwrap();
        assert_eq!(w.get(0, 1), 1.0);
        let s = 0.7;
        let p = DenseMatrix::from_rows(&[vec![0.0], vec![s * 2f64.sqrt()]]).unwrap();
        let w = gaussian_affinity(&p, Bandwidth::Fixed(s)).unwrap();
        assert!((w.get(0, 1) - (-1f64).exp()).abs() < 1e-15);
        assert!(matches!(
            gaussian_affinity(&p, Bandwidth::Fixed(0.0)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn gaussian_matches_double_loop() {
        let p = points(10, 2, 1);
        let w = gaussian_affinity(&p, Bandwidth::Fixed(0.3)).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let dx = p.get(i, 0) - p.get(j, 0);
                let dy = p.get(i, 1) - p.get(j, 1);
                let e = (-(dx * dx + dy * dy) / (2.0 * 0.09)).exp();
                assert!((w.get(i, j) - e).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn gaussian_median_degenerate() {
        let p = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            gaussian_affinity(&p, Bandwidth::Median),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn gaussian_rigid_motion_invariant() {
        let p = points(12, 2, 2);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let q = DenseMatrix::from_fn(12, 2, |i, j| {
            let (x, y) = (p.get(i, 0), p.get(i, 1));
            if j == 0 {
                c * x - s * y + 5.0
            } else {
                s * x + c * y - 2.0
            }
        })
        .unwrap();
        let a = gaussian_affinity(&p, Bandwidth::Median).unwrap();
        let b = gaussian_affinity(&q, Bandwidth::Median).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-12);
    }

    #[test]
    fn cosine_closed_forms() {
        let v = DenseMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 2.0],
            vec![2.0, 0.0],
        ])
        .unwrap();
        let w = cosine_affinity(&v).unwrap();
        assert!((w.get(0, 1) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(w.get(0, 2), 0.0);
        assert_eq!(w.get(0, 3), 1.0);
        let z = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(cosine_affinity(&z).is_err());
    }

    #[test]
    fn laplacian_closed_form_and_formula() {
        let w = AffinityMatrix::new(DenseMatrix::from_vec(2, 2, vec![1.0; 4]).unwrap()).unwrap();
        let l = sym_laplacian(&w);
        for (x, e) in l.data().iter().zip([0.5f64, -0.5, -0.5, 0.5]) {
            assert!((x - e).abs() < 1e-12);
        }
        let w = random_affinity(15, 3);
        let l = sym_laplacian(&w);
        let d = w.degrees();
        for i in 0..15 {
            for j in 0..15 {
                let dij = if i == j { d[i] } else { 0.0 };
                let e = (dij - w.get(i, j)) / (d[i].sqrt() * d[j].sqrt());
                assert!((l.get(i, j) - e).abs() < 1e-14);
            }
        }
        let (vals, _) = oracle_eig(&l);
        assert!(vals[0] > -1e-10 && vals[14] < 2.0 + 1e-10);
        assert!(vals[0].abs() < 1e-10);
    }

    #[test]
    fn two_components_have_double_zero() {
        let mut m = DenseMatrix::zeros(4, 4);
        for (i, j) in [(0, 1), (2, 3)] {
            m.set(i, j, 1.0);
            m.set(j, i, 1.0);
        }
        let w = AffinityMatrix::new(m).unwrap();
        let (vals, _) = oracle_eig(&sym_laplacian(&w));
        assert!(vals[0].abs() < 1e-10 && vals[1].abs() < 1e-10 && vals[2] > 0.5);
        let f = fiedler_vector(&w).unwrap();
        assert!((f[0] - f[1]).abs() < 1e-10 && (f[2] - f[3]).abs() < 1e-10);
        assert!(f[0] > 0.0 && f[2] < 0.0);
    }

    #[test]
    fn path_graph_fiedler_monotone() {
        let mut m = DenseMatrix::zeros(4, 4);
        for i in 0..3 {
            m.set(i, i + 1, 1.0);
            m.set(i + 1, i, 1.0);
        }
        let f = fiedler_vector(&AffinityMatrix::new(m).unwrap()).unwrap();
        assert!(f.windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn fiedler_matches_dense_oracle() {
        for (n, seed) in [(16, 4), (300, 5)] {
            let w = random_affinity(n, seed);
            let f = fiedler_vector(&w).unwrap();
            let (_, vecs) = oracle_eig(&sym_laplacian(&w));
            let c: f64 = (0..n).map(|i| f[i] * vecs[(i, 1)]).sum::<f64>().abs();
            assert!(c >= 0.999999, "n={n} cos={c}");
            let s: Vec<f64> = w.degrees().iter().map(|d| d.sqrt()).collect();
            assert!(dot(&f, &s).abs() / norm2(&s) < 1e-8);
        }
    }

    #[test]
    fn landmarks_all_points_is_exact() {
        let w = random_affinity(40, 6);
        let all: Vec<usize> = (0..40).collect();
        let a = landmark_fiedler(w.matrix(), &all).unwrap();
        let b = fiedler_vector(&w).unwrap();
        let diff = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "diff {diff}");
    }

    #[test]
    fn landmark_two_clusters() {
        let n = 400;
        let mut rng = SeededRng::new(7);
        let p = DenseMatrix::from_fn(n, 2, |i, _| {
            let c = if i % 2 == 0 { 0.0 } else { 6.0 };
            c + rng.normal() * 0.5
        })
        .unwrap();
        let w = gaussian_affinity(&p, Bandwidth::Median).unwrap();
        let exact = fiedler_vector(&w).unwrap();
        let m = (n as f64).sqrt() as usize;
        let lm = rng.sample_indices(n, m);
        let cols: Vec<usize> = lm.clone();
        let all: Vec<usize> = (0..n).collect();
        let approx = landmark_fiedler(&w.matrix().submatrix(&all, &cols), &lm).unwrap();
        let agree = exact
            .iter()
            .zip(&approx)
            .filter(|(a, b)| (**a >= 0.0) == (**b >= 0.0))
            .count();
        let agree = agree.max(n - agree);
        assert!(agree as f64 >= 0.95 * n as f64, "agree {agree}");
        assert!(landmark_fiedler(&w.matrix().submatrix(&all, &[0]), &[0]).is_err());
    }

    #[test]
    fn ring_embedding_is_annulus() {
        let n = 60;
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            let j = (i + 1) % n;
            m.set(i, j, 1.0);
            m.set(j, i, 1.0);
        }
        let w = AffinityMatrix::new(m).unwrap();
        let e: DenseMatrix<f64> = diffusion_embedding(&w, 2).unwrap();
        let r: Vec<f64> = (0..n).map(|i| e.get(i, 0).hypot(e.get(i, 1))).collect();
        let mean = r.iter().sum::<f64>() / n as f64;
        let spread = r.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
        assert!(spread < 0.1 * mean);
        assert!(diffusion_embedding(&w, n).is_err());
    }

    #[test]
    fn random_walk_spectrum_bounded() {
        let w = random_affinity(30, 8);
        for l in random_walk_spectrum(&w).unwrap() {
            assert!((-1.0 - 1e-10..=1.0 + 1e-10).contains(&l));
        }
    }

    #[test]
    fn affinity_validation() {
        let bad: DenseMatrix<f64> =
            DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).unwrap();
        assert!(AffinityMatrix::new(bad.clone()).is_err());
        let s: AffinityMatrix<f64> = AffinityMatrix::symmetrized(&bad).unwrap();
        assert!((s.get(0, 1) - 0.45).abs() < 1e-15);
        let neg = DenseMatrix::from_rows(&[vec![1.0, -0.5], vec![-0.5, 1.0]]).unwrap();
        assert!(AffinityMatrix::new(neg).is_err());
    }
}
