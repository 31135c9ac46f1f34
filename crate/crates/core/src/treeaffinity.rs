//! Tree-based distances and affinities between functions on an index set, and
//! the dual affinities that couple row and column geometries of a matrix.
//!
//! Folders carried down unchanged to deeper levels count once: only the
//! folder created by a split (or the root) contributes to the sums.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::{median, AffinityMatrix};
use crate::matrix::DenseMatrix;
use crate::scalar::{dot, norm2, Scalar};
use crate::tree::PartitionTree;

/// Per-folder norm of the difference in the EMD sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FolderNorm {
    L1,
    L2,
}

/// Which tree affinity to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Emd,
    Corr,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "emd" => Ok(Metric::Emd),
            "corr" => Ok(Metric::Corr),
            other => Err(Error::invalid(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeWeightParams {
    /// Level sensitivity: weight factor `2^{-αℓ}`.
    pub alpha: f64,
    /// Folder-size exponent: weight factor `|V|^β`.
    pub beta: f64,
    /// EMD bandwidth as a multiple of the median pairwise EMD.
    pub epsilon_scale: f64,
    pub norm: FolderNorm,
    /// Scale every function to unit Euclidean norm first.
    pub normalize_rows: bool,
}

impl Default for TreeWeightParams {
    fn default() -> Self {
        TreeWeightParams {
            alpha: 0.5,
            beta: 1.0,
            epsilon_scale: 1.0,
            norm: FolderNorm::L1,
            normalize_rows: false,
        }
    }
}

impl TreeWeightParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_scale > 0.0 && self.epsilon_scale.is_finite()) {
            return Err(Error::invalid(format!(
                "epsilon_scale must be positive, got {}",
                self.epsilon_scale
            )));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::invalid("alpha and beta must be finite"));
        }
        Ok(())
    }
}

/// `ω(V) = 2^{-α ℓ} |V|^β`.
pub fn folder_weight(level: usize, size: usize, params: &TreeWeightParams) -> f64 {
    (-params.alpha * level as f64).exp2() * (size as f64).powf(params.beta)
}

/// Folders that contribute to the sums: the root and every split child.
fn counted_folders(tree: &PartitionTree) -> Vec<usize> {
    (0..tree.num_folders())
        .filter(|&id| !tree.is_carried(id))
        .collect()
}

fn check_tree(tree: &PartitionTree, n: usize) -> Result<()> {
    check_len("tree size vs function length", tree.n(), n)
}

/// Multiscale EMD: `Σ_V ‖f|_V - g|_V‖ · ω(V)/|V|` over all folders.
pub fn emd_tree_distance<T: Scalar>(
    f: &[T],
    g: &[T],
    tree: &PartitionTree,
    params: &TreeWeightParams,
) -> Result<T> {
    check_len("emd_tree_distance", f.len(), g.len())?;
    check_tree(tree, f.len())?;
    let ctx = EmdContext::new(tree, params);
    Ok(ctx.distance(f, g))
}

struct EmdContext {
    norm: FolderNorm,
    /// ℓ1: per-index weight `Σ_{V ∋ i} ω(V)/|V|`.
    point_weight: Vec<f64>,
    /// ℓ2: (range in leaf order, ω/|V|) per counted folder.
    folders: Vec<(std::ops::Range<usize>, f64)>,
    leaf_order: Vec<usize>,
}

impl EmdContext {
    fn new(tree: &PartitionTree, params: &TreeWeightParams) -> Self {
        let mut point_weight = vec![0.0; tree.n()];
        let mut folders = Vec::new();
        for id in counted_folders(tree) {
            let f = tree.folder(id);
            let w = folder_weight(f.level(), f.len(), params) / f.len() as f64;
            for &m in f.members() {
                point_weight[m] += w;
            }
            folders.push((f.range(), w));
        }
        EmdContext {
            norm: params.norm,
            point_weight,
            folders,
            leaf_order: tree.leaf_order().as_slice().to_vec(),
        }
    }

    fn distance<T: Scalar>(&self, f: &[T], g: &[T]) -> T {
        match self.norm {
            FolderNorm::L1 => {
                let s: f64 = f
                    .iter()
                    .zip(g)
                    .zip(&self.point_weight)
                    .map(|((&a, &b), &w)| (a - b).abs().as_f64() * w)
                    .sum();
                T::lit(s)
            }
            FolderNorm::L2 => {
                // Prefix sums of squared differences in leaf order.
                let mut prefix = Vec::with_capacity(f.len() + 1);
                prefix.push(0.0);
                let mut acc = 0.0;
                for &i in &self.leaf_order {
                    let d = (f[i] - g[i]).as_f64();
                    acc += d * d;
                    prefix.push(acc);
                }
                let s: f64 = self
                    .folders
                    .iter()
                    .map(|(r, w)| (prefix[r.end] - prefix[r.start]).max(0.0).sqrt() * w)
                    .sum();
                T::lit(s)
            }
        }
    }
}

fn prepared<T: Scalar>(functions: &DenseMatrix<T>, params: &TreeWeightParams) -> DenseMatrix<T> {
    if !params.normalize_rows {
        return functions.clone();
    }
    let mut out = functions.clone();
    for i in 0..out.n_rows() {
        let r = out.row_mut(i);
        let nrm = norm2(r);
        if nrm > T::zero() {
            r.iter_mut().for_each(|x| *x /= nrm);
        }
    }
    out
}

/// All pairwise EMDs between the rows of `functions` (symmetric, zero diagonal).
pub fn pairwise_emd<T: Scalar>(
    functions: &DenseMatrix<T>,
    tree: &PartitionTree,
    params: &TreeWeightParams,
) -> Result<DenseMatrix<f64>> {
    check_tree(tree, functions.n_cols())?;
    let f = prepared(functions, params);
    let ctx = EmdContext::new(tree, params);
    let m = f.n_rows();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (0..m)
                .map(|j| {
                    if j < i {
                        ctx.distance(f.row(i), f.row(j)).as_f64()
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let mut d = DenseMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..i {
            d.set(i, j, rows[i][j]);
            d.set(j, i, rows[i][j]);
        }
    }
    Ok(d)
}

/// Bandwidth `epsilon_scale × median` of the off-diagonal distances. A zero
/// median with some positive distances falls back to the median of the
/// positive ones.
pub fn emd_bandwidth(distances: &DenseMatrix<f64>, epsilon_scale: f64) -> Result<f64> {
    let m = distances.n_rows();
    let mut all: Vec<f64> = (0..m)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| distances.get(i, j))
        .collect();
    if all.is_empty() {
        return Err(Error::invalid("EMD affinity needs at least two functions"));
    }
    let mut med = median(&mut all);
    if med <= 0.0 {
        let mut positive: Vec<f64> = all.into_iter().filter(|&d| d > 0.0).collect();
        if positive.is_empty() {
            return Err(Error::Degenerate("all pairwise EMDs are zero".into()));
        }
        med = median(&mut positive);
    }
    Ok(epsilon_scale * med)
}

/// `W[i][j] = exp(-EMD(f_i, f_j)/ε)` with `ε = epsilon_scale × median EMD`.
pub fn emd_affinity_matrix<T: Scalar>(
    functions: &DenseMatrix<T>,
    tree: &PartitionTree,
    params: &TreeWeightParams,
) -> Result<AffinityMatrix<T>> {
    params.validate()?;
    let d = pairwise_emd(functions, tree, params)?;
    let eps = emd_bandwidth(&d, params.epsilon_scale)?;
    let m = d.n_rows();
    let data = d.data().iter().map(|&x| T::lit((-x / eps).exp())).collect();
    Ok(AffinityMatrix::from_symmetric(DenseMatrix::from_parts(
        m, m, data,
    )))
}

/// Centered, unit-norm segment of `f` over a leaf-order range, or `None` when
/// the segment has fewer than two points or zero variance.
fn normalized_segment<T: Scalar>(f: &[T], idx: &[usize]) -> Option<Vec<T>> {
    if idx.len() < 2 {
        return None;
    }
    let mean = idx.iter().map(|&i| f[i]).sum::<T>() / T::from_count(idx.len());
    let seg: Vec<T> = idx.iter().map(|&i| f[i] - mean).collect();
    let nrm = norm2(&seg);
    let scale = idx.iter().fold(T::zero(), |s, &i| s.max(f[i].abs()));
    if nrm <= scale * T::epsilon() * T::lit(16.0) * T::from_count(idx.len()).sqrt()
        || nrm == T::zero()
    {
        return None;
    }
    Some(seg.into_iter().map(|x| x / nrm).collect())
}

/// Parent→child links that contribute to the correlation affinity, with their
/// weights `|child| / (|parent| ω(child))`.
fn corr_links(tree: &PartitionTree, params: &TreeWeightParams) -> Vec<(usize, f64)> {
    let mut links = Vec::new();
    for id in 0..tree.num_folders() {
        let p = tree.folder(id);
        if p.children().len() < 2 {
            continue;
        }
        for &c in p.children() {
            let ch = tree.folder(c);
            let w =
                ch.len() as f64 / (p.len() as f64 * folder_weight(ch.level(), ch.len(), params));
            links.push((c, w));
        }
    }
    links
}

/// Multiscale correlation affinity between two functions.
pub fn corr_tree_affinity<T: Scalar>(
    f: &[T],
    g: &[T],
    tree: &PartitionTree,
    params: &TreeWeightParams,
) -> Result<T> {
    check_len("corr_tree_affinity", f.len(), g.len())?;
    check_tree(tree, f.len())?;
    let mut s = 0.0;
    for (c, w) in corr_links(tree, params) {
        let idx = tree.folder(c).members();
        if let (Some(a), Some(b)) = (normalized_segment(f, idx), normalized_segment(g, idx)) {
            s += dot(&a, &b).abs().as_f64() * w;
        }
    }
    Ok(T::lit(s))
}

/// Correlation affinity between every pair of rows of `functions`.
pub fn corr_affinity_matrix<T: Scalar>(
    functions: &DenseMatrix<T>,
    tree: &PartitionTree,
    params: &TreeWeightParams,
) -> Result<AffinityMatrix<T>> {
    params.validate()?;
    check_tree(tree, functions.n_cols())?;
    let f = prepared(functions, params);
    let m = f.n_rows();
    let links = corr_links(tree, params);
    // Per link: one normalized segment per function (None when undefined).
    let segments: Vec<(f64, Vec<Option<Vec<T>>>)> = links
        .par_iter()
        .map(|&(c, w)| {
            let idx = tree.folder(c).members();
            (
                w,
                (0..m).map(|i| normalized_segment(f.row(i), idx)).collect(),
            )
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![0.0; i + 1];
            for (w, segs) in &segments {
                if let Some(a) = &segs[i] {
                    for (j, slot) in acc.iter_mut().enumerate() {
                        if let Some(b) = &segs[j] {
                            *slot += dot(a, b).abs().as_f64() * w;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut w = DenseMatrix::zeros(m, m);
    for (i, r) in rows.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            let v = T::lit(v);
            w.set(i, j, v);
            w.set(j, i, v);
        }
    }
    Ok(AffinityMatrix::from_symmetric(w))
}

/// Tree affinity between the rows of `functions` under `metric`.
pub fn tree_affinity<T: Scalar>(
    functions: &DenseMatrix<T>,
    tree: &PartitionTree,
    metric: Metric,
    params: &TreeWeightParams,
) -> Result<AffinityMatrix<T>> {
    match metric {
        Metric::Emd => emd_affinity_matrix(functions, tree, params),
        Metric::Corr => corr_affinity_matrix(functions, tree, params),
    }
}

/// Affinity between the rows of `k`, each viewed as a function on the columns
/// organized by `col_tree`.
pub fn dual_affinity<T: Scalar>(
    k: &DenseMatrix<T>,
    col_tree: &PartitionTree,
    metric: Metric,
    params: &TreeWeightParams,
) -> Result<AffinityMatrix<T>> {
    check_len("dual_affinity column tree", k.n_cols(), col_tree.n())?;
    tree_affinity(k, col_tree, metric, params)
}

/// Affinity between the columns of `k`, each viewed as a function on the rows
/// organized by `row_tree`.
pub fn dual_affinity_columns<T: Scalar>(
    k: &DenseMatrix<T>,
    row_tree: &PartitionTree,
    metric: Metric,
    params: &TreeWeightParams,
) -> Result<AffinityMatrix<T>> {
    check_len("dual_affinity_columns row tree", k.n_rows(), row_tree.n())?;
    tree_affinity(&k.transpose(), row_tree, metric, params)
}
