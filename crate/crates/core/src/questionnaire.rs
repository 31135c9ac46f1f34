//! Iterative refinement of coupled row and column geometries.
//!
//! Starting from an affinity on one axis, a tree is built on that axis; the
//! tree induces a dual affinity (and tree) on the other axis, which in turn
//! refines the first. Iteration stops after `max_iters` rounds or when both
//! affinities change by less than `tol` in relative Frobenius norm.

use crate::error::{check_len, Result};
use crate::graph::AffinityMatrix;
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;
use crate::tree::{PartitionTree, SplitMode, TreeOptions};
use crate::treeaffinity::{dual_affinity, dual_affinity_columns, Metric, TreeWeightParams};

/// Matrix axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Rows,
    Cols,
}

#[derive(Clone, Copy, Debug)]
pub struct QuestionnaireOptions {
    pub metric: Metric,
    pub params: TreeWeightParams,
    pub max_iters: usize,
    pub tol: f64,
    /// Axis on which the initial affinity is defined.
    pub init_axis: Axis,
    pub leaf_max: usize,
    pub seed: u64,
}

impl Default for QuestionnaireOptions {
    fn default() -> Self {
        QuestionnaireOptions {
            metric: Metric::Corr,
            params: TreeWeightParams::default(),
            max_iters: 3,
            tol: 1e-3,
            init_axis: Axis::Cols,
            leaf_max: 1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledGeometry<T> {
    pub row_tree: PartitionTree,
    pub col_tree: PartitionTree,
    pub row_affinity: AffinityMatrix<T>,
    pub col_affinity: AffinityMatrix<T>,
    pub iterations_run: usize,
}

/// `‖W_next - W_prev‖_F / ‖W_prev‖_F`.
pub fn affinity_delta<T: Scalar>(prev: &AffinityMatrix<T>, next: &AffinityMatrix<T>) -> Result<T> {
    check_len("affinity_delta", prev.n(), next.n())?;
    let diff = next.matrix().sub(prev.matrix())?;
    Ok(diff.frobenius_norm() / prev.matrix().frobenius_norm())
}

fn tree_opts(opts: &QuestionnaireOptions, stream: u64) -> TreeOptions {
    TreeOptions {
        mode: SplitMode::Median,
        leaf_max: opts.leaf_max,
        seed: opts.seed.wrapping_add(stream),
        ..TreeOptions::default()
    }
}

/// Runs the coupled refinement on `k` from the initial affinity `w_init`,
/// which lives on `opts.init_axis`.
pub fn run_questionnaire<T: Scalar>(
    k: &DenseMatrix<T>,
    w_init: &AffinityMatrix<T>,
    opts: &QuestionnaireOptions,
) -> Result<CoupledGeometry<T>> {
    if opts.max_iters == 0 {
        return Err(crate::error::Error::invalid("max_iters must be at least 1"));
    }
    opts.params.validate()?;
    match opts.init_axis {
        Axis::Cols => run_from_columns(k, w_init, opts),
        Axis::Rows => {
            let g = run_from_columns(&k.transpose(), w_init, opts)?;
            Ok(CoupledGeometry {
                row_tree: g.col_tree,
                col_tree: g.row_tree,
                row_affinity: g.col_affinity,
                col_affinity: g.row_affinity,
                iterations_run: g.iterations_run,
            })
        }
    }
}

fn run_from_columns<T: Scalar>(
    k: &DenseMatrix<T>,
    w_init: &AffinityMatrix<T>,
    opts: &QuestionnaireOptions,
) -> Result<CoupledGeometry<T>> {
    check_len("initial affinity vs columns", k.n_cols(), w_init.n())?;
    let mut col_tree = PartitionTree::build(w_init, tree_opts(opts, 0))?;
    let mut prev: Option<(AffinityMatrix<T>, AffinityMatrix<T>)> = None;
    let mut result = None;
    for it in 1..=opts.max_iters {
        let row_affinity = dual_affinity(k, &col_tree, opts.metric, &opts.params)?;
        let row_tree = PartitionTree::build(&row_affinity, tree_opts(opts, 2 * it as u64 - 1))?;
        let col_affinity = dual_affinity_columns(k, &row_tree, opts.metric, &opts.params)?;
        col_tree = PartitionTree::build(&col_affinity, tree_opts(opts, 2 * it as u64))?;
        let converged = match &prev {
            Some((pr, pc)) => {
                let dr = affinity_delta(pr, &row_affinity)?.as_f64();
                let dc = affinity_delta(pc, &col_affinity)?.as_f64();
                log::debug!(
                    "questionnaire iteration {it}: row delta {dr:.3e}, column delta {dc:.3e}"
                );
                dr < opts.tol && dc < opts.tol
            }
            None => false,
        };
        prev = Some((row_affinity.clone(), col_affinity.clone()));
        result = Some(CoupledGeometry {
            row_tree,
            col_tree: col_tree.clone(),
            row_affinity,
            col_affinity,
            iterations_run: it,
        });
        if converged {
            break;
        }
    }
    Ok(result.expect("at least one iteration"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::cosine_affinity_columns;
    use crate::rng::SeededRng;

    fn planted() -> (DenseMatrix<f64>, Vec<usize>, Vec<usize>) {
        let mut rng = SeededRng::new(11);
        let mut rows: Vec<usize> = (0..16).map(|i| i % 2).collect();
        let mut cols: Vec<usize> = (0..12).map(|i| i % 2).collect();
        rng.shuffle(&mut rows);
        rng.shuffle(&mut cols);
        let vals = [[3.0, -1.0], [0.5, 2.0]];
        let k = DenseMatrix::from_fn(16, 12, |i, j| vals[rows[i]][cols[j]]).unwrap();
        (k, rows, cols)
    }

    fn groups(labels: &[usize]) -> Vec<Vec<usize>> {
        let mut g: Vec<Vec<usize>> = (0..2)
            .map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
            .collect();
        g.sort();
        g
    }

    #[test]
    fn delta_closed_forms() {
        let (k, _, _) = planted();
        let w = cosine_affinity_columns(&k).unwrap();
        assert_eq!(affinity_delta(&w, &w).unwrap(), 0.0);
        let w2 = AffinityMatrix::new(w.matrix().scale(2.0)).unwrap();
        assert!((affinity_delta(&w, &w2).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn recovers_planted_blocks() {
        let (k, rows, cols) = planted();
        let w = cosine_affinity_columns(&k).unwrap();
        // Correlations vanish on constant blocks, so only the EMD sees them.
        let opts = QuestionnaireOptions {
            metric: Metric::Emd,
            max_iters: 1,
            ..Default::default()
        };
        let g = run_questionnaire(&k, &w, &opts).unwrap();
        assert_eq!(g.iterations_run, 1);
        assert_eq!(g.row_tree.folder_sets()[1], groups(&rows));
        assert_eq!(g.col_tree.folder_sets()[1], groups(&cols));
    }

    #[test]
    fn deterministic_and_axis_swap() {
        let (k, _, _) = planted();
        let w = cosine_affinity_columns(&k).unwrap();
        let opts = QuestionnaireOptions::default();
        let a = run_questionnaire(&k, &w, &opts).unwrap();
        let b = run_questionnaire(&k, &w, &opts).unwrap();
        assert_eq!(a, b);
        let t = k.transpose();
        let c = run_questionnaire(
            &t,
            &w,
            &QuestionnaireOptions {
                init_axis: Axis::Rows,
                ..opts
            },
        )
        .unwrap();
        assert_eq!(c.row_tree, a.col_tree);
        assert_eq!(c.col_affinity, a.row_affinity);
        for g in [&a, &c] {
            g.row_tree.validate().unwrap();
            g.col_tree.validate().unwrap();
            assert!(g.row_affinity.matrix().data().iter().all(|&x| x >= 0.0));
        }
    }
}
