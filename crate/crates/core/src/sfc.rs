//! Affinity-guided orientation of sibling folders, producing a
//! space-filling-curve ordering of the leaves.
//!
//! Levels are processed top-down and parents left to right. For the two
//! children of a parent, `A`/`B` are the total affinities of the left/right
//! child to the folder immediately to their left (already oriented), and
//! `C`/`D` their affinities to the parent's right neighbour one level up. The
//! children are swapped when `A/C <= B/D`. A missing left neighbour sets
//! `A = B = 1`; a missing right neighbour sets `C = D = 1`.

use std::fmt::Write as _;

use crate::error::{check_len, Result};
use crate::graph::AffinityMatrix;
use crate::io::format_f64;
use crate::matrix::DenseMatrix;
use crate::perm::Permutation;
use crate::scalar::Scalar;
use crate::tree::PartitionTree;

const ZERO_GUARD: f64 = 1e-300;

fn block_sum<T: Scalar>(w: &AffinityMatrix<T>, a: &[usize], b: &[usize]) -> f64 {
    let mut s = 0.0;
    for &i in a {
        for &j in b {
            s += w.get(i, j).as_f64();
        }
    }
    s
}

/// Orients every sibling pair of `tree` using `w` and returns the reoriented
/// tree with its leaf ordering.
pub fn order_tree<T: Scalar>(
    tree: &PartitionTree,
    w: &AffinityMatrix<T>,
) -> Result<(PartitionTree, Permutation)> {
    check_len("order_tree affinity", tree.n(), w.n())?;
    let mut t = tree.clone();
    let mut parents: Vec<usize> = vec![t.root()];
    for _level in 1..=t.depth() {
        let mut next: Vec<usize> = Vec::with_capacity(2 * parents.len());
        for (k, &p) in parents.iter().enumerate() {
            let children = t.folder(p).children().to_vec();
            if children.len() == 2 {
                let (left, right) = (
                    t.folder(children[0]).members(),
                    t.folder(children[1]).members(),
                );
                let (a, b) = match next.last() {
                    Some(&prev) => {
                        let pm = t.folder(prev).members();
                        (block_sum(w, left, pm), block_sum(w, right, pm))
                    }
                    None => (1.0, 1.0),
                };
                let (c, d) = match parents.get(k + 1) {
                    Some(&nb) => {
                        let nm = t.folder(nb).members();
                        (block_sum(w, left, nm), block_sum(w, right, nm))
                    }
                    None => (1.0, 1.0),
                };
                if a / c.max(ZERO_GUARD) <= b / d.max(ZERO_GUARD) {
                    t.swap_children(p);
                }
            }
            next.extend_from_slice(t.folder(p).children());
        }
        parents = next;
    }
    t.relayout();
    let perm = t.leaf_order().clone();
    Ok((t, perm))
}

/// Sum of Euclidean distances between consecutive points along `perm`.
pub fn path_length<T: Scalar>(points: &DenseMatrix<T>, perm: &Permutation) -> Result<f64> {
    check_len("path_length", points.n_rows(), perm.len())?;
    let p = perm.as_slice();
    Ok(p.windows(2)
        .map(|w| {
            points
                .row(w[0])
                .iter()
                .zip(points.row(w[1]))
                .map(|(&a, &b)| (a - b).as_f64().powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum())
}

/// Points in traversal order as CSV (`index,x0,x1,...`).
pub fn curve_path_csv<T: Scalar>(points: &DenseMatrix<T>, perm: &Permutation) -> Result<String> {
    check_len("curve_path_csv", points.n_rows(), perm.len())?;
    let mut out = String::from("index");
    for d in 0..points.n_cols() {
        let _ = write!(out, ",x{d}");
    }
    out.push('\n');
    for &i in perm.as_slice() {
        let _ = write!(out, "{i}");
        for &x in points.row(i) {
            let _ = write!(out, ",{}", format_f64(x.as_f64()));
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gaussian_affinity, Bandwidth};
    use crate::rng::SeededRng;
    use crate::tree::{build_tree, SplitMode};

    #[test]
    fn single_split_swaps_once() {
        let w = AffinityMatrix::new(DenseMatrix::from_vec(2, 2, vec![1.0, 0.5, 0.5, 1.0]).unwrap())
            .unwrap();
        let t = PartitionTree::dyadic(2, 1).unwrap();
        let (o, p) = order_tree(&t, &w).unwrap();
        assert_eq!(p.as_slice(), &[1, 0]);
        assert_eq!(o.folder_sets(), t.folder_sets());
        assert_eq!(order_tree(&t, &w).unwrap().1, p);
    }

    #[test]
    fn line_points_come_out_sorted() {
        let n = 64;
        let mut rng = SeededRng::new(1);
        let xs: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let pts = DenseMatrix::from_fn(n, 1, |i, _| xs[i]).unwrap();
        let w = gaussian_affinity(&pts, Bandwidth::Median).unwrap();
        let t = build_tree(&w, SplitMode::Median, 1).unwrap();
        let (o, p) = order_tree(&t, &w).unwrap();
        o.validate().unwrap();
        assert_eq!(o.folder_sets(), t.folder_sets());
        let seq: Vec<f64> = p.as_slice().iter().map(|&i| xs[i]).collect();
        let inc = seq.windows(2).all(|w| w[0] <= w[1]);
        let dec = seq.windows(2).all(|w| w[0] >= w[1]);
        assert!(inc || dec, "{seq:?}");
    }

    #[test]
    fn csv_orders_points() {
        let pts =
            DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.5]]).unwrap();
        let id = curve_path_csv(&pts, &Permutation::identity(3)).unwrap();
        let rev = curve_path_csv(&pts, &Permutation::identity(3).reversed()).unwrap();
        let parsed = crate::io::read_csv(id.as_bytes()).unwrap();
        assert_eq!(parsed[0], vec![0.0, 0.0, 1.0]);
        let parsed_rev = crate::io::read_csv(rev.as_bytes()).unwrap();
        assert_eq!(parsed_rev[0], vec![2.0, 4.0, 5.5]);
        assert_eq!(
            path_length(&pts, &Permutation::identity(3)).unwrap(),
            8f64.sqrt() + (4.0f64 + 6.25).sqrt()
        );
    }
}
