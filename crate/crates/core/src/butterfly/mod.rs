//! Butterfly factorization of a kernel matrix over a pair of partition trees.
//!
//! Pass 0 skeletonizes every column folder at the start level against all
//! rows. Each following pass descends one row level and merges sibling column
//! skeletons, re-running an interpolative decomposition per
//! (row folder, merged column folder) block. The surviving skeleton columns
//! are stored densely per final row folder.

mod id;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accounting::StorageCount;
use crate::error::{check_len, Error, Result};
use crate::io::{read_kmat, write_kmat};
use crate::matrix::DenseMatrix;
use crate::perm::Permutation;
use crate::scalar::Scalar;
use crate::tree::PartitionTree;

pub use id::{interpolative_decomposition, InterpDecomp, COEFF_BOUND};

pub const DEFAULT_EPS: f64 = 1e-10;

/// One interpolation block: `out[offset + i] = x[skel[i]] + Σ_j coeffs[i][j] x[rest[j]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpBlock<T> {
    pub row_folder: usize,
    pub col_folder: usize,
    pub src_skel: Vec<usize>,
    pub src_rest: Vec<usize>,
    pub coeffs: DenseMatrix<T>,
    pub out_offset: usize,
}

impl<T: Scalar> InterpBlock<T> {
    pub fn rank(&self) -> usize {
        self.src_skel.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterpLevel<T> {
    pub input_len: usize,
    pub output_len: usize,
    pub blocks: Vec<InterpBlock<T>>,
}

/// Dense block `K(row folder, skeleton columns)` applied to `x[src_offset..src_offset + b.n_cols()]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FinalBlock<T> {
    pub row_folder: usize,
    pub col_folder: usize,
    pub row_offset: usize,
    pub src_offset: usize,
    pub b: DenseMatrix<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ButterflyFactorization<T> {
    pub n_rows: usize,
    pub n_cols: usize,
    pub eps: f64,
    pub block_cap: usize,
    pub start_level: usize,
    pub levels: Vec<InterpLevel<T>>,
    pub final_blocks: Vec<FinalBlock<T>>,
    pub row_perm: Permutation,
    pub col_perm: Permutation,
}

/// Coarsest level of `tree` whose largest folder holds at most `block_cap` indices.
pub fn start_level(tree: &PartitionTree, block_cap: usize) -> Result<usize> {
    for level in 0..=tree.depth() {
        if tree.max_folder_size(level)? <= block_cap {
            return Ok(level);
        }
    }
    Err(Error::invalid(format!(
        "column tree of depth {} has no level with folders of at most {block_cap} columns",
        tree.depth()
    )))
}

// Skeleton of one (row folder, column folder) block after a pass.
#[derive(Clone, Default)]
struct Skel {
    cols: Vec<usize>,
    offset: usize,
}

fn positions(tree: &PartitionTree) -> Vec<usize> {
    let mut pos = vec![0; tree.num_folders()];
    for level in 0..=tree.depth() {
        for (k, &id) in tree
            .level_ids(level)
            .expect("level in range")
            .iter()
            .enumerate()
        {
            pos[id] = k;
        }
    }
    pos
}

struct BlockResult<T> {
    src_skel: Vec<usize>,
    src_rest: Vec<usize>,
    coeffs: DenseMatrix<T>,
    skel_cols: Vec<usize>,
}

fn skeletonize<T: Scalar>(
    k: &DenseMatrix<T>,
    rows: &[usize],
    cols: &[usize],
    src: &[usize],
    eps: f64,
) -> Result<BlockResult<T>> {
    if cols.is_empty() {
        return Ok(BlockResult {
            src_skel: Vec::new(),
            src_rest: Vec::new(),
            coeffs: DenseMatrix::zeros(0, 0),
            skel_cols: Vec::new(),
        });
    }
    let id = interpolative_decomposition(&k.submatrix(rows, cols), eps)?;
    Ok(BlockResult {
        src_skel: id.skeleton.iter().map(|&j| src[j]).collect(),
        src_rest: id.rest.iter().map(|&j| src[j]).collect(),
        skel_cols: id.skeleton.iter().map(|&j| cols[j]).collect(),
        coeffs: id.coeffs,
    })
}

/// Factorizes `k` with rows organized by `row_tree` and columns by `col_tree`.
/// The trees' leaf orders become the stored row/column permutations.
pub fn butterfly_factor<T: Scalar>(
    k: &DenseMatrix<T>,
    row_tree: &PartitionTree,
    col_tree: &PartitionTree,
    eps: f64,
    block_cap: usize,
) -> Result<ButterflyFactorization<T>> {
    let (m, n) = k.shape();
    check_len("row tree size", m, row_tree.n())?;
    check_len("column tree size", n, col_tree.n())?;
    if block_cap == 0 {
        return Err(Error::invalid("block_cap must be positive"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!(
            "precision must lie in (0, 1), got {eps}"
        )));
    }
    let start = start_level(col_tree, block_cap)?;
    let passes = row_tree.depth().min(start);
    let row_perm = row_tree.leaf_order().clone();
    let col_perm = col_tree.leaf_order().clone();
    let col_inv = col_perm.inverse();
    let row_pos = positions(row_tree);
    let col_pos = positions(col_tree);

    let mut levels = Vec::with_capacity(passes + 1);
    // skels[krow][kcol] for the current row level and column level.
    let mut skels: Vec<Vec<Skel>>;

    {
        let all_rows = row_tree.folder(row_tree.root()).members();
        let col_ids = col_tree.level_ids(start)?;
        let results: Vec<BlockResult<T>> = col_ids
            .par_iter()
            .map(|&c| {
                let cols = col_tree.folder(c).members();
                let src: Vec<usize> = cols.iter().map(|&j| col_inv.get(j)).collect();
                skeletonize(k, all_rows, cols, &src, eps)
            })
            .collect::<Result<_>>()?;
        let mut row = Vec::with_capacity(col_ids.len());
        let mut blocks = Vec::with_capacity(col_ids.len());
        let mut offset = 0;
        for (res, &c) in results.into_iter().zip(col_ids) {
            let r = res.skel_cols.len();
            row.push(Skel {
                cols: res.skel_cols,
                offset,
            });
            blocks.push(InterpBlock {
                row_folder: row_tree.root(),
                col_folder: c,
                src_skel: res.src_skel,
                src_rest: res.src_rest,
                coeffs: res.coeffs,
                out_offset: offset,
            });
            offset += r;
        }
        levels.push(InterpLevel {
            input_len: n,
            output_len: offset,
            blocks,
        });
        skels = vec![row];
    }

    for t in 1..=passes {
        let row_ids = row_tree.level_ids(t)?;
        let col_ids = col_tree.level_ids(start - t)?;
        let input_len = levels.last().map(|l| l.output_len).unwrap_or(0);
        let jobs: Vec<(usize, usize)> = row_ids
            .iter()
            .flat_map(|&r| col_ids.iter().map(move |&c| (r, c)))
            .collect();
        let results: Vec<BlockResult<T>> = jobs
            .par_iter()
            .map(|&(r, c)| {
                let parent = row_tree.folder(r).parent().expect("non-root row folder");
                let prev = &skels[row_pos[parent]];
                let mut cols = Vec::new();
                let mut src = Vec::new();
                for &child in col_tree.folder(c).children() {
                    let s = &prev[col_pos[child]];
                    cols.extend_from_slice(&s.cols);
                    src.extend(s.offset..s.offset + s.cols.len());
                }
                skeletonize(k, row_tree.folder(r).members(), &cols, &src, eps)
            })
            .collect::<Result<_>>()?;
        let mut next = vec![vec![Skel::default(); col_ids.len()]; row_ids.len()];
        let mut blocks = Vec::with_capacity(jobs.len());
        let mut offset = 0;
        for (res, &(r, c)) in results.into_iter().zip(&jobs) {
            let rank = res.skel_cols.len();
            next[row_pos[r]][col_pos[c]] = Skel {
                cols: res.skel_cols,
                offset,
            };
            blocks.push(InterpBlock {
                row_folder: r,
                col_folder: c,
                src_skel: res.src_skel,
                src_rest: res.src_rest,
                coeffs: res.coeffs,
                out_offset: offset,
            });
            offset += rank;
        }
        levels.push(InterpLevel {
            input_len,
            output_len: offset,
            blocks,
        });
        skels = next;
    }

    let row_ids = row_tree.level_ids(passes)?;
    let col_ids = col_tree.level_ids(start - passes)?;
    let jobs: Vec<(usize, usize)> = row_ids
        .iter()
        .flat_map(|&r| col_ids.iter().map(move |&c| (r, c)))
        .collect();
    let final_blocks = jobs
        .par_iter()
        .map(|&(r, c)| {
            let folder = row_tree.folder(r);
            let s = &skels[row_pos[r]][col_pos[c]];
            FinalBlock {
                row_folder: r,
                col_folder: c,
                row_offset: folder.offset(),
                src_offset: s.offset,
                b: k.submatrix(folder.members(), &s.cols),
            }
        })
        .collect();

    Ok(ButterflyFactorization {
        n_rows: m,
        n_cols: n,
        eps,
        block_cap,
        start_level: start,
        levels,
        final_blocks,
        row_perm,
        col_perm,
    })
}

impl<T: Scalar> ButterflyFactorization<T> {
    /// Number of merge passes after the initial skeletonization.
    pub fn passes(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }

    /// Stored floats (interpolation coefficients and final blocks) and ints
    /// (gather indices and both permutations).
    pub fn storage(&self) -> StorageCount {
        let mut floats = 0;
        let mut ints = self.n_rows + self.n_cols;
        for level in &self.levels {
            for b in &level.blocks {
                floats += b.coeffs.n_rows() * b.coeffs.n_cols();
                ints += b.src_skel.len() + b.src_rest.len();
            }
        }
        for b in &self.final_blocks {
            floats += b.b.n_rows() * b.b.n_cols();
        }
        StorageCount::new(floats, ints)
    }

    /// Largest interpolation rank over all blocks.
    pub fn max_rank(&self) -> usize {
        self.levels
            .iter()
            .flat_map(|l| l.blocks.iter().map(InterpBlock::rank))
            .max()
            .unwrap_or(0)
    }

    pub fn apply(&self, f: &[T]) -> Result<Vec<T>> {
        check_len("butterfly input", self.n_cols, f.len())?;
        let mut x = self.col_perm.apply(f)?;
        for level in &self.levels {
            let mut y = vec![T::zero(); level.output_len];
            for b in &level.blocks {
                for (i, &s) in b.src_skel.iter().enumerate() {
                    let mut acc = x[s];
                    for (&c, &t) in b.src_rest.iter().zip(b.coeffs.row(i)) {
                        acc += t * x[c];
                    }
                    y[b.out_offset + i] = acc;
                }
            }
            x = y;
        }
        let mut u = vec![T::zero(); self.n_rows];
        for fb in &self.final_blocks {
            let src = &x[fb.src_offset..fb.src_offset + fb.b.n_cols()];
            for (i, row) in fb.b.rows().enumerate() {
                let mut acc = T::zero();
                for (&a, &v) in row.iter().zip(src) {
                    acc += a * v;
                }
                u[fb.row_offset + i] += acc;
            }
        }
        self.row_perm.apply_inverse(&u)
    }

    /// Checks that every gather stays inside its input and that each block's
    /// skeleton and residual indices are disjoint. Sibling row folders read
    /// the same parent skeleton, so indices repeat across blocks.
    pub fn validate(&self) -> Result<()> {
        check_len("row permutation", self.n_rows, self.row_perm.len())?;
        check_len("column permutation", self.n_cols, self.col_perm.len())?;
        let mut input_len = self.n_cols;
        for (t, level) in self.levels.iter().enumerate() {
            check_len("level input", input_len, level.input_len)?;
            let mut out = 0;
            for b in &level.blocks {
                if b.out_offset != out {
                    return Err(Error::invalid(format!(
                        "level {t}: outputs are not contiguous"
                    )));
                }
                out += b.rank();
                if b.coeffs.shape() != (b.rank(), b.src_rest.len()) && b.rank() > 0 {
                    return Err(Error::invalid(format!(
                        "level {t}: coefficient shape mismatch"
                    )));
                }
                let mut idx: Vec<usize> = b.src_skel.iter().chain(&b.src_rest).copied().collect();
                idx.sort_unstable();
                idx.dedup();
                if idx.len() != b.src_skel.len() + b.src_rest.len() {
                    return Err(Error::invalid(format!(
                        "level {t}: block gathers an index twice"
                    )));
                }
                for &s in &idx {
                    if s >= input_len {
                        return Err(Error::invalid(format!(
                            "level {t}: gather index {s} out of range"
                        )));
                    }
                }
            }
            check_len("level output", out, level.output_len)?;
            input_len = out;
        }
        for fb in &self.final_blocks {
            if fb.src_offset + fb.b.n_cols() > input_len
                || fb.row_offset + fb.b.n_rows() > self.n_rows
            {
                return Err(Error::invalid("final block out of range"));
            }
        }
        Ok(())
    }

    /// Writes `metadata.json`, one `level_<t>.kmat` of concatenated
    /// coefficients per pass and `final.kmat` with the concatenated dense blocks.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let meta = Metadata {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            eps: self.eps,
            block_cap: self.block_cap,
            start_level: self.start_level,
            row_perm: self.row_perm.clone(),
            col_perm: self.col_perm.clone(),
            levels: self
                .levels
                .iter()
                .map(|l| LevelMeta {
                    input_len: l.input_len,
                    output_len: l.output_len,
                    blocks: l
                        .blocks
                        .iter()
                        .map(|b| BlockMeta {
                            row_folder: b.row_folder,
                            col_folder: b.col_folder,
                            src_skel: b.src_skel.clone(),
                            src_rest: b.src_rest.clone(),
                            out_offset: b.out_offset,
                        })
                        .collect(),
                })
                .collect(),
            final_blocks: self
                .final_blocks
                .iter()
                .map(|b| FinalMeta {
                    row_folder: b.row_folder,
                    col_folder: b.col_folder,
                    row_offset: b.row_offset,
                    src_offset: b.src_offset,
                    n_rows: b.b.n_rows(),
                    n_cols: b.b.n_cols(),
                })
                .collect(),
        };
        fs::write(dir.join("metadata.json"), serde_json::to_string(&meta)?)?;
        for (t, level) in self.levels.iter().enumerate() {
            let flat: Vec<T> = level
                .blocks
                .iter()
                .flat_map(|b| b.coeffs.data().iter().copied())
                .collect();
            write_kmat(
                dir.join(format!("level_{t}.kmat")),
                &DenseMatrix::from_parts(1, flat.len(), flat),
            )?;
        }
        let flat: Vec<T> = self
            .final_blocks
            .iter()
            .flat_map(|b| b.b.data().iter().copied())
            .collect();
        write_kmat(
            dir.join("final.kmat"),
            &DenseMatrix::from_parts(1, flat.len(), flat),
        )?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta_path = dir.join("metadata.json");
        if !meta_path.exists() {
            return Err(Error::MissingArtifact(meta_path));
        }
        let meta: Metadata = serde_json::from_str(&fs::read_to_string(&meta_path)?)?;
        let mut levels = Vec::with_capacity(meta.levels.len());
        for (t, lm) in meta.levels.into_iter().enumerate() {
            let flat = read_kmat::<T>(dir.join(format!("level_{t}.kmat")))?.into_data();
            let mut cursor = 0;
            let mut blocks = Vec::with_capacity(lm.blocks.len());
            for bm in lm.blocks {
                let (r, c) = (bm.src_skel.len(), bm.src_rest.len());
                let len = if r == 0 { 0 } else { r * c };
                let data = flat
                    .get(cursor..cursor + len)
                    .ok_or(Error::Truncated {
                        expected: cursor + len,
                        found: flat.len(),
                    })?
                    .to_vec();
                cursor += len;
                blocks.push(InterpBlock {
                    row_folder: bm.row_folder,
                    col_folder: bm.col_folder,
                    coeffs: DenseMatrix::from_parts(r, if r == 0 { 0 } else { c }, data),
                    src_skel: bm.src_skel,
                    src_rest: bm.src_rest,
                    out_offset: bm.out_offset,
                });
            }
            levels.push(InterpLevel {
                input_len: lm.input_len,
                output_len: lm.output_len,
                blocks,
            });
        }
        let flat = read_kmat::<T>(dir.join("final.kmat"))?.into_data();
        let mut cursor = 0;
        let mut final_blocks = Vec::with_capacity(meta.final_blocks.len());
        for fm in meta.final_blocks {
            let len = fm.n_rows * fm.n_cols;
            let data = flat
                .get(cursor..cursor + len)
                .ok_or(Error::Truncated {
                    expected: cursor + len,
                    found: flat.len(),
                })?
                .to_vec();
            cursor += len;
            final_blocks.push(FinalBlock {
                row_folder: fm.row_folder,
                col_folder: fm.col_folder,
                row_offset: fm.row_offset,
                src_offset: fm.src_offset,
                b: DenseMatrix::from_parts(fm.n_rows, fm.n_cols, data),
            });
        }
        let f = ButterflyFactorization {
            n_rows: meta.n_rows,
            n_cols: meta.n_cols,
            eps: meta.eps,
            block_cap: meta.block_cap,
            start_level: meta.start_level,
            levels,
            final_blocks,
            row_perm: meta.row_perm,
            col_perm: meta.col_perm,
        };
        f.validate()?;
        Ok(f)
    }
}

/// Fast product `F f`.
pub fn butterfly_apply<T: Scalar>(f: &ButterflyFactorization<T>, x: &[T]) -> Result<Vec<T>> {
    f.apply(x)
}

#[derive(Serialize, Deserialize)]
struct BlockMeta {
    row_folder: usize,
    col_folder: usize,
    src_skel: Vec<usize>,
    src_rest: Vec<usize>,
    out_offset: usize,
}

#[derive(Serialize, Deserialize)]
struct LevelMeta {
    input_len: usize,
    output_len: usize,
    blocks: Vec<BlockMeta>,
}

#[derive(Serialize, Deserialize)]
struct FinalMeta {
    row_folder: usize,
    col_folder: usize,
    row_offset: usize,
    src_offset: usize,
    n_rows: usize,
    n_cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    n_rows: usize,
    n_cols: usize,
    eps: f64,
    block_cap: usize,
    start_level: usize,
    row_perm: Permutation,
    col_perm: Permutation,
    levels: Vec<LevelMeta>,
    final_blocks: Vec<FinalMeta>,
}
