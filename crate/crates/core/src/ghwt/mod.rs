//! Walsh functions, the fast Walsh–Hadamard transform and the generalized
//! Haar–Walsh transform (GHWT) on a binary partition tree.
//!
//! Every folder at level `a` of a tree of depth `L` occupies a virtual slot
//! `v` of a complete binary tree and owns `2^(L-a)` tag positions, of which
//! exactly `|folder|` are occupied. Level `a` of the coefficient table is a
//! flat array of `2^L` entries, entry `v·2^(L-a) + tag`. A parent's tags
//! `2t, 2t+1` combine both children's tag `t`; a tag held by only one child is
//! copied to tag `2t`.

mod basis2d;

use crate::error::{Error, Result};
use crate::tree::PartitionTree;

pub use basis2d::{
    best_basis_2d, ghwt_apply, tensor_coefficients, threshold_compress, BestBasis, GhwtCompression,
    RetainedCoeff, TensorCoefficients, TileId, DEFAULT_COST_EXPONENT, MAX_TENSOR_ENTRIES,
};

/// Samples of the sequency-ordered Walsh function `W_n` on a grid of `len`
/// points, `len` a power of two.
pub fn walsh_function(n: usize, len: usize) -> Result<Vec<f64>> {
    if !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    if n >= len {
        return Err(Error::invalid(format!(
            "W_{n} needs a grid of more than {len} points"
        )));
    }
    if len == 1 {
        return Ok(vec![1.0]);
    }
    let half = walsh_function(n / 2, len / 2)?;
    let sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let second = if n % 2 == 0 { sign } else { -sign };
    Ok(half
        .iter()
        .copied()
        .chain(half.iter().map(|&x| second * x))
        .collect())
}

/// Orthonormal sequency-ordered Walsh–Hadamard transform. Self-inverse.
pub fn fwht(f: &[f64]) -> Result<Vec<f64>> {
    let n = f.len();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // Blocks of width `w`, each holding the coefficients of one segment.
    let mut cur = f.to_vec();
    let mut next = vec![0.0; n];
    let mut w = 1;
    while w < n {
        for block in 0..n / (2 * w) {
            let (c1, c2) = (block * 2 * w, block * 2 * w + w);
            for t in 0..w {
                let sigma = if t % 2 == 0 { 1.0 } else { -1.0 };
                let (x1, x2) = (cur[c1 + t], sigma * cur[c2 + t]);
                next[c1 + 2 * t] = s * (x1 + x2);
                next[c1 + 2 * t + 1] = s * (x1 - x2);
            }
        }
        std::mem::swap(&mut cur, &mut next);
        w *= 2;
    }
    Ok(cur)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Step {
    /// `dst[0] = m[0] x0 + m[1] x1`, `dst[1] = m[2] x0 + m[3] x1`.
    Pair {
        dst: [usize; 2],
        src: [usize; 2],
        m: [f64; 4],
    },
    Copy {
        dst: usize,
        src: usize,
    },
}

/// Precomputed GHWT structure of a partition tree with singleton leaves.
#[derive(Clone, Debug, PartialEq)]
pub struct GhwtLayout {
    n: usize,
    depth: usize,
    width: usize,
    leaf_slot: Vec<usize>,
    occupied: Vec<Vec<bool>>,
    steps: Vec<Vec<Step>>,
}

impl GhwtLayout {
    pub fn new(tree: &PartitionTree) -> Result<Self> {
        let depth = tree.depth();
        if depth >= usize::BITS as usize - 1 {
            return Err(Error::invalid("tree too deep for the GHWT layout"));
        }
        let width = 1usize << depth;
        let mut virt = vec![0usize; tree.num_folders()];
        for level in 0..depth {
            for &id in tree.level_ids(level)? {
                let children = tree.folder(id).children();
                if children.len() > 2 {
                    return Err(Error::invalid("GHWT requires a binary tree"));
                }
                for (i, &c) in children.iter().enumerate() {
                    virt[c] = 2 * virt[id] + i;
                }
            }
        }
        let mut leaf_slot = vec![0usize; tree.n()];
        let mut occupied = vec![vec![false; width]; depth + 1];
        for &id in tree.level_ids(depth)? {
            let folder = tree.folder(id);
            if folder.len() != 1 {
                return Err(Error::invalid(
                    "GHWT requires singleton leaves (leaf_max = 1)",
                ));
            }
            leaf_slot[folder.members()[0]] = virt[id];
            occupied[depth][virt[id]] = true;
        }
        let mut steps = vec![Vec::new(); depth];
        for a in (0..depth).rev() {
            let span = 1usize << (depth - a);
            let half = span / 2;
            let mut level_steps = Vec::new();
            for &id in tree.level_ids(a)? {
                let base = virt[id] * span;
                let children = tree.folder(id).children();
                let c1 = virt[children[0]] * half;
                let c2 = children
                    .get(1)
                    .map(|&c| (virt[c] * half, tree.folder(c).len()));
                for t in 0..half {
                    let o1 = occupied[a + 1][c1 + t];
                    let o2 = c2.map(|(c, _)| occupied[a + 1][c + t]).unwrap_or(false);
                    let (d0, d1) = (base + 2 * t, base + 2 * t + 1);
                    match (o1, o2) {
                        (true, true) => {
                            let (c2pos, s2) = c2.expect("second child");
                            let m = if t == 0 {
                                let s1 = tree.folder(children[0]).len() as f64;
                                let s2 = s2 as f64;
                                let norm = (s1 + s2).sqrt();
                                [
                                    s1.sqrt() / norm,
                                    s2.sqrt() / norm,
                                    s2.sqrt() / norm,
                                    -s1.sqrt() / norm,
                                ]
                            } else {
                                let r = std::f64::consts::FRAC_1_SQRT_2;
                                let sigma = if t % 2 == 0 { r } else { -r };
                                [r, sigma, r, -sigma]
                            };
                            level_steps.push(Step::Pair {
                                dst: [d0, d1],
                                src: [c1 + t, c2pos + t],
                                m,
                            });
                            occupied[a][d0] = true;
                            occupied[a][d1] = true;
                        }
                        (true, false) => {
                            level_steps.push(Step::Copy {
                                dst: d0,
                                src: c1 + t,
                            });
                            occupied[a][d0] = true;
                        }
                        (false, true) => {
                            let (c2pos, _) = c2.expect("second child");
                            level_steps.push(Step::Copy {
                                dst: d0,
                                src: c2pos + t,
                            });
                            occupied[a][d0] = true;
                        }
                        (false, false) => {}
                    }
                }
            }
            steps[a] = level_steps;
        }
        Ok(GhwtLayout {
            n: tree.n(),
            depth,
            width,
            leaf_slot,
            occupied,
            steps,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Entries per level, `2^depth`.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Length of a full coefficient table, `(depth + 1)·width`.
    pub fn table_len(&self) -> usize {
        (self.depth + 1) * self.width
    }

    pub fn is_occupied(&self, level: usize, slot: usize) -> bool {
        self.occupied[level][slot]
    }

    /// Full coefficient table of `f`: level `a` occupies
    /// `table[a·width..(a+1)·width]`.
    pub fn analyze_into(&self, f: &[f64], table: &mut [f64]) {
        debug_assert_eq!(table.len(), self.table_len());
        let w = self.width;
        table.iter_mut().for_each(|x| *x = 0.0);
        let leaves = &mut table[self.depth * w..];
        for (i, &x) in f.iter().enumerate() {
            leaves[self.leaf_slot[i]] = x;
        }
        for a in (0..self.depth).rev() {
            let (upper, lower) = table.split_at_mut((a + 1) * w);
            let dst = &mut upper[a * w..];
            let src = &lower[..w];
            for step in &self.steps[a] {
                match *step {
                    Step::Pair { dst: d, src: s, m } => {
                        let (x0, x1) = (src[s[0]], src[s[1]]);
                        dst[d[0]] = m[0] * x0 + m[1] * x1;
                        dst[d[1]] = m[2] * x0 + m[3] * x1;
                    }
                    Step::Copy { dst: d, src: s } => dst[d] = src[s],
                }
            }
        }
    }

    pub fn analyze(&self, f: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len("GHWT input", self.n, f.len())?;
        let mut table = vec![0.0; self.table_len()];
        self.analyze_into(f, &mut table);
        Ok(table)
    }

    /// Sums `Σ_a Σ_slot table[a][slot]·atom(a, slot)`: the adjoint of
    /// [`analyze`](Self::analyze) restricted to occupied entries.
    pub fn synthesize(&self, table: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len("GHWT table", self.table_len(), table.len())?;
        let w = self.width;
        let mut acc = table[..w].to_vec();
        for a in 0..self.depth {
            let mut next = table[(a + 1) * w..(a + 2) * w].to_vec();
            for step in &self.steps[a] {
                match *step {
                    Step::Pair { dst: d, src: s, m } => {
                        let (y0, y1) = (acc[d[0]], acc[d[1]]);
                        next[s[0]] += m[0] * y0 + m[2] * y1;
                        next[s[1]] += m[1] * y0 + m[3] * y1;
                    }
                    Step::Copy { dst: d, src: s } => next[s] += acc[d],
                }
            }
            acc = next;
        }
        Ok(self.leaf_slot.iter().map(|&s| acc[s]).collect())
    }

    /// The atom at `(level, slot)` as a vector over the points.
    pub fn atom(&self, level: usize, slot: usize) -> Result<Vec<f64>> {
        if level > self.depth {
            return Err(Error::LevelOutOfRange {
                level,
                depth: self.depth,
            });
        }
        let mut table = vec![0.0; self.table_len()];
        if self.occupied[level][slot] {
            table[level * self.width + slot] = 1.0;
        }
        self.synthesize(&table)
    }
}

/// GHWT coefficients of one vector over a tree.
#[derive(Clone, Debug, PartialEq)]
pub struct GhwtDictionary {
    pub layout: GhwtLayout,
    pub table: Vec<f64>,
}

impl GhwtDictionary {
    /// Coefficient of the atom at `level`, virtual folder `folder`, tag `tag`.
    pub fn coefficient(&self, level: usize, folder: usize, tag: usize) -> f64 {
        let span = 1usize << (self.layout.depth - level);
        self.table[level * self.layout.width + folder * span + tag]
    }

    pub fn level(&self, level: usize) -> &[f64] {
        let w = self.layout.width;
        &self.table[level * w..(level + 1) * w]
    }
}

pub fn ghwt_analyze(f: &[f64], tree: &PartitionTree) -> Result<GhwtDictionary> {
    let layout = GhwtLayout::new(tree)?;
    let table = layout.analyze(f)?;
    Ok(GhwtDictionary { layout, table })
}

/// Inverse of [`ghwt_analyze`] from the coefficients of a single level.
pub fn ghwt_synthesize_level(dict: &GhwtDictionary, level: usize) -> Result<Vec<f64>> {
    let l = &dict.layout;
    if level > l.depth {
        return Err(Error::LevelOutOfRange {
            level,
            depth: l.depth,
        });
    }
    let mut table = vec![0.0; l.table_len()];
    table[level * l.width..(level + 1) * l.width].copy_from_slice(dict.level(level));
    l.synthesize(&table)
}
