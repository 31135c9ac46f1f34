//! Multiscale partition trees built by recursive spectral bipartition.
//!
//! Folders are stored in an arena. Every folder lists its members in leaf
//! order, so each folder occupies a contiguous range of the tree's
//! `leaf_order`. A folder that is not split at some level is carried down as a
//! single (unary) child, so every level partitions the whole index set and all
//! leaves sit at the deepest level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{fiedler_vector, landmark_fiedler, AffinityMatrix};
use crate::perm::Permutation;
use crate::rng::SeededRng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Children are the nonnegative and negative Fiedler entries.
    Sign,
    /// Children are the upper and lower halves of the Fiedler ordering.
    Median,
}

#[derive(Clone, Copy, Debug)]
pub struct TreeOptions {
    pub mode: SplitMode,
    /// Folders of at most this many points are not split.
    pub leaf_max: usize,
    /// Seeds landmark selection for large folders.
    pub seed: u64,
    /// Folders larger than this use the landmark Fiedler approximation.
    pub landmark_threshold: usize,
}

impl Default for TreeOptions {
    fn default() -> Self {
        TreeOptions {
            mode: SplitMode::Median,
            leaf_max: 1,
            seed: 0,
            landmark_threshold: 4096,
        }
    }
}

impl TreeOptions {
    pub fn median(leaf_max: usize) -> Self {
        TreeOptions {
            leaf_max,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Folder {
    level: usize,
    members: Vec<usize>,
    parent: Option<usize>,
    children: Vec<usize>,
    offset: usize,
}

impl Folder {
    #[inline]
    pub fn level(&self) -> usize {
        self.level
    }

    /// Member indices in leaf order.
    #[inline]
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.members.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    #[inline]
    pub fn parent(&self) -> Option<usize> {
        self.parent
    }

    #[inline]
    pub fn children(&self) -> &[usize] {
        &self.children
    }

    /// Position of the first member in the tree's leaf order.
    #[inline]
    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Range of this folder within the leaf order.
    #[inline]
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.members.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionTree {
    n: usize,
    nodes: Vec<Folder>,
    levels: Vec<Vec<usize>>,
    leaf_order: Permutation,
}

#[derive(Serialize, Deserialize)]
struct FolderJson {
    level: usize,
    k: usize,
    members: Vec<usize>,
    children: Vec<FolderJson>,
}

impl PartitionTree {
    fn with_root(members: Vec<usize>) -> Self {
        let n = members.len();
        PartitionTree {
            n,
            nodes: vec![Folder {
                level: 0,
                members,
                parent: None,
                children: Vec::new(),
                offset: 0,
            }],
            levels: vec![vec![0]],
            leaf_order: Permutation::identity(n),
        }
    }

    fn push_child(&mut self, parent: usize, members: Vec<usize>) -> usize {
        let id = self.nodes.len();
        let level = self.nodes[parent].level + 1;
        self.nodes.push(Folder {
            level,
            members,
            parent: Some(parent),
            children: Vec::new(),
            offset: 0,
        });
        self.nodes[parent].children.push(id);
        id
    }

    /// Grows one level below the current deepest one with `split` choosing the
    /// children of each folder (`None` carries the folder down unchanged).
    /// Returns false, leaving the tree unchanged, when no folder splits.
    fn grow<F>(&mut self, mut split: F) -> Result<bool>
    where
        F: FnMut(&Folder) -> Result<Option<(Vec<usize>, Vec<usize>)>>,
    {
        let last = self.levels.last().expect("root level").clone();
        let mut plans = Vec::with_capacity(last.len());
        for &id in &last {
            plans.push(split(&self.nodes[id])?);
        }
        if plans.iter().all(Option::is_none) {
            return Ok(false);
        }
        let mut next = Vec::with_capacity(2 * last.len());
        for (&id, plan) in last.iter().zip(plans) {
            match plan {
                Some((left, right)) => {
                    next.push(self.push_child(id, left));
                    next.push(self.push_child(id, right));
                }
                None => {
                    let members = self.nodes[id].members.clone();
                    next.push(self.push_child(id, members));
                }
            }
        }
        self.levels.push(next);
        Ok(true)
    }

    /// Recursive spectral bipartition of `{0, …, n-1}` under the affinity `w`.
    pub fn build<T: Scalar>(w: &AffinityMatrix<T>, opts: TreeOptions) -> Result<Self> {
        let n = w.n();
        if n == 0 {
            return Err(Error::EmptySet);
        }
        if opts.leaf_max == 0 {
            return Err(Error::invalid("leaf_max must be at least 1"));
        }
        let mut tree = Self::with_root((0..n).collect());
        let root_rng = SeededRng::new(opts.seed);
        let mut counter = 0u64;
        loop {
            let grew = tree.grow(|f| {
                if f.len() <= opts.leaf_max {
                    return Ok(None);
                }
                counter += 1;
                let mut rng = root_rng.split(counter);
                split_folder(w, f.members(), opts, &mut rng).map(Some)
            })?;
            if !grew {
                break;
            }
        }
        tree.relayout();
        Ok(tree)
    }

    /// Balanced binary tree over `0..n` in index order (left child takes the
    /// larger half), matching the shape of a median-mode tree.
    pub fn dyadic(n: usize, leaf_max: usize) -> Result<Self> {
        Self::balanced_over(&Permutation::identity(n), leaf_max)
    }

    /// Balanced binary tree whose leaf order is `order`.
    pub fn balanced_over(order: &Permutation, leaf_max: usize) -> Result<Self> {
        let n = order.len();
        if n == 0 {
            return Err(Error::EmptySet);
        }
        if leaf_max == 0 {
            return Err(Error::invalid("leaf_max must be at least 1"));
        }
        let mut tree = Self::with_root(order.as_slice().to_vec());
        while tree.grow(|f| {
            Ok((f.len() > leaf_max).then(|| {
                let h = f.len().div_ceil(2);
                (f.members[..h].to_vec(), f.members[h..].to_vec())
            }))
        })? {}
        tree.relayout();
        Ok(tree)
    }

    /// Recomputes level lists, member ordering, offsets and the leaf order
    /// from the child lists.
    pub(crate) fn relayout(&mut self) {
        let depth = self.levels.len() - 1;
        let mut levels = vec![vec![0usize]];
        for l in 0..depth {
            let next: Vec<usize> = levels[l]
                .iter()
                .flat_map(|&id| self.nodes[id].children.iter().copied())
                .collect();
            levels.push(next);
        }
        let leaves: Vec<usize> = levels[depth]
            .iter()
            .flat_map(|&id| self.nodes[id].members.iter().copied())
            .collect();
        for l in (0..depth).rev() {
            for &id in &levels[l] {
                let members: Vec<usize> = self.nodes[id]
                    .children
                    .iter()
                    .flat_map(|&c| self.nodes[c].members.iter().copied())
                    .collect();
                self.nodes[id].members = members;
            }
        }
        for level in &levels {
            let mut off = 0;
            for &id in level {
                self.nodes[id].offset = off;
                off += self.nodes[id].members.len();
            }
        }
        self.levels = levels;
        self.leaf_order = Permutation::new(leaves).expect("leaves partition the index set");
    }

    /// Exchanges the two children of a binary folder. Call [`relayout`] after
    /// a batch of swaps.
    pub(crate) fn swap_children(&mut self, id: usize) {
        let c = &mut self.nodes[id].children;
        if c.len() == 2 {
            c.swap(0, 1);
        }
    }

    /// Number of indexed points.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Index `L` of the deepest level.
    #[inline]
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    #[inline]
    pub fn root(&self) -> usize {
        0
    }

    #[inline]
    pub fn folder(&self, id: usize) -> &Folder {
        &self.nodes[id]
    }

    #[inline]
    pub fn num_folders(&self) -> usize {
        self.nodes.len()
    }

    /// Folder ids at `level`, left to right.
    pub fn level_ids(&self, level: usize) -> Result<&[usize]> {
        self.levels
            .get(level)
            .map(Vec::as_slice)
            .ok_or(Error::LevelOutOfRange {
                level,
                depth: self.depth(),
            })
    }

    pub fn folders_at_level(&self, level: usize) -> Result<Vec<&Folder>> {
        Ok(self
            .level_ids(level)?
            .iter()
            .map(|&id| &self.nodes[id])
            .collect())
    }

    /// Deepest-level folders, left to right.
    pub fn leaf_folders(&self) -> Vec<&Folder> {
        self.levels[self.depth()]
            .iter()
            .map(|&id| &self.nodes[id])
            .collect()
    }

    /// Concatenation of the leaf folders, left to right.
    #[inline]
    pub fn leaf_order(&self) -> &Permutation {
        &self.leaf_order
    }

    /// True for a folder carried down unchanged from its parent.
    #[inline]
    pub fn is_carried(&self, id: usize) -> bool {
        self.nodes[id]
            .parent
            .is_some_and(|p| self.nodes[p].children.len() == 1)
    }

    /// Largest folder size at `level`.
    pub fn max_folder_size(&self, level: usize) -> Result<usize> {
        Ok(self
            .level_ids(level)?
            .iter()
            .map(|&id| self.nodes[id].len())
            .max()
            .unwrap_or(0))
    }

    /// All folders grouped by level as sets of members; invariant under
    /// reordering of siblings.
    pub fn folder_sets(&self) -> Vec<Vec<Vec<usize>>> {
        self.levels
            .iter()
            .map(|lv| {
                let mut sets: Vec<Vec<usize>> = lv
                    .iter()
                    .map(|&id| {
                        let mut m = self.nodes[id].members.clone();
                        m.sort_unstable();
                        m
                    })
                    .collect();
                sets.sort();
                sets
            })
            .collect()
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(format!("invalid tree: {msg}")));
        if self.nodes[0].members.len() != self.n {
            return bad("root does not hold every index".into());
        }
        for (l, level) in self.levels.iter().enumerate() {
            let mut seen = vec![false; self.n];
            for &id in level {
                let f = &self.nodes[id];
                if f.level != l {
                    return bad(format!("folder {id} has level {} but sits at {l}", f.level));
                }
                if f.members.is_empty() {
                    return bad(format!("folder {id} is empty"));
                }
                for &m in &f.members {
                    if m >= self.n || seen[m] {
                        return bad(format!("index {m} repeated or out of range at level {l}"));
                    }
                    seen[m] = true;
                }
                if l < self.depth() {
                    if f.children.is_empty() || f.children.len() > 2 {
                        return bad(format!("folder {id} has {} children", f.children.len()));
                    }
                    let mut union: Vec<usize> = f
                        .children
                        .iter()
                        .flat_map(|&c| self.nodes[c].members.iter().copied())
                        .collect();
                    let mut own = f.members.clone();
                    union.sort_unstable();
                    own.sort_unstable();
                    if union != own {
                        return bad(format!(
                            "folder {id} differs from the union of its children"
                        ));
                    }
                } else if !f.children.is_empty() {
                    return bad(format!("leaf {id} has children"));
                }
            }
            if seen.iter().any(|&s| !s) {
                return bad(format!("level {l} does not cover every index"));
            }
        }
        let leaves: Vec<usize> = self
            .leaf_folders()
            .iter()
            .flat_map(|f| f.members.iter().copied())
            .collect();
        if leaves != self.leaf_order.as_slice() {
            return bad("leaf order is not the concatenation of leaves".into());
        }
        Ok(())
    }

    fn to_json_node(&self, id: usize, pos: &[usize]) -> FolderJson {
        let f = &self.nodes[id];
        FolderJson {
            level: f.level,
            k: pos[id],
            members: f.members.clone(),
            children: f
                .children
                .iter()
                .map(|&c| self.to_json_node(c, pos))
                .collect(),
        }
    }

    /// Nested JSON: `{level, k, members, children: [...]}`.
    pub fn to_json(&self) -> Result<String> {
        let mut pos = vec![0; self.nodes.len()];
        for level in &self.levels {
            for (k, &id) in level.iter().enumerate() {
                pos[id] = k;
            }
        }
        Ok(serde_json::to_string(&self.to_json_node(0, &pos))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let root: FolderJson = serde_json::from_str(s)?;
        let mut tree = Self::with_root(root.members.clone());
        let mut frontier = vec![(0usize, &root)];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            let mut ids = Vec::new();
            for (id, node) in frontier {
                for c in &node.children {
                    let cid = tree.push_child(id, c.members.clone());
                    ids.push(cid);
                    next.push((cid, c));
                }
            }
            if !ids.is_empty() {
                tree.levels.push(ids);
            }
            frontier = next;
        }
        let n = tree.n;
        if let Some(&bad) = tree.nodes[0].members.iter().find(|&&m| m >= n) {
            return Err(Error::invalid(format!("tree member {bad} out of range")));
        }
        let mut seen = vec![false; n];
        for &m in &tree.nodes[0].members {
            if std::mem::replace(&mut seen[m], true) {
                return Err(Error::invalid(format!("tree member {m} repeated")));
            }
        }
        let leaf_ids = tree.levels.last().cloned().unwrap_or_default();
        if leaf_ids
            .iter()
            .any(|&id| !tree.nodes[id].children.is_empty())
            || tree
                .nodes
                .iter()
                .any(|f| f.children.is_empty() && f.level != tree.levels.len() - 1)
        {
            return Err(Error::invalid("all leaves must sit at the deepest level"));
        }
        tree.relayout();
        tree.validate()?;
        Ok(tree)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Spectral bipartition helper for [`PartitionTree::build`].
pub fn build_tree<T: Scalar>(
    w: &AffinityMatrix<T>,
    mode: SplitMode,
    leaf_max: usize,
) -> Result<PartitionTree> {
    PartitionTree::build(
        w,
        TreeOptions {
            mode,
            leaf_max,
            ..TreeOptions::default()
        },
    )
}

fn split_folder<T: Scalar>(
    w: &AffinityMatrix<T>,
    members: &[usize],
    opts: TreeOptions,
    rng: &mut SeededRng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = members.len();
    if n == 2 {
        return Ok((vec![members[0]], vec![members[1]]));
    }
    let fiedler: Vec<f64> = if n > opts.landmark_threshold {
        let m = ((n as f64).sqrt().floor() as usize).max(2);
        let picks = rng.sample_indices(n, m);
        let cols: Vec<usize> = picks.iter().map(|&p| members[p]).collect();
        let cross = w.matrix().submatrix(members, &cols);
        landmark_fiedler(&cross, &picks)?
    } else {
        fiedler_vector(&w.restrict(members))?
    }
    .into_iter()
    .map(Scalar::as_f64)
    .collect();

    // Descending Fiedler value, ties to the lower original index.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        fiedler[b]
            .total_cmp(&fiedler[a])
            .then(members[a].cmp(&members[b]))
    });
    let median_split = |order: &[usize]| {
        let h = n.div_ceil(2);
        let pick = |s: &[usize]| {
            let mut v: Vec<usize> = s.iter().map(|&i| members[i]).collect();
            v.sort_unstable();
            v
        };
        (pick(&order[..h]), pick(&order[h..]))
    };
    match opts.mode {
        SplitMode::Median => Ok(median_split(&order)),
        SplitMode::Sign => {
            let left: Vec<usize> = (0..n)
                .filter(|&i| fiedler[i] >= 0.0)
                .map(|i| members[i])
                .collect();
            let right: Vec<usize> = (0..n)
                .filter(|&i| fiedler[i] < 0.0)
                .map(|i| members[i])
                .collect();
            if left.is_empty() || right.is_empty() {
                Ok(median_split(&order))
            } else {
                Ok((left, right))
            }
        }
    }
}
