//! End-to-end geometry-adaptive compression: learn coupled trees, order them
//! along space-filling curves, compress, and report storage, timing and
//! accuracy against the dense product.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::accounting::StorageCount;
use crate::butterfly::{butterfly_factor, ButterflyFactorization, DEFAULT_EPS};
use crate::error::{Error, Result};
use crate::ghwt::{
    best_basis_2d, threshold_compress, BestBasis, GhwtCompression, DEFAULT_COST_EXPONENT,
};
use crate::graph::{
    cosine_affinity_columns, diffusion_embedding, gaussian_affinity, AffinityMatrix, Bandwidth,
};
use crate::io::{format_f64, read_kmat, write_kmat};
use crate::kernels::{
    generate, shuffle_variants, Family, Kernel, KernelSidecar, KernelSpec, ShuffledKernel,
};
use crate::matrix::DenseMatrix;
use crate::perm::Permutation;
use crate::questionnaire::{run_questionnaire, Axis, QuestionnaireOptions};
use crate::rng::SeededRng;
use crate::sfc::{curve_path_csv, order_tree};
use crate::tree::PartitionTree;
use crate::treeaffinity::{Metric, TreeWeightParams};

/// Default eGHWT threshold.
pub const DEFAULT_GHWT_EPS: f64 = 5e-2;
pub const DEFAULT_TRIALS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Butterfly,
    Eghwt,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "butterfly" => Ok(Method::Butterfly),
            "eghwt" | "ghwt" => Ok(Method::Eghwt),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Butterfly => "butterfly",
            Method::Eghwt => "eghwt",
        })
    }
}

impl Method {
    pub fn default_eps(self) -> f64 {
        match self {
            Method::Butterfly => DEFAULT_EPS,
            Method::Eghwt => DEFAULT_GHWT_EPS,
        }
    }
}

/// Largest column block at the first butterfly level for each family.
pub fn default_block_cap(family: Family) -> usize {
    match family {
        Family::Sine => 32,
        Family::Acoustic => 16,
        Family::Spherical => 128,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub metric: Metric,
    pub params: TreeWeightParams,
    pub max_iters: usize,
    pub method: Method,
    pub eps: f64,
    pub block_cap: usize,
    pub cost_exponent: f64,
    pub trials: usize,
    pub timing_repeats: usize,
    pub include_natural: bool,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(kernel: KernelSpec, method: Method) -> Self {
        RunConfig {
            kernel,
            metric: Metric::Corr,
            params: TreeWeightParams::default(),
            max_iters: 3,
            method,
            eps: method.default_eps(),
            block_cap: default_block_cap(kernel.family),
            cost_exponent: DEFAULT_COST_EXPONENT,
            trials: DEFAULT_TRIALS,
            timing_repeats: 5,
            include_natural: true,
            seed: kernel.seed,
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.params.validate()?;
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid(format!(
                "eps must lie in (0, 1), got {}",
                self.eps
            )));
        }
        if self.trials == 0 || self.timing_repeats == 0 || self.max_iters == 0 {
            return Err(Error::invalid(
                "trials, timing repeats and iterations must be positive",
            ));
        }
        Ok(())
    }
}

/// Compressed kernel from either backend.
#[derive(Clone, Debug)]
pub enum Compressed {
    Butterfly(ButterflyFactorization<f64>),
    Ghwt(GhwtCompression),
}

impl Compressed {
    pub fn storage(&self) -> StorageCount {
        match self {
            Compressed::Butterfly(f) => f.storage(),
            Compressed::Ghwt(c) => c.storage(),
        }
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        match self {
            Compressed::Butterfly(b) => b.apply(f),
            Compressed::Ghwt(c) => c.apply(f),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            Compressed::Butterfly(_) => Method::Butterfly,
            Compressed::Ghwt(_) => Method::Eghwt,
        }
    }

    pub fn save(
        &self,
        dir: impl AsRef<Path>,
        row_tree: &PartitionTree,
        col_tree: &PartitionTree,
    ) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("method.txt"), self.method().to_string())?;
        match self {
            Compressed::Butterfly(f) => f.save(dir),
            Compressed::Ghwt(c) => c.save(dir, row_tree, col_tree),
        }
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let tag = dir.join("method.txt");
        if !tag.exists() {
            return Err(Error::MissingArtifact(tag));
        }
        match fs::read_to_string(&tag)?.trim().parse::<Method>()? {
            Method::Butterfly => Ok(Compressed::Butterfly(ButterflyFactorization::load(dir)?)),
            Method::Eghwt => Ok(Compressed::Ghwt(GhwtCompression::load(dir)?)),
        }
    }
}

/// Compresses `k` with rows organized by `row_tree` and columns by `col_tree`.
pub fn compress(
    k: &DenseMatrix<f64>,
    row_tree: &PartitionTree,
    col_tree: &PartitionTree,
    method: Method,
    eps: f64,
    block_cap: usize,
    cost_exponent: f64,
) -> Result<Compressed> {
    match method {
        Method::Butterfly => Ok(Compressed::Butterfly(
            butterfly_factor(k, row_tree, col_tree, eps, block_cap)
                .map_err(|e| e.in_stage("butterfly"))?,
        )),
        Method::Eghwt => {
            let basis = best_basis_2d(k, row_tree, col_tree, cost_exponent)
                .map_err(|e| e.in_stage("best basis"))?;
            Ok(Compressed::Ghwt(threshold_compress(&basis, eps)?))
        }
    }
}

/// Where the initial affinity of the coupled-geometry iteration comes from.
#[derive(Clone, Debug)]
pub enum InitialAffinity {
    /// Cosine similarity of the columns.
    CosineColumns,
    /// Gaussian affinity (median bandwidth) of row coordinates.
    GaussianRows(DenseMatrix<f64>),
}

/// Learned trees ordered along space-filling curves.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub row_tree: PartitionTree,
    pub col_tree: PartitionTree,
    pub row_affinity: AffinityMatrix<f64>,
    pub col_affinity: AffinityMatrix<f64>,
    pub row_order: Permutation,
    pub col_order: Permutation,
    pub iterations_run: usize,
}

/// Coupled trees and final dual affinities from the questionnaire. The leaf
/// orders are those of the trees as built.
pub fn coupled_geometry(
    k: &DenseMatrix<f64>,
    init: &InitialAffinity,
    metric: Metric,
    params: TreeWeightParams,
    max_iters: usize,
    seed: u64,
) -> Result<Geometry> {
    let (w, axis) = match init {
        InitialAffinity::CosineColumns => (cosine_affinity_columns(k), Axis::Cols),
        InitialAffinity::GaussianRows(p) => (gaussian_affinity(p, Bandwidth::Median), Axis::Rows),
    };
    let w = w.map_err(|e| e.in_stage("initial affinity"))?;
    let opts = QuestionnaireOptions {
        metric,
        params,
        max_iters,
        init_axis: axis,
        seed,
        ..Default::default()
    };
    let g = run_questionnaire(k, &w, &opts).map_err(|e| e.in_stage("questionnaire"))?;
    Ok(Geometry {
        row_order: g.row_tree.leaf_order().clone(),
        col_order: g.col_tree.leaf_order().clone(),
        row_tree: g.row_tree,
        col_tree: g.col_tree,
        row_affinity: g.row_affinity,
        col_affinity: g.col_affinity,
        iterations_run: g.iterations_run,
    })
}

/// Reorients both trees along space-filling curves of their affinities.
pub fn orient_geometry(g: Geometry) -> Result<Geometry> {
    let (row_tree, row_order) =
        order_tree(&g.row_tree, &g.row_affinity).map_err(|e| e.in_stage("row ordering"))?;
    let (col_tree, col_order) =
        order_tree(&g.col_tree, &g.col_affinity).map_err(|e| e.in_stage("column ordering"))?;
    Ok(Geometry {
        row_tree,
        col_tree,
        row_order,
        col_order,
        ..g
    })
}

/// [`coupled_geometry`] followed by [`orient_geometry`].
pub fn learn_geometry(
    k: &DenseMatrix<f64>,
    init: &InitialAffinity,
    metric: Metric,
    params: TreeWeightParams,
    max_iters: usize,
    seed: u64,
) -> Result<Geometry> {
    orient_geometry(coupled_geometry(k, init, metric, params, max_iters, seed)?)
}

/// Mean of `‖Kf - K̂f‖ / ‖Kf‖` over `trials` vectors uniform in `[0, 1]`.
/// Trials with `Kf = 0` are skipped.
pub fn measure_error(
    k: &DenseMatrix<f64>,
    apply: impl Fn(&[f64]) -> Result<Vec<f64>>,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    let mut rng = SeededRng::new(seed);
    let (mut sum, mut used) = (0.0, 0usize);
    for t in 0..trials {
        let f = rng.uniform_vec(k.n_cols());
        let exact = k.matvec(&f)?;
        let approx = apply(&f)?;
        crate::error::check_len("approximate product", exact.len(), approx.len())?;
        let den = exact.iter().map(|x| x * x).sum::<f64>().sqrt();
        if den == 0.0 {
            log::warn!("trial {t}: Kf = 0, skipped");
            continue;
        }
        let num = exact
            .iter()
            .zip(&approx)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        sum += num / den;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Degenerate("Kf vanished in every trial".into()));
    }
    Ok(sum / used as f64)
}

/// Median wall-clock seconds of `repeats` calls.
pub fn median_seconds<R>(repeats: usize, mut run: impl FnMut() -> R) -> f64 {
    let mut times: Vec<f64> = (0..repeats.max(1))
        .map(|_| {
            let start = Instant::now();
            std::hint::black_box(run());
            start.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let n = times.len();
    if n % 2 == 1 {
        times[n / 2]
    } else {
        0.5 * (times[n / 2 - 1] + times[n / 2])
    }
}

/// Row and column orders putting an emitted kernel in its natural layout:
/// frequencies and sorted samples (sine), generation order (acoustic,
/// spherical).
pub fn natural_orders(kernel: &Kernel) -> (Permutation, Permutation) {
    let labels =
        |l: &[usize]| Permutation::argsort(&l.iter().map(|&x| x as f64).collect::<Vec<_>>());
    match kernel.spec.family {
        Family::Sine => (
            Permutation::identity(kernel.matrix.n_rows()),
            Permutation::argsort(&kernel.col_points.iter().map(|p| p[0]).collect::<Vec<_>>()),
        ),
        _ => (labels(&kernel.row_labels), labels(&kernel.col_labels)),
    }
}

/// Initial affinity for a family, for rows given by `row_perm` of the
/// emitted kernel.
pub fn initial_affinity(kernel: &Kernel, row_perm: &Permutation) -> Result<InitialAffinity> {
    match kernel.spec.family {
        Family::Acoustic => {
            let pts: Vec<Vec<f64>> = row_perm
                .as_slice()
                .iter()
                .map(|&i| kernel.row_points[i].clone())
                .collect();
            Ok(InitialAffinity::GaussianRows(DenseMatrix::from_rows(&pts)?))
        }
        _ => Ok(InitialAffinity::CosineColumns),
    }
}

/// Storage, timing and accuracy of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub family: Family,
    pub n: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    pub method: Method,
    pub eps: f64,
    pub seed: u64,
    pub trial_count: usize,
    pub matrix_mb: f64,
    pub compressed_mb_permuted: f64,
    pub compressed_mb_reorganized: f64,
    pub compressed_mb_natural: Option<f64>,
    pub stored_bytes_permuted: u64,
    pub stored_bytes_reorganized: u64,
    pub stored_bytes_natural: Option<u64>,
    pub relative_l2_error: f64,
    pub relative_l2_error_permuted: f64,
    pub iterations_run: usize,
    pub direct_seconds: f64,
    pub fast_seconds: f64,
}

impl CompressionReport {
    /// The report with wall-clock fields zeroed.
    pub fn without_timing(&self) -> Self {
        CompressionReport {
            direct_seconds: 0.0,
            fast_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// Everything produced by [`run_factorization`].
pub struct RunOutput {
    pub report: CompressionReport,
    pub kernel: Kernel,
    pub shuffle: ShuffledKernel,
    pub geometry: Geometry,
    pub reorganized: Compressed,
    pub permuted: Compressed,
}

#[derive(Serialize, Deserialize)]
struct Orders {
    row: Permutation,
    col: Permutation,
}

/// Generates the kernel, shuffles it, compresses the shuffled matrix in index
/// order (permuted) and after learning its geometry (reorganized), optionally
/// compresses the natural layout, and measures the reorganized product.
/// Artifacts are written when `cfg.out_dir` is set.
pub fn run_factorization(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let kernel = generate(&cfg.kernel).map_err(|e| e.in_stage("kernel"))?;
    let shuffle = shuffle_variants(&kernel.matrix, cfg.seed.wrapping_add(1))?;
    let kp = &shuffle.permuted;
    let (m, n) = kp.shape();
    let comp = |row_tree: &PartitionTree, col_tree: &PartitionTree| {
        compress(
            kp,
            row_tree,
            col_tree,
            cfg.method,
            cfg.eps,
            cfg.block_cap,
            cfg.cost_exponent,
        )
    };

    let (pr, pc) = (PartitionTree::dyadic(m, 1)?, PartitionTree::dyadic(n, 1)?);
    let permuted = comp(&pr, &pc).map_err(|e| e.in_stage("permuted"))?;

    let init = initial_affinity(&kernel, &shuffle.row_perm)?;
    let geometry = learn_geometry(kp, &init, cfg.metric, cfg.params, cfg.max_iters, cfg.seed)?;
    let reorganized =
        comp(&geometry.row_tree, &geometry.col_tree).map_err(|e| e.in_stage("reorganized"))?;

    let natural = if cfg.include_natural {
        let (nr, nc) = natural_orders(&kernel);
        let (nr, nc) = (
            nr.then(&shuffle.row_perm.inverse())?,
            nc.then(&shuffle.col_perm.inverse())?,
        );
        let t = (
            PartitionTree::balanced_over(&nr, 1)?,
            PartitionTree::balanced_over(&nc, 1)?,
        );
        Some(
            comp(&t.0, &t.1)
                .map_err(|e| e.in_stage("natural"))?
                .storage(),
        )
    } else {
        None
    };

    let error = measure_error(kp, |f| reorganized.apply(f), cfg.trials, cfg.seed)
        .map_err(|e| e.in_stage("error"))?;
    let error_permuted = measure_error(kp, |f| permuted.apply(f), cfg.trials, cfg.seed)?;
    let f = SeededRng::new(cfg.seed).uniform_vec(n);
    let direct_seconds = median_seconds(cfg.timing_repeats, || kp.matvec(&f));
    let fast_seconds = median_seconds(cfg.timing_repeats, || reorganized.apply(&f));

    let (sp, sr) = (permuted.storage(), reorganized.storage());
    let report = CompressionReport {
        family: cfg.kernel.family,
        n: cfg.kernel.n,
        n_rows: m,
        n_cols: n,
        method: cfg.method,
        eps: cfg.eps,
        seed: cfg.seed,
        trial_count: cfg.trials,
        matrix_mb: StorageCount::dense(m, n).megabytes(),
        compressed_mb_permuted: sp.megabytes(),
        compressed_mb_reorganized: sr.megabytes(),
        compressed_mb_natural: natural.map(|s| s.megabytes()),
        stored_bytes_permuted: sp.bytes(),
        stored_bytes_reorganized: sr.bytes(),
        stored_bytes_natural: natural.map(|s| s.bytes()),
        relative_l2_error: error,
        relative_l2_error_permuted: error_permuted,
        iterations_run: geometry.iterations_run,
        direct_seconds,
        fast_seconds,
    };
    let out = RunOutput {
        report,
        kernel,
        shuffle,
        geometry,
        reorganized,
        permuted,
    };
    if let Some(dir) = &cfg.out_dir {
        write_artifacts(dir, &out).map_err(|e| e.in_stage("artifacts"))?;
    }
    Ok(out)
}

/// Writes `kernel.kmat`, `kernel.json` (coordinates and labels),
/// `shuffle.json` (row and column permutations) and `permuted.kmat`.
pub fn write_kernel_artifacts(dir: &Path, kernel: &Kernel, shuffle: &ShuffledKernel) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_kmat(dir.join("kernel.kmat"), &kernel.matrix)?;
    fs::write(dir.join("kernel.json"), kernel.sidecar_json()?)?;
    let orders = Orders {
        row: shuffle.row_perm.clone(),
        col: shuffle.col_perm.clone(),
    };
    fs::write(dir.join("shuffle.json"), serde_json::to_string(&orders)?)?;
    write_kmat(dir.join("permuted.kmat"), &shuffle.permuted)
}

/// Reads the files of [`write_kernel_artifacts`]; the shuffled matrix is
/// rebuilt from the kernel and the permutations.
pub fn read_kernel_artifacts(dir: &Path) -> Result<(Kernel, ShuffledKernel)> {
    let paths = [
        dir.join("kernel.kmat"),
        dir.join("kernel.json"),
        dir.join("shuffle.json"),
    ];
    for p in &paths {
        if !p.exists() {
            return Err(Error::MissingArtifact(p.clone()));
        }
    }
    let sidecar: KernelSidecar = serde_json::from_str(&fs::read_to_string(&paths[1])?)?;
    let kernel = Kernel::from_sidecar(read_kmat(&paths[0])?, sidecar)?;
    let orders: Orders = serde_json::from_str(&fs::read_to_string(&paths[2])?)?;
    let permuted = kernel.matrix.permute(&orders.row, &orders.col)?;
    let shuffle = ShuffledKernel {
        permuted,
        row_perm: orders.row,
        col_perm: orders.col,
    };
    Ok((kernel, shuffle))
}

/// Artifact layout: the kernel files of [`write_kernel_artifacts`],
/// `geometry/` (see [`write_geometry`]), `factorization/` and `report.json`.
pub fn write_artifacts(dir: &Path, out: &RunOutput) -> Result<()> {
    write_kernel_artifacts(dir, &out.kernel, &out.shuffle)?;
    write_geometry(&dir.join("geometry"), &out.geometry)?;
    out.reorganized.save(
        dir.join("factorization"),
        &out.geometry.row_tree,
        &out.geometry.col_tree,
    )?;
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&out.report)?,
    )?;
    Ok(())
}

/// Writes `row_tree.json`, `col_tree.json`, `row_affinity.kmat`,
/// `col_affinity.kmat` and `orders.json`.
pub fn write_geometry(dir: &Path, g: &Geometry) -> Result<()> {
    fs::create_dir_all(dir)?;
    g.row_tree.save(dir.join("row_tree.json"))?;
    g.col_tree.save(dir.join("col_tree.json"))?;
    write_kmat(dir.join("row_affinity.kmat"), g.row_affinity.matrix())?;
    write_kmat(dir.join("col_affinity.kmat"), g.col_affinity.matrix())?;
    let orders = Orders {
        row: g.row_order.clone(),
        col: g.col_order.clone(),
    };
    fs::write(dir.join("orders.json"), serde_json::to_string(&orders)?)?;
    Ok(())
}

pub fn read_geometry(dir: &Path) -> Result<Geometry> {
    let orders_path = dir.join("orders.json");
    if !orders_path.exists() {
        return Err(Error::MissingArtifact(orders_path));
    }
    let orders: Orders = serde_json::from_str(&fs::read_to_string(&orders_path)?)?;
    Ok(Geometry {
        row_tree: PartitionTree::load(dir.join("row_tree.json"))?,
        col_tree: PartitionTree::load(dir.join("col_tree.json"))?,
        row_affinity: AffinityMatrix::new(read_kmat(dir.join("row_affinity.kmat"))?)?,
        col_affinity: AffinityMatrix::new(read_kmat(dir.join("col_affinity.kmat"))?)?,
        row_order: orders.row,
        col_order: orders.col,
        iterations_run: 0,
    })
}

/// One row of a sweep: the report, or the failure that stopped it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub report: Option<CompressionReport>,
    pub error: Option<String>,
}

/// Runs [`run_factorization`] for every size, recording failures and continuing.
pub fn bench_sweep(base: &RunConfig, sizes: &[usize]) -> Vec<SweepRow> {
    sizes
        .iter()
        .map(|&n| {
            let mut cfg = base.clone();
            cfg.kernel.n = n;
            cfg.out_dir = base.out_dir.as_ref().map(|d| d.join(format!("n{n}")));
            match run_factorization(&cfg) {
                Ok(out) => SweepRow {
                    n,
                    report: Some(out.report),
                    error: None,
                },
                Err(e) => {
                    log::error!("size {n}: {e}");
                    SweepRow {
                        n,
                        report: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect()
}

pub const SWEEP_HEADER: &str = "N,matrix_mb,compressed_mb_permuted,compressed_mb_reorganized,compressed_mb_natural,direct_seconds,fast_seconds,relative_l2_error,status";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        match &row.report {
            Some(r) => {
                let natural = r.compressed_mb_natural.map(format_f64).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},ok\n",
                    row.n,
                    format_f64(r.matrix_mb),
                    format_f64(r.compressed_mb_permuted),
                    format_f64(r.compressed_mb_reorganized),
                    natural,
                    format_f64(r.direct_seconds),
                    format_f64(r.fast_seconds),
                    format_f64(r.relative_l2_error),
                ));
            }
            None => {
                let msg = row
                    .error
                    .as_deref()
                    .unwrap_or("failed")
                    .replace([',', '\n'], " ");
                out.push_str(&format!("{},,,,,,,,{msg}\n", row.n));
            }
        }
    }
    out
}

/// Relative Frobenius error (in percent) of the best-basis expansion kept to
/// the largest `ceil(ratio · m·n)` coefficients, per ratio.
pub fn error_ratio_curve(basis: &BestBasis, ratios: &[f64]) -> Vec<f64> {
    let mut sq: Vec<f64> = basis.tiling.iter().map(|t| t.2 * t.2).collect();
    sq.sort_by(|a, b| b.total_cmp(a));
    let mut tail = vec![0.0; sq.len() + 1];
    for i in (0..sq.len()).rev() {
        tail[i] = tail[i + 1] + sq[i];
    }
    let total = (basis.n_rows * basis.n_cols) as f64;
    ratios
        .iter()
        .map(|&r| {
            let kept = ((r * total).ceil() as usize).min(sq.len());
            100.0 * tail[kept].sqrt() / basis.frobenius_norm.max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// Files written by [`emit_plot_data`].
#[derive(Clone, Debug)]
pub struct PlotFiles {
    pub embedding: PathBuf,
    pub sfc_path: PathBuf,
    pub error_ratio: PathBuf,
}

/// Reads the artifacts of [`run_factorization`] from `dir` and writes
/// `embedding.csv` (diffusion coordinates of the shuffled columns),
/// `sfc_path.csv` (those coordinates along the curve ordering) and
/// `error_ratio.csv` (best-basis error versus retained ratio for the natural,
/// permuted and reorganized layouts).
pub fn emit_plot_data(dir: &Path, ratios: &[f64], cost_exponent: f64) -> Result<PlotFiles> {
    let (kernel, shuffle) = read_kernel_artifacts(dir)?;
    let geometry = read_geometry(&dir.join("geometry"))?;

    let embedding = diffusion_embedding(&geometry.col_affinity, 3)?;
    let embedding_path = dir.join("embedding.csv");
    fs::write(
        &embedding_path,
        curve_path_csv(&embedding, &Permutation::identity(embedding.n_rows()))?,
    )?;
    let sfc_path = dir.join("sfc_path.csv");
    fs::write(&sfc_path, curve_path_csv(&embedding, &geometry.col_order)?)?;

    let kp = &shuffle.permuted;
    let (m, n) = kp.shape();
    let (nr, nc) = natural_orders(&kernel);
    let (nr, nc) = (
        nr.then(&shuffle.row_perm.inverse())?,
        nc.then(&shuffle.col_perm.inverse())?,
    );
    let layouts = [
        (
            PartitionTree::balanced_over(&nr, 1)?,
            PartitionTree::balanced_over(&nc, 1)?,
        ),
        (PartitionTree::dyadic(m, 1)?, PartitionTree::dyadic(n, 1)?),
        (geometry.row_tree.clone(), geometry.col_tree.clone()),
    ];
    let mut curves = Vec::with_capacity(3);
    for (rt, ct) in &layouts {
        let basis = best_basis_2d(kp, rt, ct, cost_exponent)?;
        curves.push(error_ratio_curve(&basis, ratios));
    }
    let rows: Vec<Vec<f64>> = ratios
        .iter()
        .enumerate()
        .map(|(i, &r)| vec![r, curves[0][i], curves[1][i], curves[2][i]])
        .collect();
    let error_ratio = dir.join("error_ratio.csv");
    crate::io::write_csv_file(
        &error_ratio,
        Some(&["ratio", "natural", "permuted", "reorganized"]),
        &rows,
    )?;
    Ok(PlotFiles {
        embedding: embedding_path,
        sfc_path,
        error_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Sampling;

    #[test]
    fn measure_error_closed_forms() {
        let mut rng = SeededRng::new(1);
        let k = DenseMatrix::from_fn(6, 5, |_, _| rng.normal()).unwrap();
        let exact = measure_error(&k, |f| k.matvec(f), 10, 3).unwrap();
        assert!(exact <= 1e-14);
        let scaled = measure_error(
            &k,
            |f| Ok(k.matvec(f)?.iter().map(|x| 1.01 * x).collect()),
            10,
            3,
        )
        .unwrap();
        assert!((scaled - 0.01).abs() < 1e-12);
        let again = measure_error(
            &k,
            |f| Ok(k.matvec(f)?.iter().map(|x| 1.01 * x).collect()),
            10,
            3,
        )
        .unwrap();
        assert_eq!(scaled, again);
        let zero = DenseMatrix::<f64>::zeros(3, 3);
        assert!(measure_error(&zero, |f| zero.matvec(f), 4, 0).is_err());
        assert!(measure_error(&k, |f| k.matvec(f), 0, 0).is_err());
    }

    #[test]
    fn small_run_is_deterministic_and_persists() {
        let spec = KernelSpec::new(Family::Sine, 64)
            .with_sampling(Sampling::Random)
            .with_seed(4);
        let mut cfg = RunConfig::new(spec, Method::Butterfly);
        cfg.trials = 10;
        cfg.block_cap = 16;
        let dir = tempfile::tempdir().unwrap();
        cfg.out_dir = Some(dir.path().to_path_buf());
        let a = run_factorization(&cfg).unwrap();
        cfg.out_dir = None;
        let b = run_factorization(&cfg).unwrap();
        assert_eq!(a.report.without_timing(), b.report.without_timing());
        assert!(a.report.relative_l2_error <= 1e-8);
        let loaded = Compressed::load(dir.path().join("factorization")).unwrap();
        assert_eq!(loaded.storage(), a.reorganized.storage());
        assert_eq!(loaded.storage().bytes(), a.report.stored_bytes_reorganized);
        let ratios = [0.01, 0.05, 0.1, 0.5];
        let files = emit_plot_data(dir.path(), &ratios, 1.0).unwrap();
        let curve = crate::io::read_csv(fs::File::open(files.error_ratio).unwrap()).unwrap();
        assert_eq!(curve.len(), ratios.len());
        for col in 1..4 {
            for w in curve.windows(2) {
                assert!(w[1][col] <= w[0][col] + 1e-12);
            }
        }
        assert!(emit_plot_data(&dir.path().join("nothing"), &ratios, 1.0).is_err());
    }

    #[test]
    fn sweep_records_failures() {
        let spec = KernelSpec::new(Family::Sine, 32).with_seed(2);
        let mut cfg = RunConfig::new(spec, Method::Eghwt);
        cfg.trials = 5;
        let rows = bench_sweep(&cfg, &[1, 32]);
        assert!(rows[0].report.is_none() && rows[0].error.is_some());
        let r = rows[1].report.as_ref().unwrap();
        assert!(r.relative_l2_error < 0.2);
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(2).unwrap().ends_with(",ok"));
    }
}
