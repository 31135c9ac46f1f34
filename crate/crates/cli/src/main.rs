//! Command-line driver: kernel generation, geometry learning and ordering,
//! factorization, fast application, benchmark sweeps and plot data.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use geofact::error::Error;
use geofact::io::{read_csv, write_csv_file};
use geofact::kernels::{generate, shuffle_variants, Family, KernelSpec, Sampling};
use geofact::pipeline::{
    bench_sweep, compress, coupled_geometry, emit_plot_data, initial_affinity, orient_geometry,
    read_geometry, read_kernel_artifacts, run_factorization, sweep_csv, write_geometry,
    write_kernel_artifacts, Compressed, Method, RunConfig,
};
use geofact::rng::SeededRng;
use geofact::treeaffinity::{Metric, TreeWeightParams};

#[derive(Parser, Debug)]
#[command(
    name = "geofact",
    version,
    about = "Geometry-adaptive kernel matrix compression"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Artifact directory.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Compression backend.
    #[arg(long, global = true, default_value = "butterfly")]
    method: Method,
    /// Precision (butterfly) or relative Frobenius threshold (eGHWT);
    /// defaults to 1e-10 and 5e-2 respectively.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Dual-affinity metric.
    #[arg(long, global = true, default_value = "corr")]
    metric: Metric,
    /// Level sensitivity of the tree weights.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Folder-size exponent of the tree weights.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Affinity bandwidth as a multiple of the median pairwise distance.
    #[arg(long = "eps-scale", global = true)]
    eps_scale: Option<f64>,
    /// Questionnaire iterations.
    #[arg(long, global = true, default_value_t = 3)]
    iters: usize,
    /// Largest column block at the first butterfly level; defaults per family.
    #[arg(long = "block-cap", global = true)]
    block_cap: Option<usize>,
    /// Random trials of the error measurement.
    #[arg(long, global = true, default_value_t = 100)]
    trials: usize,
}

#[derive(Args, Debug, Clone)]
struct KernelArgs {
    /// Kernel family: sine, acoustic or spherical.
    #[arg(long, default_value = "sine")]
    family: Family,
    /// Size parameter (sine: frequencies; acoustic: points; spherical: l_max
    /// on the grid, points when random).
    #[arg(long, short = 'n', default_value_t = 256)]
    n: usize,
    /// Acoustic frequency.
    #[arg(long, default_value_t = 0.0)]
    nu: f64,
    /// Sample placement: grid or random.
    #[arg(long, default_value = "random")]
    sampling: Sampling,
}

impl KernelArgs {
    fn spec(&self, seed: u64) -> KernelSpec {
        KernelSpec::new(self.family, self.n)
            .with_nu(self.nu)
            .with_sampling(self.sampling)
            .with_seed(seed)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a kernel and its shuffled variant.
    GenKernel(KernelArgs),
    /// Learn coupled row and column trees of the shuffled kernel.
    LearnGeometry,
    /// Orient the learned trees along space-filling curves.
    Order,
    /// Compress the shuffled kernel with the learned trees.
    Factorize,
    /// Apply the stored factorization to a vector.
    Apply {
        /// Input vector, one value per line; a seeded uniform [0, 1] vector
        /// when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output CSV; defaults to `<out-dir>/product.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Full pipeline for one size with a JSON report.
    Run(KernelArgs),
    /// Pipeline over several sizes with a CSV table.
    Bench {
        #[command(flatten)]
        kernel: KernelArgs,
        /// Comma-separated sizes.
        #[arg(long, value_delimiter = ',', default_value = "256,512")]
        sizes: Vec<usize>,
    },
    /// Embedding, curve and error-versus-ratio CSVs from stored artifacts.
    PlotData {
        /// Comma-separated retained ratios.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.01,0.02,0.05,0.1,0.2,0.3,0.5"
        )]
        ratios: Vec<f64>,
    },
}

impl Global {
    fn params(&self) -> TreeWeightParams {
        let mut p = TreeWeightParams::default();
        if let Some(a) = self.alpha {
            p.alpha = a;
        }
        if let Some(b) = self.beta {
            p.beta = b;
        }
        if let Some(s) = self.eps_scale {
            p.epsilon_scale = s;
        }
        p
    }

    fn eps(&self) -> f64 {
        self.eps.unwrap_or(self.method.default_eps())
    }

    fn config(&self, spec: KernelSpec) -> RunConfig {
        let mut cfg = RunConfig::new(spec, self.method);
        cfg.metric = self.metric;
        cfg.params = self.params();
        cfg.max_iters = self.iters;
        cfg.eps = self.eps();
        if let Some(b) = self.block_cap {
            cfg.block_cap = b;
        }
        cfg.trials = self.trials;
        cfg.seed = self.seed;
        cfg.out_dir = Some(self.out_dir.clone());
        cfg
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    let dir = &g.out_dir;
    match &cli.command {
        Command::GenKernel(k) => {
            let kernel = generate(&k.spec(g.seed))?;
            let shuffle = shuffle_variants(&kernel.matrix, g.seed.wrapping_add(1))?;
            write_kernel_artifacts(dir, &kernel, &shuffle)?;
            println!(
                "{}×{} kernel written to {}",
                kernel.matrix.n_rows(),
                kernel.matrix.n_cols(),
                dir.display()
            );
        }
        Command::LearnGeometry => {
            let (kernel, shuffle) = read_kernel_artifacts(dir)?;
            let init = initial_affinity(&kernel, &shuffle.row_perm)?;
            let geo = coupled_geometry(
                &shuffle.permuted,
                &init,
                g.metric,
                g.params(),
                g.iters,
                g.seed,
            )?;
            write_geometry(&dir.join("geometry"), &geo)?;
            println!("{} questionnaire iterations", geo.iterations_run);
        }
        Command::Order => {
            let geo = orient_geometry(read_geometry(&dir.join("geometry"))?)?;
            write_geometry(&dir.join("geometry"), &geo)?;
            println!("trees oriented");
        }
        Command::Factorize => {
            let (kernel, shuffle) = read_kernel_artifacts(dir)?;
            let geo = read_geometry(&dir.join("geometry"))?;
            let block_cap = g
                .block_cap
                .unwrap_or(geofact::pipeline::default_block_cap(kernel.spec.family));
            let comp = compress(
                &shuffle.permuted,
                &geo.row_tree,
                &geo.col_tree,
                g.method,
                g.eps(),
                block_cap,
                geofact::ghwt::DEFAULT_COST_EXPONENT,
            )?;
            comp.save(dir.join("factorization"), &geo.row_tree, &geo.col_tree)?;
            let storage = comp.storage();
            let summary = serde_json::json!({
                "method": g.method,
                "eps": g.eps(),
                "stored_bytes": storage.bytes(),
                "compressed_mb": storage.megabytes(),
            });
            write_json(&dir.join("factorization.json"), &summary)?;
            println!("{} stored bytes", storage.bytes());
        }
        Command::Apply { input, output } => {
            let comp = Compressed::load(dir.join("factorization"))?;
            let n_cols = match &comp {
                Compressed::Butterfly(f) => f.n_cols,
                Compressed::Ghwt(c) => c.n_cols,
            };
            let f = match input {
                Some(p) => {
                    let file =
                        fs::File::open(p).with_context(|| format!("reading {}", p.display()))?;
                    read_csv(file)?.into_iter().flatten().collect()
                }
                None => SeededRng::new(g.seed).uniform_vec(n_cols),
            };
            let u = comp.apply(&f)?;
            let out = output.clone().unwrap_or_else(|| dir.join("product.csv"));
            let rows: Vec<Vec<f64>> = u.into_iter().map(|x| vec![x]).collect();
            write_csv_file(&out, None, &rows)?;
            println!("{} entries written to {}", rows.len(), out.display());
        }
        Command::Run(k) => {
            let out = run_factorization(&g.config(k.spec(g.seed)))?;
            println!("{}", serde_json::to_string_pretty(&out.report)?);
        }
        Command::Bench { kernel, sizes } => {
            let rows = bench_sweep(&g.config(kernel.spec(g.seed)), sizes);
            fs::create_dir_all(dir)?;
            fs::write(dir.join("bench.csv"), sweep_csv(&rows))?;
            write_json(&dir.join("bench.json"), &serde_json::to_value(&rows)?)?;
            print!("{}", sweep_csv(&rows));
        }
        Command::PlotData { ratios } => {
            let files = emit_plot_data(dir, ratios, geofact::ghwt::DEFAULT_COST_EXPONENT)?;
            for p in [files.embedding, files.sfc_path, files.error_ratio] {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
