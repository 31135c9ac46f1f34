use std::fs;

use geofact::io::read_csv;
use geofact::kernels::{Family, KernelSpec};
use geofact::pipeline::{
    bench_sweep, emit_plot_data, run_factorization, Compressed, Method, RunConfig,
};

fn sine(n: usize, method: Method) -> RunConfig {
    let mut cfg = RunConfig::new(KernelSpec::new(Family::Sine, n).with_seed(3), method);
    cfg.trials = 100;
    cfg
}

#[test]
fn sine_256_reaches_target_errors() {
    let b = run_factorization(&sine(256, Method::Butterfly))
        .unwrap()
        .report;
    assert!(b.relative_l2_error <= 1e-8, "{}", b.relative_l2_error);
    assert_eq!(b.trial_count, 100);
    let g = run_factorization(&sine(256, Method::Eghwt)).unwrap().report;
    assert!(g.relative_l2_error <= 7e-2, "{}", g.relative_l2_error);
    for r in [&b, &g] {
        assert!(r.stored_bytes_reorganized < r.stored_bytes_permuted);
        assert_eq!(r.matrix_mb, (256.0 * 512.0 * 8.0) / (1u64 << 20) as f64);
    }
}

#[test]
fn error_ratio_curves_order_permuted_last() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = sine(128, Method::Eghwt);
    cfg.trials = 10;
    cfg.out_dir = Some(dir.path().to_path_buf());
    let out = run_factorization(&cfg).unwrap();
    let ratios = [0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.8];
    let files = emit_plot_data(dir.path(), &ratios, 1.0).unwrap();
    let curve = read_csv(fs::File::open(&files.error_ratio).unwrap()).unwrap();
    assert_eq!(curve.len(), ratios.len());
    for row in &curve {
        let (natural, permuted, reorganized) = (row[1], row[2], row[3]);
        assert!(permuted >= reorganized, "{row:?}");
        assert!(permuted >= natural, "{row:?}");
    }
    let loaded = Compressed::load(dir.path().join("factorization")).unwrap();
    assert_eq!(
        loaded.storage().bytes(),
        out.report.stored_bytes_reorganized
    );
    assert_eq!(
        loaded.storage().megabytes(),
        out.report.compressed_mb_reorganized
    );
}

#[test]
fn sweep_over_two_sizes() {
    let mut cfg = sine(256, Method::Butterfly);
    cfg.include_natural = false;
    let rows = bench_sweep(&cfg, &[256, 512]);
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let r = row.report.as_ref().expect("row succeeded");
        assert_eq!(r.n, row.n);
        assert!(r.relative_l2_error <= 1e-8);
        assert!(r.compressed_mb_reorganized < r.compressed_mb_permuted);
    }
}
