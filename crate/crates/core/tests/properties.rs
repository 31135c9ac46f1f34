use geofact::butterfly::{butterfly_factor, interpolative_decomposition};
use geofact::ghwt::{best_basis_2d, fwht, ghwt_analyze, ghwt_synthesize_level, threshold_compress};
use geofact::io::{decode_kmat, encode_kmat};
use geofact::kernels::{generate, Family, KernelSpec};
use geofact::matrix::DenseMatrix;
use geofact::perm::Permutation;
use geofact::pipeline::natural_orders;
use geofact::rng::SeededRng;
use geofact::tree::PartitionTree;
use proptest::prelude::*;

fn gaussian(m: usize, n: usize, seed: u64) -> DenseMatrix<f64> {
    let mut rng = SeededRng::new(seed);
    DenseMatrix::from_fn(m, n, |_, _| rng.normal()).unwrap()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = a.iter().map(|x| x * x).sum();
    (num / den).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn permutation_scatter_undoes_gather(n in 1usize..200, seed in any::<u64>()) {
        let p = Permutation::random(n, &mut SeededRng::new(seed));
        let v: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let g = p.apply(&v).unwrap();
        prop_assert_eq!(p.apply_inverse(&g).unwrap(), v.clone());
        prop_assert_eq!(p.inverse().apply(&g).unwrap(), v);
        prop_assert!(p.then(&p.inverse()).unwrap().is_identity());
    }

    #[test]
    fn kmat_round_trip_is_bit_exact(m in 1usize..20, n in 1usize..20, seed in any::<u64>()) {
        let k = gaussian(m, n, seed);
        let back: DenseMatrix<f64> = decode_kmat(&encode_kmat(&k)).unwrap();
        prop_assert_eq!(back, k);
    }

    #[test]
    fn fwht_is_an_orthonormal_involution(bits in 0u32..10, seed in any::<u64>()) {
        let f = SeededRng::new(seed).uniform_vec(1 << bits);
        let c = fwht(&f).unwrap();
        let e0: f64 = f.iter().map(|x| x * x).sum();
        let e1: f64 = c.iter().map(|x| x * x).sum();
        prop_assert!((e0 - e1).abs() <= 1e-12 * e0.max(1.0));
        prop_assert!(rel_err(&f, &fwht(&c).unwrap()) <= 1e-13);
    }

    #[test]
    fn every_ghwt_level_reconstructs(n in 1usize..150, seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let tree = PartitionTree::balanced_over(&Permutation::random(n, &mut rng), 1).unwrap();
        let f: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let dict = ghwt_analyze(&f, &tree).unwrap();
        for level in 0..=tree.depth() {
            let back = ghwt_synthesize_level(&dict, level).unwrap();
            prop_assert!(rel_err(&f, &back) <= 1e-12);
        }
    }

    #[test]
    fn id_reproduces_low_rank_matrices(m in 4usize..40, n in 4usize..40, r in 1usize..4, seed in any::<u64>()) {
        let a = gaussian(m, r, seed).matmul(&gaussian(r, n, seed ^ 1)).unwrap();
        let id = interpolative_decomposition(&a, 1e-12).unwrap();
        prop_assert_eq!(id.rank(), r);
        let p = id.interpolation_matrix();
        for (i, &s) in id.skeleton.iter().enumerate() {
            for j in 0..id.rank() {
                prop_assert_eq!(p.get(j, s), if i == j { 1.0 } else { 0.0 });
            }
        }
        prop_assert!(p.data().iter().all(|x| x.abs() <= 2.0 + 1e-9));
        let skel = a.submatrix(&(0..m).collect::<Vec<_>>(), &id.skeleton);
        let diff = skel.matmul(&p).unwrap().sub(&a).unwrap();
        prop_assert!(diff.frobenius_norm() <= 1e-9 * a.frobenius_norm());
    }

    #[test]
    fn butterfly_matches_dense_sine_products(exp in 4u32..7, seed in any::<u64>()) {
        let k = generate(&KernelSpec::new(Family::Sine, 1 << exp).with_seed(seed)).unwrap();
        let (nr, nc) = natural_orders(&k);
        let rt = PartitionTree::balanced_over(&nr, 1).unwrap();
        let ct = PartitionTree::balanced_over(&nc, 1).unwrap();
        let f = butterfly_factor(&k.matrix, &rt, &ct, 1e-10, 8).unwrap();
        let x = SeededRng::new(seed ^ 7).uniform_vec(k.matrix.n_cols());
        prop_assert!(rel_err(&k.matrix.matvec(&x).unwrap(), &f.apply(&x).unwrap()) <= 1e-8);
    }

    #[test]
    fn ghwt_threshold_is_monotone(seed in any::<u64>()) {
        let k = gaussian(8, 16, seed);
        let rt = PartitionTree::dyadic(8, 1).unwrap();
        let ct = PartitionTree::dyadic(16, 1).unwrap();
        let basis = best_basis_2d(&k, &rt, &ct, 1.0).unwrap();
        let mut last = usize::MAX;
        for eps in [1e-3, 1e-2, 0.1, 0.3, 0.9] {
            let c = threshold_compress(&basis, eps).unwrap();
            prop_assert!(c.n_kept() <= last);
            last = c.n_kept();
            let dense = c.to_dense().unwrap();
            prop_assert!(dense.sub(&k).unwrap().frobenius_norm() <= eps * k.frobenius_norm() * (1.0 + 1e-12));
        }
    }
}
