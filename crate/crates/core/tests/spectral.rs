use landscape::geometry::{principal_angles, SubspaceBasis};
use landscape::linalg::{
    dense_sym_eig_oracle, dot, norm, seeded_gaussian_vector, symtridiag_eig, thin_svd, DenseMatrix, TridiagonalSystem,
};
use landscape::mlp::{dense_hessian_oracle, init_params, Dataset, Evaluation, LossKind, MlpSpec, Targets};
use landscape::spectral::{lanczos, residual_norm, HessianOperator, LanczosConfig, SymmetricOperator};
use ndarray::Array2;
use proptest::prelude::*;

fn random_symmetric(n: usize, seed: u64) -> DenseMatrix {
    let g = seeded_gaussian_vector(n * n, seed).unwrap();
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a.row_mut(i)[j] = 0.5 * (g[i * n + j] + g[j * n + i]);
        }
    }
    a
}

fn spectral_scale(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[test]
fn full_run_reproduces_oracle_spectrum() {
    for (n, seed) in [(200, 1u64), (57, 2), (8, 3)] {
        let a = random_symmetric(n, seed);
        let (want, _) = dense_sym_eig_oracle(&a).unwrap();
        let r = lanczos(&a, &LanczosConfig::new(n, seed + 10).with_vectors(0)).unwrap();
        assert_eq!(r.ritz_values().len(), n);
        let scale = spectral_scale(&want);
        for (i, (got, w)) in r.ritz_values().iter().zip(&want).enumerate() {
            assert!((got - w).abs() <= 1e-8 * scale, "n={n} i={i}: {got} vs {w}");
        }
    }
}

#[test]
fn extremal_values_move_outward_with_more_steps() {
    let a = random_symmetric(120, 7);
    let mut prev_max = f64::NEG_INFINITY;
    let mut prev_min = f64::INFINITY;
    for steps in [2, 5, 10, 20, 40, 80, 120] {
        let r = lanczos(&a, &LanczosConfig::new(steps, 99).with_vectors(0)).unwrap();
        assert!(r.lambda_max() >= prev_max - 1e-12, "steps={steps}");
        assert!(r.lambda_min() <= prev_min + 1e-12, "steps={steps}");
        prev_max = r.lambda_max();
        prev_min = r.lambda_min();
    }
}

#[test]
fn ritz_vectors_are_orthonormal_and_residuals_honest() {
    let a = random_symmetric(90, 4);
    let r = lanczos(&a, &LanczosConfig::new(60, 5).with_vectors(12)).unwrap();
    let v = r.ritz_vectors();
    assert_eq!(v.rows(), 12);
    for i in 0..v.rows() {
        assert!((norm(v.row(i)) - 1.0).abs() <= 1e-10);
        for j in 0..i {
            assert!(dot(v.row(i), v.row(j)).abs() <= 1e-8, "rows {i},{j}");
        }
        let av = a.matvec(v.row(i)).unwrap();
        let recomputed = residual_norm(&av, v.row(i), r.ritz_values()[i]);
        assert!((recomputed - r.residual_norms()[i]).abs() <= 1e-12, "pair {i}");
    }
    let values = r.ritz_values();
    assert!(values.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn top_subspace_matches_exact_eigenvectors() {
    let op = DenseMatrix::from_diagonal(&[4.0, 3.0, 2.0, 1.0]);
    let r = lanczos(&op, &LanczosConfig::new(4, 8)).unwrap();
    let top1 = r.top_subspace(1).unwrap();
    assert!((top1.vector(0)[0].abs() - 1.0).abs() < 1e-10);

    let top = r.top_subspace(2).unwrap();
    let exact = SubspaceBasis::new(DenseMatrix::from_rows(&[[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]).unwrap()).unwrap();
    for phi in principal_angles(&top, &exact).unwrap() {
        assert!(phi <= 1e-8, "angle {phi:e}");
    }
}

#[test]
fn top_subspace_rows_are_orthonormal_for_every_m() {
    let a = random_symmetric(80, 12);
    let r = lanczos(&a, &LanczosConfig::new(80, 3).with_vectors(20)).unwrap();
    for m in 1..=r.converged_prefix().min(20) {
        let b = r.top_subspace(m).unwrap();
        let gram = b.basis().matmul_transpose(b.basis()).unwrap();
        for i in 0..m {
            for j in 0..m {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - want).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn lanczos_on_network_hessian_matches_dense_oracle() {
    let spec = MlpSpec::new(vec![2, 5, 4, 3], LossKind::CrossEntropy).unwrap();
    let n = 24;
    let g = seeded_gaussian_vector(2 * n, 31).unwrap();
    let inputs = Array2::from_shape_vec((n, 2), g).unwrap();
    let data = Dataset::new("toy", inputs, Targets::Classes((0..n).map(|i| i % 3).collect())).unwrap();
    let p = init_params(&spec, 31);
    let eval = Evaluation::new(&spec, &p, &data).unwrap();
    let op = HessianOperator::full(&eval);
    assert_eq!(op.dim(), spec.param_count());

    let (want, _) = dense_sym_eig_oracle(&dense_hessian_oracle(&spec, &p, &data).unwrap()).unwrap();
    let r = lanczos(&op, &LanczosConfig::new(30, 2).with_vectors(3)).unwrap();
    let scale = spectral_scale(&want);
    assert!((r.lambda_max() - want[0]).abs() <= 1e-5 * scale);
    assert!((r.lambda_min() - want[want.len() - 1]).abs() <= 1e-4 * scale);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tridiagonal_solver_matches_dense_oracle(n in 1usize..200, seed in any::<u64>()) {
        let g = seeded_gaussian_vector(2 * n, seed).unwrap();
        let t = TridiagonalSystem::new(g[..n].to_vec(), g[n..2 * n - 1].to_vec()).unwrap();
        let (vals, vecs) = symtridiag_eig(&t).unwrap();
        let (want, _) = dense_sym_eig_oracle(&t.to_dense()).unwrap();
        let scale = spectral_scale(&want).max(1.0);
        for (a, b) in vals.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-10 * scale);
        }
        let dense = t.to_dense();
        for i in 0..n.min(5) {
            let v = vecs.column(i);
            let av = dense.matvec(&v).unwrap();
            prop_assert!(residual_norm(&av, &v, vals[i]) <= 1e-10 * scale);
        }
    }

    #[test]
    fn thin_svd_reconstructs(rows in 1usize..12, cols in 1usize..12, seed in any::<u64>()) {
        let a = DenseMatrix::new(rows, cols, seeded_gaussian_vector(rows * cols, seed).unwrap()).unwrap();
        let s = thin_svd(&a).unwrap();
        let r = rows.min(cols);
        prop_assert_eq!(s.singular_values.len(), r);
        prop_assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        for i in 0..rows {
            for j in 0..cols {
                let rec: f64 = (0..r).map(|k| s.u[(i, k)] * s.singular_values[k] * s.v[(j, k)]).sum();
                prop_assert!((rec - a[(i, j)]).abs() <= 1e-10);
            }
        }
        let utu = s.u.transpose().matmul(&s.u).unwrap();
        let vtv = s.v.transpose().matmul(&s.v).unwrap();
        for i in 0..r {
            for j in 0..r {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((utu[(i, j)] - want).abs() <= 1e-10);
                prop_assert!((vtv[(i, j)] - want).abs() <= 1e-10);
            }
        }
    }
}
