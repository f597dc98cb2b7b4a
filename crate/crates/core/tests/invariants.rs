//! Structural properties of the oracle and the bound machinery, checked
//! against directly assembled matrices and brute-force arithmetic.

use approx::assert_relative_eq;
use kaczlab_core::problems::gen_synthetic;
use kaczlab_core::{frobenius_norm, normalized_bound, rk_bound, row_norms, svd, BoundInputs};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(m: usize, n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((m, n), |_| rng.gen_range(-1.0..1.0))
}

fn assert_projector(p: &Array2<f64>, tol: f64) {
    let p2 = p.dot(p);
    for ((i, j), &x) in p2.indexed_iter() {
        assert!((x - p[[i, j]]).abs() <= tol, "idempotence fails at ({i},{j})");
    }
    for ((i, j), &x) in p.indexed_iter() {
        assert!((x - p[[j, i]]).abs() <= tol, "symmetry fails at ({i},{j})");
    }
}

#[test]
fn projectors_idempotent_and_symmetric() {
    let shapes = [(3usize, 3usize), (5, 8), (8, 5), (12, 12), (20, 20), (20, 7)];
    for (idx, &(m, n)) in shapes.iter().enumerate() {
        let a = random_matrix(m, n, 100 + idx as u64);
        let o = svd(&a).unwrap();
        let b = o.rowspace_basis();
        let p_null = &Array2::eye(n) - &b.dot(&b.t());
        let u = o.range_basis();
        let q = u.dot(&u.t());
        assert_projector(&p_null, 1e-11);
        assert_projector(&q, 1e-11);
    }
    // Rank-deficient instance: the null space is nontrivial.
    let p = gen_synthetic(10, 8, 4, true, 9).unwrap();
    let o = svd(&p.a).unwrap();
    let b = o.rowspace_basis();
    let p_null = &Array2::eye(8) - &b.dot(&b.t());
    assert_projector(&p_null, 1e-11);
    assert_eq!(o.null_basis().ncols(), 4);
}

#[test]
fn pythagorean_decomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..100 {
        let m = rng.gen_range(1..12);
        let n = rng.gen_range(1..12);
        let a = random_matrix(m, n, 1000 + trial);
        let o = svd(&a).unwrap();
        let x = Array1::from_shape_fn(n, |_| rng.gen_range(-2.0..2.0));
        let pn = o.project_null(x.view()).unwrap();
        let rest = &x - &pn;
        let lhs = x.dot(&x);
        let rhs = pn.dot(&pn) + rest.dot(&rest);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10, epsilon = 1e-14);
    }
}

#[test]
fn generalized_solution_minimizes_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let a = random_matrix(8, 5, 50);
    let o = svd(&a).unwrap();
    let b = Array1::from_shape_fn(8, |_| rng.gen_range(-1.0..1.0));
    let xd = o.generalized_solution(b.view()).unwrap();
    let base = {
        let r = &a.dot(&xd) - &b;
        r.dot(&r).sqrt()
    };
    for _ in 0..50 {
        let d = Array1::from_shape_fn(5, |_| rng.gen_range(-1.0..1.0));
        let x = &xd + &(1e-3 * &d);
        let r = &a.dot(&x) - &b;
        assert!(r.dot(&r).sqrt() >= base - 1e-9);
    }
}

#[test]
fn generators_consistent_at_several_sizes() {
    use kaczlab_core::problems::{gen_gravity, gen_phillips, gen_shaw};
    for n in [8usize, 32, 100] {
        for p in [gen_phillips(n).unwrap(), gen_gravity(n, 0.25).unwrap(), gen_shaw(n).unwrap()] {
            let o = svd(&p.a).unwrap();
            let off = &p.b - &o.project_range(p.b.view()).unwrap();
            assert!(
                off.dot(&off).sqrt() <= 1e-9 * p.b.dot(&p.b).sqrt(),
                "{} not consistent",
                p.label
            );
            assert!(row_norms(&p.a).iter().all(|&x| x > 0.0));
        }
    }
}

#[test]
fn bound_ordering_on_random_matrices() {
    // The normalized-system rate factor is never below the weighted one,
    // with equality exactly when all row norms agree.
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut strict = 0;
    for trial in 0..100 {
        let m = rng.gen_range(2..10);
        let n = rng.gen_range(2..8);
        let a = random_matrix(m, n, 2000 + trial);
        let p = kaczlab_core::LinearProblem {
            b: Array1::zeros(m),
            a,
            b_noisy: None,
            delta: None,
            x_true: None,
            label: format!("rand-{trial}"),
        };
        let o = svd(&p.a).unwrap();
        let x0 = Array1::zeros(n);
        let inputs = BoundInputs::from_problem(&p, &o, x0.view(), false, None).unwrap();
        let f_rk = kaczlab_core::bounds::rk_rate_factor(&inputs);
        let f_norm = kaczlab_core::bounds::normalized_rate_factor(&inputs);
        assert!(f_norm >= f_rk - 1e-12, "ordering violated: {f_norm} < {f_rk}");
        let norms = row_norms(&p.a);
        let equal_rows = norms.iter().all(|&x| (x - norms[0]).abs() <= 1e-12 * norms[0]);
        if equal_rows {
            assert!((f_norm - f_rk).abs() <= 1e-12);
        } else {
            assert!(f_norm > f_rk, "unequal rows must give a strict gap");
            strict += 1;
        }
    }
    assert!(strict > 0);

    // Equality case, constructed: equal row norms.
    let a = Array2::eye(4) * 2.0;
    let p = kaczlab_core::LinearProblem {
        b: Array1::zeros(4),
        a,
        b_noisy: None,
        delta: None,
        x_true: None,
        label: "scaled-eye".into(),
    };
    let o = svd(&p.a).unwrap();
    let inputs = BoundInputs::from_problem(&p, &o, Array1::zeros(4).view(), false, None).unwrap();
    assert!(
        (kaczlab_core::bounds::normalized_rate_factor(&inputs)
            - kaczlab_core::bounds::rk_rate_factor(&inputs))
        .abs()
            <= 1e-12
    );
}

#[test]
fn bound_curves_behave_on_consistent_inputs() {
    let p = gen_synthetic(9, 6, 4, true, 77).unwrap();
    let o = svd(&p.a).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x0 = Array1::from_shape_fn(6, |_| rng.gen_range(-1.0..1.0));
    let inputs = BoundInputs::from_problem(&p, &o, x0.view(), false, None).unwrap();
    for curve in [
        rk_bound(&inputs, 500).unwrap(),
        normalized_bound(&inputs, 500, true).unwrap(),
    ] {
        assert!(curve.values.iter().all(|&v| v >= 0.0));
        assert!(curve.values.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Lemma-level step orthogonality: the residual direction after a
    // projection is orthogonal to the row.
    #[test]
    fn projection_is_orthogonal_to_row(
        u in prop::collection::vec(-10.0f64..10.0, 2..8),
        v in prop::collection::vec(-10.0f64..10.0, 2..8),
    ) {
        let n = u.len().min(v.len());
        let u = Array1::from_vec(u[..n].to_vec());
        let v = Array1::from_vec(v[..n].to_vec());
        let norm_sq = u.dot(&u);
        prop_assume!(norm_sq > 1e-6);
        let proj = &v - &(&u * (u.dot(&v) / norm_sq));
        let unorm = norm_sq.sqrt();
        let vnorm = v.dot(&v).sqrt();
        prop_assert!(proj.dot(&u).abs() <= 1e-12 * unorm * vnorm.max(1.0));
    }

    // Squared row norms always sum to the squared Frobenius norm.
    #[test]
    fn row_norms_decompose_frobenius(
        entries in prop::collection::vec(-100.0f64..100.0, 4..36),
        m in 2usize..6,
    ) {
        let n = entries.len() / m;
        prop_assume!(n >= 1);
        let a = Array2::from_shape_vec((m, n), entries[..m * n].to_vec()).unwrap();
        let sum_sq: f64 = row_norms(&a).iter().map(|x| x * x).sum();
        let frob_sq = frobenius_norm(&a).powi(2);
        prop_assert!((sum_sq - frob_sq).abs() <= 1e-12 * frob_sq.max(1.0));
    }

    // Any strategy yields a valid partition: disjoint, covering, nonempty.
    #[test]
    fn partitions_are_always_valid(m in 1usize..40, r_frac in 0.0f64..1.0, seed in 0u64..1000) {
        use kaczlab_core::{partition_rows, PartitionStrategy};
        let r = 1 + ((m - 1) as f64 * r_frac) as usize;
        for strategy in [
            PartitionStrategy::Contiguous,
            PartitionStrategy::Strided,
            PartitionStrategy::SeededRandom(seed),
        ] {
            let p = partition_rows(m, r, strategy).unwrap();
            prop_assert_eq!(p.num_blocks(), r);
            let mut seen = vec![false; m];
            for block in p.blocks() {
                prop_assert!(!block.is_empty());
                for &i in block {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
        }
    }
}
