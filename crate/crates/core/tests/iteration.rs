//! Dynamics of the iteration itself: the exact one-step identity, error
//! monotonicity on consistent data, confinement to the affine manifold,
//! and convergence to `P_N(A)x₀ + x†` for the cyclic sweep.
//!
//! The identity checks recompute their right-hand sides from raw dot
//! products here in the test, independently of the solver's bookkeeping.

use kaczlab_core::problems::{gen_synthetic, LinearProblem};
use kaczlab_core::{
    partition_rows, run_with_oracle, svd, PartitionStrategy, RowSelector, SelectionPolicy,
    SolverConfig, SvdOracle,
};
use ndarray::{Array1, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn policies(m: usize) -> Vec<(&'static str, SelectionPolicy)> {
    vec![
        ("cyclic", SelectionPolicy::Cyclic),
        ("weighted", SelectionPolicy::WeightedRandom),
        ("uniform", SelectionPolicy::UniformRandom),
        (
            "block",
            SelectionPolicy::BlockCyclicUniform(
                partition_rows(m, 3.min(m), PartitionStrategy::Contiguous).unwrap(),
            ),
        ),
    ]
}

fn target_of(problem: &LinearProblem, oracle: &SvdOracle, x0: ArrayView1<'_, f64>) -> Array1<f64> {
    &oracle.project_null(x0).unwrap() + &oracle.generalized_solution(problem.b.view()).unwrap()
}

/// Check `e²_{k+1} = e²_k − (a_iᵀd_k/‖a_i‖)² + ((I−Q)b)ᵢ²/‖a_i‖²` along a
/// full trace, recomputing every term from scratch.
fn check_step_identity(problem: &LinearProblem, oracle: &SvdOracle, steps: usize, seed: u64) {
    let n = problem.ncols();
    let off = &problem.b - &oracle.project_range(problem.b.view()).unwrap();
    for (name, policy) in policies(problem.nrows()) {
        let config = SolverConfig::zero_start(n, steps).record_iterates(true);
        let trace = run_with_oracle(
            problem,
            oracle,
            &RowSelector::new(policy, seed),
            &config,
            false,
        )
        .unwrap();
        let target = target_of(problem, oracle, config.x0.view());
        let e0_sq = trace.initial_error().powi(2);
        for pair in trace.records.windows(2) {
            let x_k = pair[0].iterate.as_ref().unwrap();
            let i = pair[1].row.unwrap() - 1;
            let row = problem.a.row(i);
            let d = x_k - &target;
            let norm = row.dot(&row).sqrt();
            let proj = row.dot(&d) / norm;
            let rhs = pair[0].error.powi(2) - proj * proj + (off[i] / norm).powi(2);
            let lhs = pair[1].error.powi(2);
            let scale = lhs + rhs.abs() + e0_sq;
            assert!(
                (lhs - rhs).abs() <= 1e-9 * scale,
                "{name} k={}: lhs={lhs} rhs={rhs}",
                pair[1].k
            );
        }
    }
}

#[test]
fn step_identity_consistent_and_inconsistent() {
    let oracle_cache = |p: &LinearProblem| svd(&p.a).unwrap();
    let consistent = gen_synthetic(12, 6, 5, true, 3).unwrap();
    check_step_identity(&consistent, &oracle_cache(&consistent), 1000, 11);
    let inconsistent = gen_synthetic(12, 6, 5, false, 3).unwrap();
    check_step_identity(&inconsistent, &oracle_cache(&inconsistent), 1000, 11);
}

#[test]
fn error_monotone_on_consistent_systems() {
    let p = gen_synthetic(10, 7, 5, true, 19).unwrap();
    let oracle = svd(&p.a).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x0 = Array1::from_shape_fn(7, |_| rng.gen_range(-1.0..1.0));
    for (name, policy) in policies(10) {
        let config = SolverConfig::new(x0.clone(), 800);
        let trace =
            run_with_oracle(&p, &oracle, &RowSelector::new(policy, 5), &config, false).unwrap();
        let e0_sq = trace.initial_error().powi(2);
        for pair in trace.records.windows(2) {
            assert!(
                pair[1].error.powi(2) <= pair[0].error.powi(2) + 1e-12 * e0_sq,
                "{name}: error grew at k={}",
                pair[1].k
            );
        }
    }
}

#[test]
fn iterates_stay_on_manifold() {
    // Rank-deficient system and a nonzero start: the null-space component
    // of the iterate must never move.
    let p = gen_synthetic(10, 8, 5, true, 23).unwrap();
    let oracle = svd(&p.a).unwrap();
    assert!(oracle.null_basis().ncols() > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x0 = Array1::from_shape_fn(8, |_| rng.gen_range(-1.0..1.0));
    let pn_x0 = oracle.project_null(x0.view()).unwrap();
    for (name, policy) in policies(10) {
        let config = SolverConfig::new(x0.clone(), 600).record_iterates(true);
        let trace =
            run_with_oracle(&p, &oracle, &RowSelector::new(policy, 31), &config, false).unwrap();
        for rec in &trace.records {
            let x = rec.iterate.as_ref().unwrap();
            let d = x - &pn_x0;
            let dnorm = d.dot(&d).sqrt();
            for v in oracle.null_basis().columns() {
                assert!(
                    v.dot(&d).abs() <= 1e-10 * dnorm,
                    "{name} k={}: null component {}",
                    rec.k,
                    v.dot(&d).abs() / dnorm
                );
            }
        }
    }
}

#[test]
fn cyclic_sweep_reaches_the_projected_solution() {
    // Rank-deficient consistent system, nonzero start: the limit is
    // P_N(A)x₀ + x†, approached geometrically.
    let p = gen_synthetic(8, 6, 4, true, 42).unwrap();
    let oracle = svd(&p.a).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x0 = Array1::from_shape_fn(6, |_| rng.gen_range(-1.0..1.0));
    let target = target_of(&p, &oracle, x0.view());
    let config = SolverConfig::new(x0, 100_000).record_every(1000);
    let trace = run_with_oracle(
        &p,
        &oracle,
        &RowSelector::new(SelectionPolicy::Cyclic, 0),
        &config,
        false,
    )
    .unwrap();
    assert!(
        trace.final_error() <= 1e-6 * trace.initial_error(),
        "e_N/e_0 = {}",
        trace.final_error() / trace.initial_error()
    );
    let diff = &trace.final_iterate - &target;
    let tnorm = target.dot(&target).sqrt();
    assert!(diff.dot(&diff).sqrt() <= 1e-5 * tnorm);
}
