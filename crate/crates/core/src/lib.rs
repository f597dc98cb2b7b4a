//! Row-action solvers for dense linear systems `Ax = b`: cyclic Kaczmarz,
//! randomized Kaczmarz with row-norm weighting, and a block randomized
//! variant over a fixed partition of the rows.
//!
//! The crate is built around measuring what these iterations actually do.
//! An SVD oracle supplies the Moore-Penrose solution `x†` and the null
//! space projector `P_N(A)`, every run records the error
//! `e_k = ‖x_k − P_N(A)x₀ − x†‖₂`, and the `bounds` module evaluates the
//! published error estimates for each method on the same iteration grid so
//! bound and measurement can be compared curve against curve. Generators
//! for three classical ill-posed Fredholm test problems (phillips, gravity,
//! shaw) plus seeded synthetic systems provide the experiment substrate.

pub mod bounds;
pub mod error;
pub mod linalg;
pub mod problems;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::{frobenius_norm, generalized_condition, row_norms, svd, SpectralCondition, SvdOracle};
pub use problems::{LinearProblem, NoiseMode};
pub use solvers::{
    aggregate_traces, kaczmarz_step, normalize_system, partition_rows, run, run_with_oracle,
    AggregateTrace, IterationTrace, Partition, PartitionStrategy, RowSelector, SelectionPolicy,
    SolverConfig, TerminationReason, TraceRecord,
};
pub use bounds::{
    angle_gap_bound, block_bound, cyclic_bound, expected_step_identity, normalized_bound,
    rk_bound, rk_prior_bound, row_restricted_pinv_norm, semi_convergence_scan, BoundCurve,
    BoundInputs, BoundSource, CurveStatus, SemiConvergence,
};
