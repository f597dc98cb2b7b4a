//! The Kaczmarz iteration engine.
//!
//! One step projects the current iterate onto the hyperplane of a single
//! equation. The row is picked by a [`SelectionPolicy`]: fixed cyclic
//! order, random with probability proportional to the squared row norm,
//! uniform (intended for row-normalized systems), or cyclically over the
//! blocks of a fixed [`Partition`] with a uniform draw inside the active
//! block.
//!
//! A run records the error `e_k = ‖x_k − P_N(A)x₀ − x†‖₂` against the SVD
//! oracle of the *exact* system, even when iterating on noisy data; that
//! is the quantity the error estimates in [`crate::bounds`] speak about.
//!
//! Randomness comes from ChaCha8 seeded with the selector's seed, so
//! traces are bitwise reproducible. Replicate `j` of an experiment uses
//! [`replicate_seed`]`(base, j)`.

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{row_norms, svd, SvdOracle};
use crate::problems::LinearProblem;

/// Project `x` onto the hyperplane `(a_i, x) = b_i`:
/// `x' = x + (b_i − (a_i, x))/‖a_i‖² · a_i`.
pub fn kaczmarz_step(x: ArrayView1<'_, f64>, a_i: ArrayView1<'_, f64>, b_i: f64) -> Result<Array1<f64>> {
    if x.len() != a_i.len() {
        return Err(Error::invalid(format!(
            "iterate has length {}, row has length {}",
            x.len(),
            a_i.len()
        )));
    }
    let norm_sq = a_i.dot(&a_i);
    if norm_sq == 0.0 {
        return Err(Error::ZeroRow(0));
    }
    let coef = (b_i - a_i.dot(&x)) / norm_sq;
    let mut out = x.to_owned();
    out.scaled_add(coef, &a_i);
    Ok(out)
}

/// How the next row is chosen at each step.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectionPolicy {
    /// Row `(k mod m) + 1` in 1-based numbering: the classical sweep.
    Cyclic,
    /// Row `i` with probability `‖a_i‖²₂/‖A‖²_F`.
    WeightedRandom,
    /// Every row with probability `1/m`; the natural policy after
    /// [`normalize_system`].
    UniformRandom,
    /// Blocks visited cyclically, a uniform draw inside the active block.
    BlockCyclicUniform(Partition),
}

/// A selection policy plus the seed that makes it reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSelector {
    pub policy: SelectionPolicy,
    pub seed: u64,
}

impl RowSelector {
    pub fn new(policy: SelectionPolicy, seed: u64) -> Self {
        RowSelector { policy, seed }
    }

    /// Bind the policy to a concrete matrix, precomputing the cumulative
    /// weights for the weighted policy.
    pub fn sampler(&self, a: &Array2<f64>) -> Result<RowSampler> {
        RowSampler::new(&self.policy, a)
    }

    /// A fresh generator for this selector's seed.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replicate `j` of an experiment with base seed `base`,
/// `hash(base, j)` so replicates are decorrelated but reproducible.
pub fn replicate_seed(base: u64, replicate: u64) -> u64 {
    splitmix64(splitmix64(base).wrapping_add(splitmix64(replicate)))
}

/// Disjoint nonempty blocks covering the row indices `{0, …, m−1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    m: usize,
}

impl Partition {
    /// Validate that `blocks` is a partition of `{0, …, m−1}`.
    pub fn new(blocks: Vec<Vec<usize>>, m: usize) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("partition needs at least one block"));
        }
        let mut seen = vec![false; m];
        let mut count = 0usize;
        for (bi, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::invalid(format!("block {bi} is empty")));
            }
            for &i in block {
                if i >= m {
                    return Err(Error::invalid(format!("row {i} out of range for m = {m}")));
                }
                if seen[i] {
                    return Err(Error::invalid(format!("row {i} appears in two blocks")));
                }
                seen[i] = true;
                count += 1;
            }
        }
        if count != m {
            return Err(Error::invalid(format!("blocks cover {count} of {m} rows")));
        }
        Ok(Partition { blocks, m })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn min_block_size(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).min().unwrap_or(0)
    }

    /// The block active at step `k` (0-based step counter).
    ///
    /// This matches the published schedule, which starts at block 1 and
    /// advances with the step counter, wrapping the last block in: in
    /// 0-based terms simply `k mod r`.
    pub fn active_block(&self, k: usize) -> usize {
        k % self.blocks.len()
    }
}

/// How [`partition_rows`] distributes rows over blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionStrategy {
    /// Consecutive index ranges with sizes differing by at most one.
    Contiguous,
    /// Row `i` (1-based) goes to block `i mod r`, block `r` taking the
    /// `i mod r = 0` rows.
    Strided,
    /// Shuffle the rows with the seed, then split contiguously.
    SeededRandom(u64),
}

/// Split `{0, …, m−1}` into `r` blocks.
pub fn partition_rows(m: usize, r: usize, strategy: PartitionStrategy) -> Result<Partition> {
    if r == 0 || r > m {
        return Err(Error::invalid(format!("cannot split {m} rows into {r} blocks")));
    }
    let contiguous_split = |order: &[usize]| -> Vec<Vec<usize>> {
        let base = m / r;
        let rem = m % r;
        let mut blocks = Vec::with_capacity(r);
        let mut at = 0;
        for bi in 0..r {
            let len = base + usize::from(bi < rem);
            blocks.push(order[at..at + len].to_vec());
            at += len;
        }
        blocks
    };
    let blocks = match strategy {
        PartitionStrategy::Contiguous => {
            let order: Vec<usize> = (0..m).collect();
            contiguous_split(&order)
        }
        PartitionStrategy::Strided => {
            // 1-based row i goes to block slot i mod r, so the rows with
            // i mod r = 0 form the first block.
            let mut blocks = vec![Vec::new(); r];
            for i in 1..=m {
                blocks[i % r].push(i - 1);
            }
            blocks
        }
        PartitionStrategy::SeededRandom(seed) => {
            let mut order: Vec<usize> = (0..m).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Fisher-Yates
            for i in (1..m).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            contiguous_split(&order)
        }
    };
    Partition::new(blocks, m)
}

/// A [`SelectionPolicy`] bound to a concrete matrix.
#[derive(Debug, Clone)]
pub enum RowSampler {
    Cyclic { m: usize },
    Weighted { cumulative: Vec<f64> },
    Uniform { m: usize },
    BlockCyclic { partition: Partition },
}

impl RowSampler {
    fn new(policy: &SelectionPolicy, a: &Array2<f64>) -> Result<Self> {
        let m = a.nrows();
        Ok(match policy {
            SelectionPolicy::Cyclic => RowSampler::Cyclic { m },
            SelectionPolicy::UniformRandom => RowSampler::Uniform { m },
            SelectionPolicy::WeightedRandom => {
                let mut cumulative = Vec::with_capacity(m);
                let mut acc = 0.0;
                for (i, row) in a.rows().into_iter().enumerate() {
                    let w = row.dot(&row);
                    if w == 0.0 {
                        return Err(Error::ZeroRow(i));
                    }
                    acc += w;
                    cumulative.push(acc);
                }
                if !(acc > 0.0) {
                    return Err(Error::invalid("all sampling weights vanish"));
                }
                RowSampler::Weighted { cumulative }
            }
            SelectionPolicy::BlockCyclicUniform(p) => {
                if p.num_rows() != m {
                    return Err(Error::invalid(format!(
                        "partition covers {} rows, matrix has {m}",
                        p.num_rows()
                    )));
                }
                RowSampler::BlockCyclic { partition: p.clone() }
            }
        })
    }

    /// The 0-based row used by step `k` (the step that produces `x_{k+1}`).
    ///
    /// Cyclic returns `k mod m`, i.e. row `(k mod m) + 1` in the 1-based
    /// numbering of reports. The weighted policy draws by inverse CDF on
    /// the cumulative weights, ties broken toward the lower index.
    pub fn select(&self, k: usize, rng: &mut impl Rng) -> usize {
        match self {
            RowSampler::Cyclic { m } => k % m,
            RowSampler::Uniform { m } => rng.gen_range(0..*m),
            RowSampler::Weighted { cumulative } => {
                let total = *cumulative.last().expect("nonempty");
                let u = rng.gen_range(0.0..total);
                cumulative.partition_point(|&c| c < u).min(cumulative.len() - 1)
            }
            RowSampler::BlockCyclic { partition } => {
                let block = &partition.blocks()[partition.active_block(k)];
                block[rng.gen_range(0..block.len())]
            }
        }
    }

    /// The selection distribution at step `k` as explicit probabilities,
    /// for policies where it is enumerable. `None` for the cyclic policy.
    pub fn distribution(&self, k: usize) -> Option<Vec<(usize, f64)>> {
        match self {
            RowSampler::Cyclic { .. } => None,
            RowSampler::Uniform { m } => {
                Some((0..*m).map(|i| (i, 1.0 / *m as f64)).collect())
            }
            RowSampler::Weighted { cumulative } => {
                let total = *cumulative.last().expect("nonempty");
                let mut prev = 0.0;
                Some(
                    cumulative
                        .iter()
                        .enumerate()
                        .map(|(i, &c)| {
                            let p = (c - prev) / total;
                            prev = c;
                            (i, p)
                        })
                        .collect(),
                )
            }
            RowSampler::BlockCyclic { partition } => {
                let block = &partition.blocks()[partition.active_block(k)];
                let p = 1.0 / block.len() as f64;
                Some(block.iter().map(|&i| (i, p)).collect())
            }
        }
    }
}

/// Initial iterate, iteration budget and trace controls for a run.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Initial iterate, length n.
    pub x0: Array1<f64>,
    /// Number of steps N to perform.
    pub max_iterations: usize,
    /// Stop early once `‖Ax_k − b‖₂` at a recorded step falls to or below
    /// this value; 0 disables the check (the default).
    pub residual_tolerance: f64,
    /// Record every this many steps (the initial state and the final step
    /// are always recorded).
    pub record_every: usize,
    /// Keep a copy of the iterate in each record.
    pub record_iterates: bool,
}

impl SolverConfig {
    pub fn new(x0: Array1<f64>, max_iterations: usize) -> Self {
        SolverConfig {
            x0,
            max_iterations,
            residual_tolerance: 0.0,
            record_every: 1,
            record_iterates: false,
        }
    }

    pub fn zero_start(n: usize, max_iterations: usize) -> Self {
        Self::new(Array1::zeros(n), max_iterations)
    }

    pub fn record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn record_iterates(mut self, yes: bool) -> Self {
        self.record_iterates = yes;
        self
    }

    pub fn residual_tolerance(mut self, tol: f64) -> Self {
        self.residual_tolerance = tol;
        self
    }
}

/// One recorded state of a run.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    /// Iteration count: `x_k` after `k` steps.
    pub k: usize,
    /// 1-based row used by the step that produced this state; `None` for
    /// the initial state.
    pub row: Option<usize>,
    /// `e_k = ‖x_k − P_N(A)x₀ − x†‖₂`.
    pub error: f64,
    /// `‖A x_k − b_used‖₂`.
    pub residual: f64,
    /// The iterate itself, when requested.
    pub iterate: Option<Array1<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    MaxIterations,
    ResidualTolerance,
}

/// The observed history of one run.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub records: Vec<TraceRecord>,
    pub final_iterate: Array1<f64>,
    pub termination: TerminationReason,
}

impl IterationTrace {
    pub fn initial_error(&self) -> f64 {
        self.records.first().map(|r| r.error).unwrap_or(0.0)
    }

    pub fn final_error(&self) -> f64 {
        self.records.last().map(|r| r.error).unwrap_or(0.0)
    }

    pub fn ks(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.k).collect()
    }
}

/// Run the iteration against a precomputed oracle of the exact system.
///
/// The error metric always measures against `P_N(A)x₀ + x†` with
/// `x† = A†b` of the exact right-hand side; with `use_noisy` the steps use
/// `bᵟ` but the yardstick does not move.
pub fn run_with_oracle(
    problem: &LinearProblem,
    oracle: &SvdOracle,
    selector: &RowSelector,
    config: &SolverConfig,
    use_noisy: bool,
) -> Result<IterationTrace> {
    problem.validate()?;
    let (m, n) = problem.a.dim();
    if oracle.nrows() != m || oracle.ncols() != n {
        return Err(Error::invalid("oracle dimensions do not match the problem"));
    }
    if config.x0.len() != n {
        return Err(Error::invalid(format!("x0 has length {}, expected {n}", config.x0.len())));
    }
    if config.max_iterations == 0 || config.record_every == 0 {
        return Err(Error::invalid("max_iterations and record_every must be >= 1"));
    }
    let norms = row_norms(&problem.a);
    if let Some(i) = norms.iter().position(|&x| x == 0.0) {
        return Err(Error::ZeroRow(i));
    }
    let norms_sq: Vec<f64> = norms.iter().map(|&x| x * x).collect();
    let b_used = problem.rhs(use_noisy)?;

    let target = &oracle.project_null(config.x0.view())?
        + &oracle.generalized_solution(problem.b.view())?;

    let sampler = selector.sampler(&problem.a)?;
    let mut rng = selector.rng();

    let mut x = config.x0.clone();
    let metric = |x: &Array1<f64>| {
        let d = x - &target;
        let r = &problem.a.dot(x) - &b_used;
        (d.dot(&d).sqrt(), r.dot(&r).sqrt())
    };

    let mut records = Vec::new();
    let (e0, r0) = metric(&x);
    records.push(TraceRecord {
        k: 0,
        row: None,
        error: e0,
        residual: r0,
        iterate: config.record_iterates.then(|| x.clone()),
    });

    let n_steps = config.max_iterations;
    let mut termination = TerminationReason::MaxIterations;
    for k in 0..n_steps {
        let i = sampler.select(k, &mut rng);
        let row = problem.a.row(i);
        let coef = (b_used[i] - row.dot(&x)) / norms_sq[i];
        x.scaled_add(coef, &row);

        let done = k + 1 == n_steps;
        if (k + 1) % config.record_every == 0 || done {
            let (e, r) = metric(&x);
            records.push(TraceRecord {
                k: k + 1,
                row: Some(i + 1),
                error: e,
                residual: r,
                iterate: config.record_iterates.then(|| x.clone()),
            });
            if config.residual_tolerance > 0.0 && r <= config.residual_tolerance {
                termination = TerminationReason::ResidualTolerance;
                break;
            }
        }
    }

    Ok(IterationTrace { records, final_iterate: x, termination })
}

/// Factor the exact system and run. Prefer [`run_with_oracle`] when doing
/// replicates so the factorization is shared.
pub fn run(
    problem: &LinearProblem,
    selector: &RowSelector,
    config: &SolverConfig,
    use_noisy: bool,
) -> Result<IterationTrace> {
    let oracle = svd(&problem.a)?;
    run_with_oracle(problem, &oracle, selector, config, use_noisy)
}

/// Left-scale by `D = diag(1/‖a₁‖₂, …, 1/‖a_m‖₂)` so every row has unit
/// norm. `b`, and `b_noisy` when present, are scaled by the same `D`;
/// `x_true` is unchanged since the solution set is preserved.
pub fn normalize_system(problem: &LinearProblem) -> Result<LinearProblem> {
    problem.validate()?;
    let norms = row_norms(&problem.a);
    if let Some(i) = norms.iter().position(|&x| x == 0.0) {
        return Err(Error::ZeroRow(i));
    }
    let mut a = problem.a.clone();
    for (mut row, &nrm) in a.rows_mut().into_iter().zip(norms.iter()) {
        row.mapv_inplace(|x| x / nrm);
    }
    let scale = |v: &Array1<f64>| {
        Array1::from_iter(v.iter().zip(norms.iter()).map(|(&x, &nrm)| x / nrm))
    };
    Ok(LinearProblem {
        a,
        b: scale(&problem.b),
        b_noisy: problem.b_noisy.as_ref().map(scale),
        delta: problem.delta,
        x_true: problem.x_true.clone(),
        label: format!("{}-normalized", problem.label),
    })
}

/// Replicate statistics of `e²_k` on a shared record grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateTrace {
    pub ks: Vec<usize>,
    pub mean_e_sq: Vec<f64>,
    pub min_e_sq: Vec<f64>,
    pub max_e_sq: Vec<f64>,
    pub replicates: usize,
}

/// Reduce replicate traces to mean/min/max of `e²_k` per recorded `k`.
///
/// The traces must share the same record grid; summation is in replicate
/// order so the result is bitwise reproducible.
pub fn aggregate_traces(traces: &[IterationTrace]) -> Result<AggregateTrace> {
    let first = traces.first().ok_or_else(|| Error::invalid("no traces to aggregate"))?;
    let ks = first.ks();
    for t in traces {
        if t.ks() != ks {
            return Err(Error::invalid("traces have different record grids"));
        }
    }
    let len = ks.len();
    let mut mean = vec![0.0; len];
    let mut min = vec![f64::INFINITY; len];
    let mut max = vec![0.0f64; len];
    for t in traces {
        for (j, rec) in t.records.iter().enumerate() {
            let e_sq = rec.error * rec.error;
            mean[j] += e_sq;
            min[j] = min[j].min(e_sq);
            max[j] = max[j].max(e_sq);
        }
    }
    let r = traces.len() as f64;
    for v in &mut mean {
        *v /= r;
    }
    Ok(AggregateTrace { ks, mean_e_sq: mean, min_e_sq: min, max_e_sq: max, replicates: traces.len() })
}
