//! Test-problem construction: midpoint-rule discretizations of three
//! classical first-kind Fredholm integral equations (phillips, gravity,
//! shaw), seeded synthetic systems with a prescribed spectrum, the
//! additive noise model for perturbed right-hand sides, and a text file
//! format for problems.
//!
//! Every generator computes `b = A·x_true`, so the discrete system is
//! consistent by construction and `δ = 0` experiments are exact.

mod io;

pub use io::{load_problem, save_problem};

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::row_norms;

/// A dense linear system with optional noisy right-hand side and optional
/// generating solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProblem {
    /// Coefficient matrix, m×n row-major.
    pub a: Array2<f64>,
    /// Exact right-hand side, length m.
    pub b: Array1<f64>,
    /// Perturbed right-hand side, length m. Present only together with
    /// `delta`.
    pub b_noisy: Option<Array1<f64>>,
    /// Noise level δ of `b_noisy`.
    pub delta: Option<f64>,
    /// The solution the right-hand side was generated from, length n.
    pub x_true: Option<Array1<f64>>,
    /// Problem name, e.g. `shaw-100`.
    pub label: String,
}

impl LinearProblem {
    /// Number of equations.
    pub fn nrows(&self) -> usize {
        self.a.nrows()
    }

    /// Number of unknowns.
    pub fn ncols(&self) -> usize {
        self.a.ncols()
    }

    /// The right-hand side an iteration should use.
    ///
    /// Fails when `use_noisy` is set but no noisy data is attached.
    pub fn rhs(&self, use_noisy: bool) -> Result<ArrayView1<'_, f64>> {
        if use_noisy {
            self.b_noisy
                .as_ref()
                .map(|b| b.view())
                .ok_or_else(|| Error::invalid("problem has no noisy right-hand side"))
        } else {
            Ok(self.b.view())
        }
    }

    /// Attach a noisy right-hand side generated by [`add_noise`].
    pub fn with_noise(mut self, delta: f64, mode: NoiseMode, seed: u64) -> Result<Self> {
        self.b_noisy = Some(add_noise(self.b.view(), delta, mode, seed)?);
        self.delta = Some(delta);
        Ok(self)
    }

    /// Check the structural invariants: consistent dimensions, finite
    /// entries, `b_noisy` paired with `delta`.
    pub fn validate(&self) -> Result<()> {
        let (m, n) = self.a.dim();
        if m == 0 || n == 0 {
            return Err(Error::invalid("matrix must have at least one row and column"));
        }
        if self.b.len() != m {
            return Err(Error::invalid(format!("b has length {}, expected {m}", self.b.len())));
        }
        if let Some(x) = &self.x_true {
            if x.len() != n {
                return Err(Error::invalid(format!("x_true has length {}, expected {n}", x.len())));
            }
        }
        if let Some(bn) = &self.b_noisy {
            if bn.len() != m {
                return Err(Error::invalid(format!("b_noisy has length {}, expected {m}", bn.len())));
            }
            match self.delta {
                None => return Err(Error::invalid("b_noisy present without a noise level")),
                Some(d) if d < 0.0 => return Err(Error::invalid("noise level must be >= 0")),
                _ => {}
            }
        }
        let finite = self.a.iter().all(|x| x.is_finite())
            && self.b.iter().all(|x| x.is_finite())
            && self.b_noisy.iter().flatten().all(|x| x.is_finite())
            && self.x_true.iter().flatten().all(|x| x.is_finite());
        if !finite {
            return Err(Error::invalid("problem contains non-finite values"));
        }
        Ok(())
    }
}

/// How [`add_noise`] perturbs a right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// `bᵢ + δ·maxᵢ|bᵢ|`: the same offset added to every component.
    PaperOffset,
    /// `bᵢ + δ·maxᵢ|bᵢ|·uᵢ` with `uᵢ` uniform in [−1, 1] from the seed.
    SignedUniform,
}

/// Perturb `b` at noise level `delta`.
///
/// The seed only matters in [`NoiseMode::SignedUniform`].
pub fn add_noise(b: ArrayView1<'_, f64>, delta: f64, mode: NoiseMode, seed: u64) -> Result<Array1<f64>> {
    if delta < 0.0 {
        return Err(Error::invalid("noise level must be >= 0"));
    }
    let scale = delta * b.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    Ok(match mode {
        NoiseMode::PaperOffset => b.mapv(|x| x + scale),
        NoiseMode::SignedUniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            b.mapv(|x| x + scale * rng.gen_range(-1.0..=1.0))
        }
    })
}

fn midpoints(lo: f64, hi: f64, n: usize) -> (f64, Vec<f64>) {
    let h = (hi - lo) / n as f64;
    (h, (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect())
}

fn kernel_problem(n: usize, lo: f64, hi: f64, kernel: impl Fn(f64, f64) -> f64, x_true: impl Fn(f64) -> f64, label: String) -> LinearProblem {
    let (h, t) = midpoints(lo, hi, n);
    let a = Array2::from_shape_fn((n, n), |(i, j)| h * kernel(t[i], t[j]));
    let xt = Array1::from_iter(t.iter().map(|&tj| x_true(tj)));
    let b = a.dot(&xt);
    LinearProblem { a, b, b_noisy: None, delta: None, x_true: Some(xt), label }
}

pub(crate) fn phillips_kernel(s: f64, t: f64) -> f64 {
    let u = s - t;
    if u.abs() < 3.0 { 1.0 + (PI * u / 3.0).cos() } else { 0.0 }
}

pub(crate) fn gravity_kernel(d: f64, s: f64, t: f64) -> f64 {
    d * (d * d + (s - t) * (s - t)).powf(-1.5)
}

pub(crate) fn shaw_kernel(s: f64, t: f64) -> f64 {
    let u = PI * (s.sin() + t.sin());
    let sinc = if u == 0.0 { 1.0 } else { u.sin() / u };
    let c = s.cos() + t.cos();
    c * c * sinc * sinc
}

/// The mildly ill-posed convolution problem on [−6, 6]: kernel
/// `1 + cos(π(s−t)/3)` cut off at |s−t| ≥ 3, solution of the same shape.
pub fn gen_phillips(n: usize) -> Result<LinearProblem> {
    if n < 2 {
        return Err(Error::invalid("phillips requires n >= 2"));
    }
    Ok(kernel_problem(
        n,
        -6.0,
        6.0,
        phillips_kernel,
        |t| if t.abs() < 3.0 { 1.0 + (PI * t / 3.0).cos() } else { 0.0 },
        format!("phillips-{n}"),
    ))
}

/// The severely ill-posed gravity surveying problem on [0, 1]: kernel
/// `d(d² + (s−t)²)^(−3/2)` at depth `d`, solution `sin(πt) + 0.5 sin(2πt)`.
pub fn gen_gravity(n: usize, d: f64) -> Result<LinearProblem> {
    if n < 2 {
        return Err(Error::invalid("gravity requires n >= 2"));
    }
    if d <= 0.0 {
        return Err(Error::invalid("gravity requires depth d > 0"));
    }
    Ok(kernel_problem(
        n,
        0.0,
        1.0,
        |s, t| gravity_kernel(d, s, t),
        |t| (PI * t).sin() + 0.5 * (2.0 * PI * t).sin(),
        format!("gravity-{n}"),
    ))
}

/// The severely ill-posed one-dimensional image restoration problem on
/// [−π/2, π/2]: kernel `(cos s + cos t)²·sinc²(π(sin s + sin t))`, solution
/// a pair of Gaussian humps. `n` must be even so the midpoint grid is
/// symmetric about 0.
pub fn gen_shaw(n: usize) -> Result<LinearProblem> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::invalid("shaw requires even n >= 2"));
    }
    Ok(kernel_problem(
        n,
        -PI / 2.0,
        PI / 2.0,
        shaw_kernel,
        |t| 2.0 * (-6.0 * (t - 0.8) * (t - 0.8)).exp() + (-2.0 * (t + 0.5) * (t + 0.5)).exp(),
        format!("shaw-{n}"),
    ))
}

/// Orthonormalize gaussian columns by modified Gram-Schmidt with one
/// re-orthogonalization pass.
fn random_orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut q = Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal));
    for j in 0..cols {
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i).to_owned();
                let proj = qi.dot(&q.column(j));
                q.column_mut(j).zip_mut_with(&qi, |x, &y| *x -= proj * y);
            }
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        q.column_mut(j).mapv_inplace(|x| x / norm);
    }
    q
}

/// Seeded random system `A = U_r Σ V_rᵀ` with the given singular values.
///
/// `consistent` builds `b = A·x_true`; otherwise an off-range component of
/// norm `0.1·‖A·x_true‖₂` is added, which requires `rank < m`.
pub fn gen_synthetic_with_spectrum(
    m: usize,
    n: usize,
    sigmas: &[f64],
    consistent: bool,
    seed: u64,
) -> Result<LinearProblem> {
    let rank = sigmas.len();
    if rank == 0 || rank > m.min(n) {
        return Err(Error::invalid(format!("rank {rank} infeasible for {m}x{n}")));
    }
    if sigmas.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::invalid("singular values must be finite and positive"));
    }
    if !consistent && rank == m {
        return Err(Error::invalid("an inconsistent system requires rank < m"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (u, v) = loop {
        let u = random_orthonormal(m, rank, &mut rng);
        let v = random_orthonormal(n, rank, &mut rng);
        let mut scaled = u.clone();
        for (mut col, &s) in scaled.columns_mut().into_iter().zip(sigmas) {
            col.mapv_inplace(|x| x * s);
        }
        let a = scaled.dot(&v.t());
        if row_norms(&a).iter().all(|&r| r >= 1e-8) {
            break (u, v);
        }
    };
    let mut scaled = u.clone();
    for (mut col, &s) in scaled.columns_mut().into_iter().zip(sigmas) {
        col.mapv_inplace(|x| x * s);
    }
    let a = scaled.dot(&v.t());

    let x_true = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
    let b_exact = a.dot(&x_true);
    let b = if consistent {
        b_exact
    } else {
        // Off-range component: project a gaussian onto R(A)^⊥ and scale.
        let w0 = Array1::from_shape_fn(m, |_| rng.sample::<f64, _>(StandardNormal));
        let mut w = &w0 - &u.dot(&u.t().dot(&w0));
        let wnorm = w.dot(&w).sqrt();
        if wnorm <= 1e-12 {
            return Err(Error::NumericalFailure("off-range component vanished".into()));
        }
        let target = 0.1 * b_exact.dot(&b_exact).sqrt();
        w.mapv_inplace(|x| x * target / wnorm);
        &b_exact + &w
    };

    Ok(LinearProblem {
        a,
        b,
        b_noisy: None,
        delta: None,
        x_true: Some(x_true),
        label: format!("synthetic-{m}x{n}-r{rank}-s{seed}"),
    })
}

/// Seeded random system with `rank` log-spaced singular values in
/// [10⁻², 1].
pub fn gen_synthetic(m: usize, n: usize, rank: usize, consistent: bool, seed: u64) -> Result<LinearProblem> {
    if rank == 0 || rank > m.min(n) {
        return Err(Error::invalid(format!("rank {rank} infeasible for {m}x{n}")));
    }
    let sigmas: Vec<f64> = if rank == 1 {
        vec![1.0]
    } else {
        (0..rank)
            .map(|j| 10f64.powf(-2.0 * j as f64 / (rank - 1) as f64))
            .collect()
    };
    gen_synthetic_with_spectrum(m, n, &sigmas, consistent, seed)
}

/// Largest absolute component, used by tests and diagnostics to reason
/// about the noise scale.
pub fn max_abs(v: ArrayView1<'_, f64>) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}
