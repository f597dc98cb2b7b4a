//! Dense linear algebra oracle: SVD with a rank decision, Moore-Penrose
//! solutions, and the orthogonal projectors onto the null space and range.
//!
//! Every quantity the iterative solvers are measured against comes from
//! here: the generalized solution `x†`, the projector `P_N(A)` that fixes
//! the affine manifold the iterates live on, the range projector `Q` that
//! splits a right-hand side into consistent and off-range parts, and the
//! condition numbers that drive the error estimates.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, s};

use crate::error::{Error, Result};

/// Euclidean norm of each row of `a`.
///
/// The squared entries sum to the squared Frobenius norm, which is also
/// the normalizing constant of the weighted row-sampling distribution.
pub fn row_norms(a: &Array2<f64>) -> Array1<f64> {
    a.map_axis(Axis(1), |row| row.dot(&row).sqrt())
}

/// Frobenius norm computed entrywise.
pub fn frobenius_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Result of [`SvdOracle::spectral_condition`]: the ratio of extreme
/// singular values of the full factorization, with a flag raised when the
/// smallest one falls below the rank tolerance and the ratio therefore
/// measures roundoff rather than the underlying operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralCondition {
    pub value: f64,
    pub beyond_numerical_rank: bool,
}

/// Full singular value decomposition `A = U Σ Vᵀ` with a numerical rank
/// decision.
///
/// `U` is m×m, `V` is n×n, and the singular values are sorted in
/// descending order. The numerical rank is the number of singular values
/// strictly above the tolerance `τ = max(m,n) · ε · σ₁`.
#[derive(Debug, Clone)]
pub struct SvdOracle {
    u: Array2<f64>,
    v: Array2<f64>,
    sigma: Array1<f64>,
    rank: usize,
    tol: f64,
}

/// Factor `a` and fix its numerical rank.
///
/// Fails with `InvalidInput` on non-finite entries and with
/// `NumericalFailure` if the factorization does not converge.
pub fn svd(a: &Array2<f64>) -> Result<SvdOracle> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Err(Error::invalid("matrix must have at least one row and column"));
    }
    if let Some(((i, j), _)) = a.indexed_iter().find(|(_, x)| !x.is_finite()) {
        return Err(Error::invalid(format!("non-finite entry at ({i}, {j})")));
    }

    let mat = faer::Mat::<f64>::from_fn(m, n, |i, j| a[[i, j]]);
    let fsvd = mat
        .svd()
        .map_err(|e| Error::NumericalFailure(format!("svd did not converge: {e:?}")))?;

    let u = Array2::from_shape_fn((m, m), |(i, j)| fsvd.U()[(i, j)]);
    let v = Array2::from_shape_fn((n, n), |(i, j)| fsvd.V()[(i, j)]);
    let k = m.min(n);
    let sigma = Array1::from_shape_fn(k, |i| fsvd.S()[i]);
    debug_assert!(sigma.windows(2).into_iter().all(|w| w[0] >= w[1]));

    let tol = m.max(n) as f64 * f64::EPSILON * sigma.first().copied().unwrap_or(0.0);
    let rank = sigma.iter().filter(|&&s| s > tol).count();

    Ok(SvdOracle { u, v, sigma, rank, tol })
}

impl SvdOracle {
    /// Singular values in descending order, length `min(m, n)`.
    pub fn singular_values(&self) -> ArrayView1<'_, f64> {
        self.sigma.view()
    }

    /// Numerical rank: the number of singular values above the tolerance.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// The rank tolerance `τ = max(m,n) · ε · σ₁`.
    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    /// Left singular vectors, m×m.
    pub fn u(&self) -> ArrayView2<'_, f64> {
        self.u.view()
    }

    /// Right singular vectors, n×n.
    pub fn v(&self) -> ArrayView2<'_, f64> {
        self.v.view()
    }

    /// Orthonormal basis of the row space `N(A)^⊥`: the first `rank`
    /// right singular vectors, as columns.
    pub fn rowspace_basis(&self) -> ArrayView2<'_, f64> {
        self.v.slice(s![.., ..self.rank])
    }

    /// Orthonormal basis of the null space `N(A)`: the trailing right
    /// singular vectors, as columns (n×(n−rank), possibly empty).
    pub fn null_basis(&self) -> ArrayView2<'_, f64> {
        self.v.slice(s![.., self.rank..])
    }

    /// Orthonormal basis of the range `R(A)`: the first `rank` left
    /// singular vectors, as columns.
    pub fn range_basis(&self) -> ArrayView2<'_, f64> {
        self.u.slice(s![.., ..self.rank])
    }

    /// `P_N(A) x = x − V_ρ V_ρᵀ x`, the orthogonal projection of `x` onto
    /// the null space.
    pub fn project_null(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.ncols() {
            return Err(Error::invalid(format!(
                "project_null expects length {}, got {}",
                self.ncols(),
                x.len()
            )));
        }
        let basis = self.rowspace_basis();
        let coeffs = basis.t().dot(&x);
        Ok(&x - &basis.dot(&coeffs))
    }

    /// `Q y = U_ρ U_ρᵀ y`, the orthogonal projection of `y` onto the range.
    pub fn project_range(&self, y: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if y.len() != self.nrows() {
            return Err(Error::invalid(format!(
                "project_range expects length {}, got {}",
                self.nrows(),
                y.len()
            )));
        }
        let basis = self.range_basis();
        let coeffs = basis.t().dot(&y);
        Ok(basis.dot(&coeffs))
    }

    /// The Moore-Penrose generalized solution `x† = V_ρ Σ_ρ⁻¹ U_ρᵀ b`:
    /// the least-squares solution of minimal norm, orthogonal to `N(A)`.
    pub fn generalized_solution(&self, b: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if b.len() != self.nrows() {
            return Err(Error::invalid(format!(
                "generalized_solution expects length {}, got {}",
                self.nrows(),
                b.len()
            )));
        }
        let mut coeffs = self.range_basis().t().dot(&b);
        for (c, &s) in coeffs.iter_mut().zip(self.sigma.iter()) {
            *c /= s;
        }
        Ok(self.rowspace_basis().dot(&coeffs))
    }

    /// Spectral norm of the pseudoinverse, `‖A†‖₂ = 1/σ_ρ` (0 for the
    /// zero matrix).
    pub fn pinv_norm(&self) -> f64 {
        if self.rank == 0 { 0.0 } else { 1.0 / self.sigma[self.rank - 1] }
    }

    /// Largest singular value.
    pub fn sigma_max(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }

    /// Smallest singular value of the full factorization, below the rank
    /// tolerance or not.
    pub fn sigma_min_raw(&self) -> f64 {
        self.sigma.last().copied().unwrap_or(0.0)
    }

    /// `σ₁/σ_min` of the full factorization, flagged when `σ_min` is
    /// below the rank tolerance.
    pub fn spectral_condition(&self) -> Result<SpectralCondition> {
        if self.rank == 0 {
            return Err(Error::DegenerateMatrix);
        }
        let smin = self.sigma_min_raw();
        Ok(SpectralCondition {
            value: self.sigma_max() / smin,
            beyond_numerical_rank: smin <= self.tol,
        })
    }

    /// Assemble the pseudoinverse `A† = V_ρ Σ_ρ⁻¹ U_ρᵀ` as a dense matrix.
    pub fn pseudoinverse(&self) -> Array2<f64> {
        let mut scaled = self.rowspace_basis().to_owned();
        for (mut col, &s) in scaled.columns_mut().into_iter().zip(self.sigma.iter()) {
            col.mapv_inplace(|x| x / s);
        }
        scaled.dot(&self.range_basis().t())
    }
}

/// Generalized condition number `κ_A = ‖A‖_F ‖A†‖₂ = ‖A‖_F / σ_ρ`, using
/// the tolerance-truncated smallest singular value so it stays finite on
/// numerically rank-deficient matrices.
pub fn generalized_condition(a: &Array2<f64>, oracle: &SvdOracle) -> Result<f64> {
    if oracle.rank() == 0 {
        return Err(Error::DegenerateMatrix);
    }
    Ok(frobenius_norm(a) * oracle.pinv_norm())
}
