//! Dense symmetric linear algebra for small problems (d ≤ 25).
//!
//! Everything here is value-typed: matrices are immutable after construction
//! and every operation returns a fresh result. Positive definiteness is only
//! ever established through Cholesky pivots.

use crate::error::{Error, Result};
use crate::model::TruncatedMvnSpec;

/// Largest relative asymmetry tolerated when constructing a [`SymMatrix`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch { what: "ragged matrix rows".into() });
        }
        Ok(Self::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn add(&self, other: &Matrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j) + other.get(i, j))
    }

    pub fn sub(&self, other: &Matrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self.get(i, j) - other.get(i, j))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    /// Block `rows × cols` selected by index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Symmetric matrix. Symmetry is exact: the stored entries satisfy
/// `m[i][j] == m[j][i]` bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: Matrix,
}

impl SymMatrix {
    /// Builds a symmetric matrix from rows, storing `(M + Mᵀ)/2`.
    ///
    /// Input whose relative asymmetry exceeds [`SYMMETRY_TOLERANCE`] is
    /// rejected rather than silently repaired.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = Matrix::from_rows(rows)?;
        Self::from_matrix(&m)
    }

    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::DimensionMismatch {
                what: format!("matrix is {}x{}, expected square", m.rows, m.cols),
            });
        }
        if m.rows == 0 {
            return Err(Error::DimensionMismatch { what: "matrix has order 0".into() });
        }
        if m.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain { what: "matrix has non-finite entries".into() });
        }
        let asym = relative_asymmetry(m);
        if asym > SYMMETRY_TOLERANCE {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(Self::symmetrized(m))
    }

    /// Stores `(M + Mᵀ)/2` without any tolerance check.
    pub(crate) fn symmetrized(m: &Matrix) -> Self {
        let n = m.rows;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            out.set(i, i, m.get(i, i));
            for j in 0..i {
                let v = 0.5 * (m.get(i, j) + m.get(j, i));
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        Self { inner: out }
    }

    pub fn identity(n: usize) -> Self {
        Self { inner: Matrix::identity(n) }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self { inner: Matrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }) }
    }

    pub fn order(&self) -> usize {
        self.inner.rows
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.order()).map(|i| self.get(i, i)).collect()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn principal(&self, idx: &[usize]) -> SymMatrix {
        Self { inner: self.inner.select(idx, idx) }
    }

    /// Simultaneous row/column permutation: `out[i][j] = self[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> SymMatrix {
        self.principal(perm)
    }

    /// `D M D` for a diagonal `D`.
    pub fn scaled(&self, d: &[f64]) -> SymMatrix {
        let n = self.order();
        Self { inner: Matrix::from_fn(n, n, |i, j| d[i] * self.get(i, j) * d[j]) }
    }

    pub fn inverse(&self) -> Result<SymMatrix> {
        Ok(cholesky(self)?.inverse())
    }
}

fn relative_asymmetry(m: &Matrix) -> f64 {
    let scale = m.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for i in 0..m.rows {
        for j in 0..i {
            worst = worst.max((m.get(i, j) - m.get(j, i)).abs());
        }
    }
    worst / scale
}

/// Lower-triangular Cholesky factor of a (possibly permuted) symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    lower: Matrix,
    source_order: Vec<usize>,
}

impl CholeskyFactor {
    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// The permutation applied before factoring: row `i` of the factor
    /// corresponds to variable `source_order[i]` of the input.
    pub fn source_order(&self) -> &[usize] {
        &self.source_order
    }

    pub fn order(&self) -> usize {
        self.lower.rows
    }

    /// Solves `L y = b` for `y`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.order();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = self.lower.row(i);
            let s: f64 = row[..i].iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            y[i] = (b[i] - s) / row[i];
        }
        y
    }

    /// Solves `Lᵀ x = y` for `x`.
    pub fn backward(&self, y: &[f64]) -> Vec<f64> {
        let n = self.order();
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.lower.get(k, i) * x[k];
            }
            x[i] = s / self.lower.get(i, i);
        }
        x
    }

    /// Solves `(L Lᵀ) x = b` in the factor's own (permuted) ordering.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }

    /// Inverse of the factored matrix, expressed in the original ordering.
    pub fn inverse(&self) -> SymMatrix {
        let n = self.order();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv.set(self.source_order[i], self.source_order[j], col[i]);
            }
        }
        SymMatrix::symmetrized(&inv)
    }

    /// `L Lᵀ`, in the factor's permuted ordering.
    pub fn reconstruct(&self) -> Matrix {
        self.lower.matmul(&self.lower.transpose())
    }

    pub fn log_det(&self) -> f64 {
        (0..self.order()).map(|i| self.lower.get(i, i).ln()).sum::<f64>() * 2.0
    }
}

/// Cholesky factorization `m = L Lᵀ`.
pub fn cholesky(m: &SymMatrix) -> Result<CholeskyFactor> {
    let order: Vec<usize> = (0..m.order()).collect();
    cholesky_permuted(m, &order)
}

/// Cholesky factorization of `P m Pᵀ` where `P` maps row `i` to `perm[i]`.
pub fn cholesky_permuted(m: &SymMatrix, perm: &[usize]) -> Result<CholeskyFactor> {
    let n = m.order();
    if perm.len() != n {
        return Err(Error::DimensionMismatch { what: "permutation length".into() });
    }
    let max_diag = (0..n).map(|i| m.get(i, i).abs()).fold(0.0, f64::max);
    let tol = n as f64 * f64::EPSILON * max_diag;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let pj = perm[j];
        let mut s = m.get(pj, pj);
        for k in 0..j {
            s -= l.get(j, k) * l.get(j, k);
        }
        if s <= tol || !s.is_finite() {
            return Err(Error::NotPositiveDefinite { index: pj, pivot: s });
        }
        let ljj = s.sqrt();
        l.set(j, j, ljj);
        for i in j + 1..n {
            let pi = perm[i];
            let mut s = m.get(pi, pj);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(CholeskyFactor { lower: l, source_order: perm.to_vec() })
}

/// Gaussian conditioning prepared for a fixed set of observed indices.
///
/// The conditional law of `X_free | X_given = v` is
/// `N(μ_free + B (v − μ_given), cond_cov)` with `B = Σ_{free,given} Σ_{given,given}⁻¹`.
#[derive(Debug, Clone)]
pub struct GaussianConditioner {
    free: Vec<usize>,
    given: Vec<usize>,
    coefficients: Matrix,
    cond_cov: SymMatrix,
}

impl GaussianConditioner {
    pub fn new(cov: &SymMatrix, given: &[usize]) -> Result<Self> {
        let d = cov.order();
        if given.is_empty() {
            return Err(Error::Domain { what: "conditioning set is empty".into() });
        }
        let mut seen = vec![false; d];
        for &g in given {
            if g >= d {
                return Err(Error::IndexOutOfRange { index: g, dim: d });
            }
            if seen[g] {
                return Err(Error::DuplicateIndex { index: g });
            }
            seen[g] = true;
        }
        let free: Vec<usize> = (0..d).filter(|i| !seen[*i]).collect();
        if free.is_empty() {
            return Err(Error::Domain { what: "nothing left to condition".into() });
        }
        let s_gg = cov.principal(given);
        let chol = cholesky(&s_gg)?;
        let s_fg = cov.as_matrix().select(&free, given);
        // B = Σ_fg Σ_gg⁻¹, one row at a time.
        let mut coefficients = Matrix::zeros(free.len(), given.len());
        for i in 0..free.len() {
            let row = chol.solve(s_fg.row(i));
            for (j, v) in row.into_iter().enumerate() {
                coefficients.set(i, j, v);
            }
        }
        let s_ff = cov.principal(&free);
        let reduction = coefficients.matmul(&s_fg.transpose());
        let cond_cov = SymMatrix::symmetrized(&s_ff.as_matrix().sub(&reduction));
        // Fails here when the parent is only semi-definite.
        cholesky(&cond_cov)?;
        Ok(Self { free, given: given.to_vec(), coefficients, cond_cov })
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn given(&self) -> &[usize] {
        &self.given
    }

    /// Regression coefficients `Σ_{free,given} Σ_{given,given}⁻¹`.
    pub fn coefficients(&self) -> &Matrix {
        &self.coefficients
    }

    pub fn cond_cov(&self) -> &SymMatrix {
        &self.cond_cov
    }

    /// Conditional mean of the free block given observed `values`.
    pub fn mean(&self, mean: &[f64], values: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> =
            self.given.iter().zip(values).map(|(&g, v)| v - mean[g]).collect();
        let shift = self.coefficients.matvec(&centered);
        self.free.iter().zip(shift).map(|(&f, s)| mean[f] + s).collect()
    }
}

/// Conditional Gaussian law of the unobserved block.
#[derive(Debug, Clone)]
pub struct ConditionalGaussian {
    /// Indices (into the parent) of the remaining variables.
    pub free: Vec<usize>,
    /// Regression coefficients of the free block on the observed one.
    pub mean_shift: Matrix,
    pub base_mean: Vec<f64>,
    pub cond_cov: SymMatrix,
}

/// Mean and covariance of `X_{−G} | X_G = values` for `X ~ N(mean, cov)`.
pub fn condition(
    cov: &SymMatrix,
    mean: &[f64],
    given: &[usize],
    values: &[f64],
) -> Result<ConditionalGaussian> {
    if mean.len() != cov.order() || values.len() != given.len() {
        return Err(Error::DimensionMismatch { what: "condition arguments".into() });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain { what: "conditioning values must be finite".into() });
    }
    let c = GaussianConditioner::new(cov, given)?;
    let base_mean = c.mean(mean, values);
    Ok(ConditionalGaussian {
        free: c.free,
        mean_shift: c.coefficients,
        base_mean,
        cond_cov: c.cond_cov,
    })
}

/// Blocks of `Σ⁻¹` for the split `{0..k} ∪ {k..d}`.
#[derive(Debug, Clone)]
pub struct PartitionedInverse {
    pub omega11: SymMatrix,
    pub omega12: Matrix,
    pub omega21: Matrix,
    pub omega22: SymMatrix,
}

impl PartitionedInverse {
    pub fn assemble(&self) -> SymMatrix {
        let k = self.omega11.order();
        let d = k + self.omega22.order();
        let m = Matrix::from_fn(d, d, |i, j| match (i < k, j < k) {
            (true, true) => self.omega11.get(i, j),
            (true, false) => self.omega12.get(i, j - k),
            (false, true) => self.omega21.get(i - k, j),
            (false, false) => self.omega22.get(i - k, j - k),
        });
        SymMatrix::symmetrized(&m)
    }
}

/// Partitioned inverse via the Schur complement `F₂ = (V₂₂ − V₂₁ V₁₁⁻¹ V₁₂)⁻¹`.
pub fn partitioned_inverse(cov: &SymMatrix, k: usize) -> Result<PartitionedInverse> {
    let d = cov.order();
    if k == 0 || k >= d {
        return Err(Error::IndexOutOfRange { index: k, dim: d });
    }
    let first: Vec<usize> = (0..k).collect();
    let second: Vec<usize> = (k..d).collect();
    let v11_inv = cov.principal(&first).inverse()?;
    let v12 = cov.as_matrix().select(&first, &second);
    let v21 = v12.transpose();
    let v22 = cov.principal(&second);
    // V₁₁⁻¹ V₁₂
    let g = v11_inv.as_matrix().matmul(&v12);
    let schur = SymMatrix::symmetrized(&v22.as_matrix().sub(&v21.matmul(&g)));
    let f2 = schur.inverse()?;
    let omega12 = g.matmul(f2.as_matrix()).scale(-1.0);
    let omega21 = omega12.transpose();
    let inner = Matrix::identity(k).add(&v12.matmul(f2.as_matrix()).matmul(&g.transpose()));
    let omega11 = SymMatrix::symmetrized(&v11_inv.as_matrix().matmul(&inner));
    Ok(PartitionedInverse { omega11, omega12, omega21, omega22: f2 })
}

/// A problem instance mapped onto the standard scale.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub corr: SymMatrix,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Standard deviations `√σ_ii`.
    pub scale: Vec<f64>,
}

/// z-transformation of every variate: correlation matrix plus standardized
/// bounds. Infinite bounds stay infinite.
pub fn standardize(spec: &TruncatedMvnSpec) -> Standardized {
    let cov = spec.cov();
    let d = cov.order();
    let scale: Vec<f64> = (0..d).map(|i| cov.get(i, i).sqrt()).collect();
    let inv: Vec<f64> = scale.iter().map(|s| 1.0 / s).collect();
    let mut corr = cov.scaled(&inv);
    for i in 0..d {
        corr.inner.set(i, i, 1.0);
    }
    let z = |x: f64, i: usize| {
        if x.is_infinite() {
            x
        } else {
            (x - spec.mean()[i]) / scale[i]
        }
    };
    let lower = (0..d).map(|i| z(spec.lower()[i], i)).collect();
    let upper = (0..d).map(|i| z(spec.upper()[i], i)).collect();
    Standardized { corr, lower, upper, scale }
}

/// Maps a correlation-scale covariance back: `D R D`.
pub fn unstandardize_cov(corr_cov: &SymMatrix, scale: &[f64]) -> SymMatrix {
    corr_cov.scaled(scale)
}
