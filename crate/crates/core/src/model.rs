//! The problem instance: a normal law `N(μ, Σ)` restricted to `a ≤ x ≤ b`.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, standardize, SymMatrix};
use crate::prob::{mvn_rect_prob, QmcConfig, RectProbResult};

/// Relative width below which a box side counts as degenerate.
pub const MIN_RELATIVE_WIDTH: f64 = 1e-12;

/// Validated truncated multivariate normal problem `(μ, Σ, a, b)`.
#[derive(Debug, Clone)]
pub struct TruncatedMvnSpec {
    mean: Vec<f64>,
    cov: SymMatrix,
    lower: Vec<f64>,
    upper: Vec<f64>,
    alpha_cache: Option<RectProbResult>,
}

impl TruncatedMvnSpec {
    /// Validates and builds a problem instance.
    ///
    /// Bounds may be infinite; every side must satisfy `a_i < b_i` with a width
    /// of at least `1e-12 · √σ_ii`, and `Σ` must be positive definite.
    pub fn new(mean: Vec<f64>, cov: SymMatrix, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = cov.order();
        if mean.len() != d || lower.len() != d || upper.len() != d {
            return Err(Error::DimensionMismatch {
                what: format!(
                    "mean {}, lower {}, upper {} for covariance of order {d}",
                    mean.len(),
                    lower.len(),
                    upper.len()
                ),
            });
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Domain { what: "mean must be finite".into() });
        }
        if lower.iter().chain(&upper).any(|v| v.is_nan()) {
            return Err(Error::Domain { what: "bounds must not be NaN".into() });
        }
        cholesky(&cov)?;
        for i in 0..d {
            let (a, b) = (lower[i], upper[i]);
            let width = b - a;
            if a == f64::INFINITY
                || b == f64::NEG_INFINITY
                || !(width > MIN_RELATIVE_WIDTH * cov.get(i, i).sqrt())
            {
                return Err(Error::EmptyBox { index: i, lower: a, upper: b });
            }
        }
        Ok(Self { mean, cov, lower, upper, alpha_cache: None })
    }

    /// Standard `N(0, Σ)` with no truncation.
    pub fn untruncated(mean: Vec<f64>, cov: SymMatrix) -> Result<Self> {
        let d = cov.order();
        Self::new(mean, cov, vec![f64::NEG_INFINITY; d], vec![f64::INFINITY; d])
    }

    pub fn dim(&self) -> usize {
        self.cov.order()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &SymMatrix {
        &self.cov
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn alpha_cache(&self) -> Option<&RectProbResult> {
        self.alpha_cache.as_ref()
    }

    /// Whether `x` lies in the closed box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Returns a copy with the truncation mass `α` computed and cached.
    pub fn with_alpha(mut self, cfg: &QmcConfig) -> Result<Self> {
        if self.alpha_cache.is_none() {
            self.alpha_cache = Some(self.compute_alpha(cfg)?);
        }
        Ok(self)
    }

    /// Copy with a known `α` cached.
    pub(crate) fn with_alpha_value(&self, alpha: RectProbResult) -> TruncatedMvnSpec {
        let mut out = self.clone();
        out.alpha_cache = Some(alpha);
        out
    }

    /// Cached `α` if present, otherwise computed afresh.
    pub fn alpha(&self, cfg: &QmcConfig) -> Result<RectProbResult> {
        match &self.alpha_cache {
            Some(a) => Ok(a.clone()),
            None => self.compute_alpha(cfg),
        }
    }

    fn compute_alpha(&self, cfg: &QmcConfig) -> Result<RectProbResult> {
        let s = standardize(self);
        mvn_rect_prob(&s.corr, &s.lower, &s.upper, cfg)
    }

    /// The same law shifted by `c`: `(μ + c, Σ, a + c, b + c)`.
    pub fn shifted(&self, c: &[f64]) -> Result<Self> {
        let add = |v: &[f64]| v.iter().zip(c).map(|(x, s)| x + s).collect::<Vec<_>>();
        Self::new(add(&self.mean), self.cov.clone(), add(&self.lower), add(&self.upper))
    }

    /// The same law under `x ↦ D x` for a positive diagonal `D`.
    pub fn scaled(&self, d: &[f64]) -> Result<Self> {
        if d.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Domain { what: "scale factors must be positive".into() });
        }
        let mul = |v: &[f64]| v.iter().zip(d).map(|(x, s)| x * s).collect::<Vec<_>>();
        Self::new(mul(&self.mean), self.cov.scaled(d), mul(&self.lower), mul(&self.upper))
    }

    /// Variables reordered so that new variable `i` is old variable `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let pick = |v: &[f64]| perm.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self::new(pick(&self.mean), self.cov.permuted(perm), pick(&self.lower), pick(&self.upper))
    }

    /// Marginal problem on the variables `idx`.
    pub fn marginal(&self, idx: &[usize]) -> Result<Self> {
        self.permuted(idx)
    }
}
