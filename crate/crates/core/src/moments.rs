//! First and second moments of the truncated law.
//!
//! The general route differentiates the moment generating function: the mean
//! needs the one-dimensional marginals at the box faces, the second moment
//! additionally needs the bivariate marginals at the box corners. When only a
//! subset of variables is truncated, the moments of that subset are extended
//! to the untruncated variables by regression.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix};
use crate::marginals::{check_alpha, Marginal1d, Marginal2d, MarginalValue};
use crate::model::TruncatedMvnSpec;
use crate::prob::{QmcConfig, RectProbResult, MAX_DIM};
use crate::special::{norm_interval, phi};

/// Largest tolerated asymmetry of the assembled covariance.
pub const MAX_COV_ASYMMETRY: f64 = 1e-5;

/// Smallest univariate normalizing mass for the closed forms.
pub const MIN_UNIVARIATE_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMethod {
    FullFormula,
    JohnsonKotz,
    UnivariateClosedForm,
}

impl MomentMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            MomentMethod::FullFormula => "full-formula",
            MomentMethod::JohnsonKotz => "johnson-kotz",
            MomentMethod::UnivariateClosedForm => "univariate-closed-form",
        }
    }
}

/// Truncated mean and covariance.
#[derive(Debug, Clone)]
pub struct MomentResult {
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
    pub alpha: RectProbResult,
    pub method: MomentMethod,
    /// Estimated absolute error of the largest mean or covariance entry.
    pub error_estimate: f64,
    /// Largest `|C_ij − C_ji|` before symmetrization.
    pub asymmetry: f64,
}

/// Split of the variables into truncated (`T`) and free (`S`) sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub truncated: Vec<usize>,
    pub free: Vec<usize>,
}

impl Partition {
    pub fn is_truncated(&self, i: usize) -> bool {
        self.truncated.contains(&i)
    }
}

/// A variable is truncated when at least one of its bounds is finite.
pub fn detect_partition(spec: &TruncatedMvnSpec) -> Partition {
    let (truncated, free) = (0..spec.dim())
        .partition(|&i| spec.lower()[i] > f64::NEG_INFINITY || spec.upper()[i] < f64::INFINITY);
    Partition { truncated, free }
}

/// Mean and variance of `N(mu, var)` truncated to `[a, b]`.
pub fn univariate_truncated_moments(mu: f64, var: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    if !(var > 0.0) || !mu.is_finite() {
        return Err(Error::Domain { what: format!("mean {mu}, variance {var}") });
    }
    if a.is_nan() || b.is_nan() || !(a < b) {
        return Err(Error::EmptyBox { index: 0, lower: a, upper: b });
    }
    let sd = var.sqrt();
    let lo = (a - mu) / sd;
    let hi = (b - mu) / sd;
    let z = norm_interval(lo, hi);
    if z < MIN_UNIVARIATE_MASS {
        return Err(Error::AlphaTooSmall { alpha: z, error: 0.0 });
    }
    // x·φ(x) and φ(x) both vanish at ±∞.
    let (pa, pb) = (finite_or_zero(lo, phi), finite_or_zero(hi, phi));
    let (xpa, xpb) = (finite_or_zero(lo, |x| x * phi(x)), finite_or_zero(hi, |x| x * phi(x)));
    let ratio = (pa - pb) / z;
    let xi = mu + sd * ratio;
    let var_star = var * (1.0 + (xpa - xpb) / z - ratio * ratio);
    Ok((xi, var_star))
}

#[inline]
fn finite_or_zero(x: f64, f: impl Fn(f64) -> f64) -> f64 {
    if x.is_finite() {
        f(x)
    } else {
        0.0
    }
}

/// Marginal values at the box faces and corners, computed once.
struct CornerTable {
    /// `faces[k] = (F_k(a_k), F_k(b_k))`
    faces: Vec<[MarginalValue; 2]>,
    /// `corners[k][q] = [F_kq(a_k,a_q), F_kq(a_k,b_q), F_kq(b_k,a_q), F_kq(b_k,b_q)]`
    corners: Vec<Vec<[MarginalValue; 4]>>,
}

impl CornerTable {
    fn build(spec: &TruncatedMvnSpec, cfg: &QmcConfig) -> Result<Self> {
        let d = spec.dim();
        let (a, b) = (spec.lower(), spec.upper());
        let mut faces = Vec::with_capacity(d);
        for k in 0..d {
            let m = Marginal1d::new(spec, k, cfg)?;
            faces.push([face(&m, a[k])?, face(&m, b[k])?]);
        }
        let mut corners = vec![vec![[MarginalValue::ZERO; 4]; d]; d];
        for k in 0..d {
            for q in k + 1..d {
                let m = Marginal2d::new(spec, k, q, cfg)?;
                let mut vals = [MarginalValue::ZERO; 4];
                for (slot, (x, y)) in [(a[k], a[q]), (a[k], b[q]), (b[k], a[q]), (b[k], b[q])]
                    .into_iter()
                    .enumerate()
                {
                    if x.is_finite() && y.is_finite() {
                        vals[slot] = m.eval(x, y)?;
                    }
                }
                corners[k][q] = vals;
                // F_qk(y, x) = F_kq(x, y)
                corners[q][k] = [vals[0], vals[2], vals[1], vals[3]];
            }
        }
        Ok(Self { faces, corners })
    }
}

fn face(m: &Marginal1d<'_>, x: f64) -> Result<MarginalValue> {
    if x.is_finite() {
        m.eval(x)
    } else {
        Ok(MarginalValue::ZERO)
    }
}

fn validate_dim(spec: &TruncatedMvnSpec) -> Result<()> {
    if spec.dim() > MAX_DIM {
        return Err(Error::DimensionTooLarge { dim: spec.dim(), max: MAX_DIM });
    }
    Ok(())
}

/// Truncated mean and covariance by the general face/corner formula.
///
/// The computation runs on the centred law `X − μ`; the covariance is
/// unaffected by the shift and `μ` is added back to the mean.
pub fn truncated_moments(spec: &TruncatedMvnSpec, cfg: &QmcConfig) -> Result<MomentResult> {
    validate_dim(spec)?;
    let d = spec.dim();
    let mu = spec.mean().to_vec();
    let neg: Vec<f64> = mu.iter().map(|m| -m).collect();
    let centred = spec.shifted(&neg)?;
    let alpha = match spec.alpha_cache() {
        Some(a) => a.clone(),
        None => centred.alpha(cfg)?,
    };
    check_alpha(&alpha)?;
    let centred = centred.with_alpha_value(alpha.clone());

    let table = CornerTable::build(&centred, cfg)?;
    let sigma = spec.cov();
    let (a, b) = (centred.lower(), centred.upper());
    // Every F value shares the 1/α factor; its relative error scales the
    // assembled terms as a whole and is added once at the end. Only the
    // remaining per-value integration error is summed term by term.
    let rel_alpha = alpha.error_estimate / alpha.value;
    let own = |v: &MarginalValue| (v.error_estimate - v.density * rel_alpha).max(0.0);

    let mut mean = vec![0.0; d];
    let mut mean_err = vec![0.0; d];
    for i in 0..d {
        for k in 0..d {
            let [fa, fb] = table.faces[k];
            mean[i] += sigma.get(i, k) * (fa.density - fb.density);
            mean_err[i] += sigma.get(i, k).abs() * (own(&fa) + own(&fb));
        }
        mean_err[i] += rel_alpha * mean[i].abs();
    }

    // x·F_k(x) at an infinite face is taken as 0.
    let edge = |x: f64, v: &MarginalValue| if x.is_finite() { x * v.density } else { 0.0 };
    let edge_err = |x: f64, v: &MarginalValue| if x.is_finite() { x.abs() * own(v) } else { 0.0 };
    let face_term: Vec<f64> = (0..d)
        .map(|k| edge(a[k], &table.faces[k][0]) - edge(b[k], &table.faces[k][1]))
        .collect();
    let face_term_err: Vec<f64> = (0..d)
        .map(|k| edge_err(a[k], &table.faces[k][0]) + edge_err(b[k], &table.faces[k][1]))
        .collect();
    let corner_term: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            (0..d)
                .map(|q| {
                    if q == k {
                        return 0.0;
                    }
                    let c = &table.corners[k][q];
                    (c[0].density - c[1].density) - (c[2].density - c[3].density)
                })
                .collect()
        })
        .collect();
    let corner_err: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            (0..d)
                .map(|q| table.corners[k][q].iter().map(own).sum())
                .collect()
        })
        .collect();

    let mut second = Matrix::zeros(d, d);
    let mut second_err: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let mut s = sigma.get(i, j);
            let mut e = 0.0;
            for k in 0..d {
                let skk = sigma.get(k, k);
                let sik = sigma.get(i, k);
                s += sik * sigma.get(j, k) * face_term[k] / skk;
                e += (sik * sigma.get(j, k) / skk).abs() * face_term_err[k];
                for q in 0..d {
                    if q == k {
                        continue;
                    }
                    let partial = sigma.get(j, q) - sigma.get(k, q) * sigma.get(j, k) / skk;
                    s += sik * partial * corner_term[k][q];
                    e += (sik * partial).abs() * corner_err[k][q];
                }
            }
            e += rel_alpha * (s - sigma.get(i, j)).abs();
            second.set(i, j, s);
            second_err = second_err.max(e);
        }
    }

    let mut cov = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            cov.set(i, j, second.get(i, j) - mean[i] * mean[j]);
        }
    }
    let mut asymmetry: f64 = 0.0;
    for i in 0..d {
        for j in 0..i {
            asymmetry = asymmetry.max((cov.get(i, j) - cov.get(j, i)).abs());
        }
    }
    if asymmetry > MAX_COV_ASYMMETRY {
        return Err(Error::IntegrationFailure { asymmetry });
    }
    let max_mean = mean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_mean_err = mean_err.iter().fold(0.0f64, |m, v| m.max(*v));
    let error_estimate = max_mean_err.max(second_err + 2.0 * max_mean * max_mean_err);
    let mean = mean.iter().zip(&mu).map(|(m, u)| m + u).collect();
    Ok(MomentResult {
        mean,
        cov: SymMatrix::symmetrized(&cov),
        alpha,
        method: MomentMethod::FullFormula,
        error_estimate,
        asymmetry,
    })
}

/// Extends moments of the truncated subset to all variables by regressing
/// the free variables on the truncated ones.
///
/// `truncated_mean` and `truncated_cov` are the moments of the variables in
/// `partition.truncated` (in that order) after truncation.
pub fn johnson_kotz_extend(
    spec: &TruncatedMvnSpec,
    partition: &Partition,
    truncated_mean: &[f64],
    truncated_cov: &SymMatrix,
    alpha: RectProbResult,
) -> Result<MomentResult> {
    let d = spec.dim();
    let (t, s) = (&partition.truncated, &partition.free);
    if t.len() + s.len() != d {
        return Err(Error::DimensionMismatch { what: "partition does not cover all variables".into() });
    }
    if t.is_empty() {
        return Ok(MomentResult {
            mean: spec.mean().to_vec(),
            cov: spec.cov().clone(),
            alpha,
            method: MomentMethod::JohnsonKotz,
            error_estimate: 0.0,
            asymmetry: 0.0,
        });
    }
    if s.is_empty() {
        return Err(Error::EmptyFreeSet);
    }
    if truncated_mean.len() != t.len() || truncated_cov.order() != t.len() {
        return Err(Error::DimensionMismatch { what: "truncated-subset moments".into() });
    }
    let sigma = spec.cov();
    let mu = spec.mean();
    let v11_inv = sigma.principal(t).inverse()?;
    let v12 = sigma.as_matrix().select(t, s);
    let v22 = sigma.principal(s);
    // Regression coefficients V₁₁⁻¹ V₁₂ (k × (d−k)).
    let coef = v11_inv.as_matrix().matmul(&v12);

    let dev: Vec<f64> = t.iter().zip(truncated_mean).map(|(&i, x)| x - mu[i]).collect();
    let free_shift = coef.transpose().matvec(&dev);

    let u11 = truncated_cov.as_matrix();
    let cross = u11.matmul(&coef);
    // V₁₁⁻¹ − V₁₁⁻¹ U₁₁ V₁₁⁻¹
    let inner = v11_inv.as_matrix().sub(&v11_inv.as_matrix().matmul(u11).matmul(v11_inv.as_matrix()));
    let free_cov = v22.as_matrix().sub(&v12.transpose().matmul(&inner).matmul(&v12));

    let mut mean = vec![0.0; d];
    let mut cov = Matrix::zeros(d, d);
    for (p, &i) in t.iter().enumerate() {
        mean[i] = truncated_mean[p];
        for (p2, &j) in t.iter().enumerate() {
            cov.set(i, j, u11.get(p, p2));
        }
        for (q, &j) in s.iter().enumerate() {
            cov.set(i, j, cross.get(p, q));
            cov.set(j, i, cross.get(p, q));
        }
    }
    for (q, &i) in s.iter().enumerate() {
        mean[i] = mu[i] + free_shift[q];
        for (q2, &j) in s.iter().enumerate() {
            cov.set(i, j, free_cov.get(q, q2));
        }
    }
    Ok(MomentResult {
        mean,
        cov: SymMatrix::symmetrized(&cov),
        alpha,
        method: MomentMethod::JohnsonKotz,
        error_estimate: 0.0,
        asymmetry: 0.0,
    })
}

/// Moments by the cheapest applicable route.
///
/// * one variable: closed form;
/// * a single truncated variable among several: closed form plus regression;
/// * several truncated variables with free ones: general formula on the
///   truncated subset plus regression;
/// * every variable truncated: general formula.
pub fn moments_auto(spec: &TruncatedMvnSpec, cfg: &QmcConfig) -> Result<MomentResult> {
    validate_dim(spec)?;
    let d = spec.dim();
    let partition = detect_partition(spec);
    let t = &partition.truncated;

    if d == 1 {
        let (xi, var) = univariate_truncated_moments(
            spec.mean()[0],
            spec.cov().get(0, 0),
            spec.lower()[0],
            spec.upper()[0],
        )?;
        let alpha = spec.alpha(cfg)?;
        return Ok(MomentResult {
            mean: vec![xi],
            cov: SymMatrix::diagonal(&[var]),
            alpha,
            method: MomentMethod::UnivariateClosedForm,
            error_estimate: 0.0,
            asymmetry: 0.0,
        });
    }
    if t.is_empty() {
        let alpha = spec.alpha(cfg)?;
        return johnson_kotz_extend(spec, &partition, &[], &SymMatrix::identity(1), alpha);
    }
    if partition.free.is_empty() {
        return truncated_moments(spec, cfg);
    }

    let sub = spec.marginal(t)?;
    let (sub_mean, sub_cov, alpha, sub_err) = if t.len() == 1 {
        let (xi, var) = univariate_truncated_moments(
            sub.mean()[0],
            sub.cov().get(0, 0),
            sub.lower()[0],
            sub.upper()[0],
        )?;
        (vec![xi], SymMatrix::diagonal(&[var]), sub.alpha(cfg)?, 0.0)
    } else {
        let m = truncated_moments(&sub, cfg)?;
        (m.mean, m.cov, m.alpha, m.error_estimate)
    };
    let mut out = johnson_kotz_extend(spec, &partition, &sub_mean, &sub_cov, alpha)?;
    // Errors in the subset moments are carried through the regression.
    let sigma = spec.cov();
    let v11_inv = sigma.principal(t).inverse()?;
    let coef = v11_inv.as_matrix().matmul(&sigma.as_matrix().select(t, &partition.free));
    let gain = 1.0 + coef.max_abs() * t.len() as f64;
    out.error_estimate = sub_err * gain * gain;
    Ok(out)
}
