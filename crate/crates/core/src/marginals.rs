//! One- and two-dimensional marginal densities of the truncated law.
//!
//! Both are evaluated as an untruncated normal density times the probability
//! that the remaining variables fall in their box given the fixed ones,
//! divided by `α`. Densities are always in original-variable units.

use crate::error::{Error, Result};
use crate::linalg::{standardize, GaussianConditioner, SymMatrix};
use crate::model::TruncatedMvnSpec;
use crate::prob::{mvn_rect_prob, QmcConfig, RectProbResult};
use crate::special::{bvn_pdf, phi};

/// Smallest usable truncation mass.
pub const MIN_ALPHA: f64 = 1e-10;
/// Largest acceptable relative error of `α`.
pub const MAX_ALPHA_REL_ERROR: f64 = 0.1;

/// Marginal density value with its propagated integration error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalValue {
    pub density: f64,
    pub error_estimate: f64,
}

impl MarginalValue {
    pub const ZERO: MarginalValue = MarginalValue { density: 0.0, error_estimate: 0.0 };
}

/// Rejects truncation masses too small (or too poorly resolved) to divide by.
pub fn check_alpha(alpha: &RectProbResult) -> Result<()> {
    if alpha.value < MIN_ALPHA || alpha.error_estimate > MAX_ALPHA_REL_ERROR * alpha.value {
        return Err(Error::AlphaTooSmall { alpha: alpha.value, error: alpha.error_estimate });
    }
    Ok(())
}

fn check_index(k: usize, d: usize) -> Result<()> {
    if k >= d {
        return Err(Error::IndexOutOfRange { index: k, dim: d });
    }
    Ok(())
}

/// Probability that the free block of a conditioned law lands in its box.
fn conditional_box_prob(
    cond: &GaussianConditioner,
    cond_mean: &[f64],
    lower: &[f64],
    upper: &[f64],
    cfg: &QmcConfig,
) -> Result<RectProbResult> {
    let cov = cond.cond_cov();
    let scale: Vec<f64> = cov.diag().iter().map(|v| v.sqrt()).collect();
    let inv: Vec<f64> = scale.iter().map(|s| 1.0 / s).collect();
    let corr = cov.scaled(&inv);
    let z = |bound: f64, i: usize| {
        if bound.is_infinite() {
            bound
        } else {
            (bound - cond_mean[i]) / scale[i]
        }
    };
    let free = cond.free();
    let lo: Vec<f64> = free.iter().enumerate().map(|(i, &f)| z(lower[f], i)).collect();
    let hi: Vec<f64> = free.iter().enumerate().map(|(i, &f)| z(upper[f], i)).collect();
    mvn_rect_prob(&corr, &lo, &hi, cfg)
}

fn scaled_value(
    density: f64,
    cond: &RectProbResult,
    alpha: &RectProbResult,
) -> MarginalValue {
    let value = density * cond.value / alpha.value;
    let err = density * cond.error_estimate / alpha.value + value * alpha.error_estimate / alpha.value;
    MarginalValue { density: value.max(0.0), error_estimate: err }
}

/// Marginal density `F_k(x)` of variable `k` (zero-based) under the truncated law.
pub fn marginal_pdf_1d(
    spec: &TruncatedMvnSpec,
    k: usize,
    x: f64,
    cfg: &QmcConfig,
) -> Result<MarginalValue> {
    Marginal1d::new(spec, k, cfg)?.eval(x)
}

/// Prepared evaluator for `F_k`; reuses the conditioning work across points.
pub struct Marginal1d<'a> {
    spec: &'a TruncatedMvnSpec,
    k: usize,
    cfg: &'a QmcConfig,
    alpha: RectProbResult,
    cond: Option<GaussianConditioner>,
}

impl<'a> Marginal1d<'a> {
    pub fn new(spec: &'a TruncatedMvnSpec, k: usize, cfg: &'a QmcConfig) -> Result<Self> {
        check_index(k, spec.dim())?;
        let alpha = spec.alpha(cfg)?;
        check_alpha(&alpha)?;
        let cond = if spec.dim() > 1 {
            Some(GaussianConditioner::new(spec.cov(), &[k])?)
        } else {
            None
        };
        Ok(Self { spec, k, cfg, alpha, cond })
    }

    pub fn alpha(&self) -> &RectProbResult {
        &self.alpha
    }

    pub fn eval(&self, x: f64) -> Result<MarginalValue> {
        let k = self.k;
        let spec = self.spec;
        if x.is_nan() {
            return Err(Error::Domain { what: "evaluation point is NaN".into() });
        }
        if x < spec.lower()[k] || x > spec.upper()[k] || x.is_infinite() {
            return Ok(MarginalValue::ZERO);
        }
        let sd = spec.cov().get(k, k).sqrt();
        let density = phi((x - spec.mean()[k]) / sd) / sd;
        let cond_prob = match &self.cond {
            None => RectProbResult { value: 1.0, error_estimate: 0.0, points_used: 0, shifts_used: 0 },
            Some(c) => {
                let m = c.mean(spec.mean(), &[x]);
                conditional_box_prob(c, &m, spec.lower(), spec.upper(), self.cfg)?
            }
        };
        Ok(scaled_value(density, &cond_prob, &self.alpha))
    }
}

/// Bivariate marginal density `F_{q,r}(x, y)` under the truncated law.
pub fn marginal_pdf_2d(
    spec: &TruncatedMvnSpec,
    q: usize,
    r: usize,
    x: f64,
    y: f64,
    cfg: &QmcConfig,
) -> Result<MarginalValue> {
    Marginal2d::new(spec, q, r, cfg)?.eval(x, y)
}

/// Prepared evaluator for `F_{q,r}` on the standardized scale.
pub struct Marginal2d<'a> {
    spec: &'a TruncatedMvnSpec,
    q: usize,
    r: usize,
    cfg: &'a QmcConfig,
    alpha: RectProbResult,
    corr: SymMatrix,
    std_lower: Vec<f64>,
    std_upper: Vec<f64>,
    scale: Vec<f64>,
    cond: Option<GaussianConditioner>,
}

impl<'a> Marginal2d<'a> {
    pub fn new(spec: &'a TruncatedMvnSpec, q: usize, r: usize, cfg: &'a QmcConfig) -> Result<Self> {
        let d = spec.dim();
        check_index(q, d)?;
        check_index(r, d)?;
        if q == r {
            return Err(Error::DuplicateIndex { index: q });
        }
        let alpha = spec.alpha(cfg)?;
        check_alpha(&alpha)?;
        let s = standardize(spec);
        let cond = if d > 2 {
            Some(GaussianConditioner::new(&s.corr, &[q, r])?)
        } else {
            None
        };
        Ok(Self {
            spec,
            q,
            r,
            cfg,
            alpha,
            corr: s.corr,
            std_lower: s.lower,
            std_upper: s.upper,
            scale: s.scale,
            cond,
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<MarginalValue> {
        let (q, r, spec) = (self.q, self.r, self.spec);
        if x.is_nan() || y.is_nan() {
            return Err(Error::Domain { what: "evaluation point is NaN".into() });
        }
        let inside = |v: f64, i: usize| {
            v.is_finite() && v >= spec.lower()[i] && v <= spec.upper()[i]
        };
        if !inside(x, q) || !inside(y, r) {
            return Ok(MarginalValue::ZERO);
        }
        let zq = (x - spec.mean()[q]) / self.scale[q];
        let zr = (y - spec.mean()[r]) / self.scale[r];
        let rho = self.corr.get(q, r);
        let density = bvn_pdf(zq, zr, rho)? / (self.scale[q] * self.scale[r]);
        let cond_prob = match &self.cond {
            // Nothing left to integrate: the bivariate marginal is the density itself.
            None => RectProbResult { value: 1.0, error_estimate: 0.0, points_used: 0, shifts_used: 0 },
            Some(c) => {
                let zero = vec![0.0; spec.dim()];
                let m = c.mean(&zero, &[zq, zr]);
                conditional_box_prob(c, &m, &self.std_lower, &self.std_upper, self.cfg)?
            }
        };
        Ok(scaled_value(density, &cond_prob, &self.alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::norm_cdf;

    const INF: f64 = f64::INFINITY;

    fn example1() -> TruncatedMvnSpec {
        TruncatedMvnSpec::new(
            vec![0.5, 0.5],
            SymMatrix::from_rows(&[vec![1.0, 1.2], vec![1.2, 2.0]]).unwrap(),
            vec![-1.0, -INF],
            vec![0.5, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn outside_support_is_zero() {
        let cfg = QmcConfig::default();
        let s = example1();
        assert_eq!(marginal_pdf_1d(&s, 0, -1.01, &cfg).unwrap().density, 0.0);
        assert_eq!(marginal_pdf_2d(&s, 0, 1, 0.0, 1.5, &cfg).unwrap().density, 0.0);
    }

    #[test]
    fn univariate_half_normal() {
        let s = TruncatedMvnSpec::new(vec![0.0], SymMatrix::identity(1), vec![0.0], vec![INF]).unwrap();
        let v = marginal_pdf_1d(&s, 0, 0.0, &QmcConfig::default()).unwrap();
        assert!((v.density - 0.797_884_560_802_865_4).abs() < 1e-13);
    }

    #[test]
    fn bivariate_is_joint_density_in_two_dims() {
        let s = example1();
        let cfg = QmcConfig::default();
        let alpha = s.alpha(&cfg).unwrap().value;
        let (x, y) = (-0.3, 0.2);
        // Joint density of N(μ, Σ) at (x, y), by hand.
        let (dx, dy): (f64, f64) = (x - 0.5, y - 0.5);
        let det: f64 = 2.0 - 1.44;
        let quad = (2.0 * dx * dx - 2.4 * dx * dy + dy * dy) / det;
        let joint = (-0.5 * quad).exp() / (2.0 * std::f64::consts::PI * det.sqrt());
        let got = marginal_pdf_2d(&s, 0, 1, x, y, &cfg).unwrap().density;
        assert!((got - joint / alpha).abs() < 1e-13, "{got} vs {}", joint / alpha);
    }

    #[test]
    fn index_errors() {
        let s = example1();
        let cfg = QmcConfig::default();
        assert!(matches!(marginal_pdf_1d(&s, 2, 0.0, &cfg), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(
            marginal_pdf_2d(&s, 1, 1, 0.0, 0.0, &cfg),
            Err(Error::DuplicateIndex { index: 1 })
        ));
    }

    #[test]
    fn symmetric_in_argument_order() {
        let s = TruncatedMvnSpec::new(
            vec![0.0, 0.3, -0.2],
            SymMatrix::from_rows(&[
                vec![1.0, 0.4, 0.2],
                vec![0.4, 1.5, -0.3],
                vec![0.2, -0.3, 0.8],
            ])
            .unwrap(),
            vec![-1.0, -0.5, -INF],
            vec![1.0, 2.0, 0.5],
        )
        .unwrap();
        let cfg = QmcConfig::default();
        let a = marginal_pdf_2d(&s, 0, 2, 0.4, -0.1, &cfg).unwrap().density;
        let b = marginal_pdf_2d(&s, 2, 0, -0.1, 0.4, &cfg).unwrap().density;
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn alpha_too_small() {
        let s = TruncatedMvnSpec::new(vec![0.0], SymMatrix::identity(1), vec![9.0], vec![INF]).unwrap();
        let err = marginal_pdf_1d(&s, 0, 10.0, &QmcConfig::default()).unwrap_err();
        assert_eq!(err.name(), "AlphaTooSmall");
        assert!(norm_cdf(-9.0) < MIN_ALPHA);
    }
}
