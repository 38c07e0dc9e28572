//! Multivariate normal rectangle probabilities `P{lower ≤ Z ≤ upper}` for
//! `Z ~ N(0, R)`.
//!
//! One and two dimensions use closed forms. From three dimensions on the
//! problem is mapped onto the unit cube with the Cholesky separation-of-variables
//! transform (variables reordered so that the tightest expected intervals come
//! first) and integrated with a randomly shifted Kronecker lattice. The error
//! estimate is three standard errors of the shift means.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix};
use crate::special::{bvn_rect, norm_cdf, norm_interval, norm_inv_unchecked, phi};

/// Largest dimension accepted by the rectangle-probability engine.
pub const MAX_DIM: usize = 25;

/// Error estimate reported by the closed-form one- and two-dimensional paths.
pub const CLOSED_FORM_ERROR: f64 = 1e-14;

const FIRST_STAGE_POINTS: usize = 64;

/// Randomized lattice settings.
#[derive(Debug, Clone, PartialEq)]
pub struct QmcConfig {
    pub max_points_per_shift: usize,
    pub shifts: usize,
    pub target_abs_error: f64,
    pub seed: u64,
}

impl Default for QmcConfig {
    fn default() -> Self {
        Self { max_points_per_shift: 8192, shifts: 12, target_abs_error: 1e-6, seed: 20_120_623 }
    }
}

impl QmcConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.shifts < 2 {
            return Err(Error::InvalidConfig { what: "at least 2 shifts are required".into() });
        }
        if self.max_points_per_shift < FIRST_STAGE_POINTS {
            return Err(Error::InvalidConfig {
                what: format!("points per shift must be at least {FIRST_STAGE_POINTS}"),
            });
        }
        if !(self.target_abs_error >= 0.0) {
            return Err(Error::InvalidConfig { what: "target error must be nonnegative".into() });
        }
        Ok(())
    }
}

/// Probability mass of a box together with an absolute error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct RectProbResult {
    pub value: f64,
    pub error_estimate: f64,
    /// Integrand evaluations per shift times shifts; 0 on closed-form paths.
    pub points_used: usize,
    pub shifts_used: usize,
}

impl RectProbResult {
    fn exact(value: f64) -> Self {
        Self { value, error_estimate: 0.0, points_used: 0, shifts_used: 0 }
    }

    fn closed_form(value: f64) -> Self {
        Self { value, error_estimate: CLOSED_FORM_ERROR, points_used: 0, shifts_used: 0 }
    }
}

/// `P{lower ≤ Z ≤ upper}` for `Z ~ N(0, R)`.
///
/// `corr` is expected to be a correlation matrix; a general covariance is
/// rescaled to unit diagonal first. Variables unbounded on both sides are
/// marginalized out before integration.
pub fn mvn_rect_prob(
    corr: &SymMatrix,
    lower: &[f64],
    upper: &[f64],
    cfg: &QmcConfig,
) -> Result<RectProbResult> {
    let d = corr.order();
    if lower.len() != d || upper.len() != d {
        return Err(Error::DimensionMismatch { what: "bounds vs correlation order".into() });
    }
    if d > MAX_DIM {
        return Err(Error::DimensionTooLarge { dim: d, max: MAX_DIM });
    }
    cfg.validate()?;
    for i in 0..d {
        let (a, b) = (lower[i], upper[i]);
        if a.is_nan() || b.is_nan() || !(a < b) {
            return Err(Error::EmptyBox { index: i, lower: a, upper: b });
        }
    }

    let active: Vec<usize> =
        (0..d).filter(|&i| lower[i] > f64::NEG_INFINITY || upper[i] < f64::INFINITY).collect();
    let sub = corr.principal(&active);
    let scale: Vec<f64> = active.iter().map(|&i| corr.get(i, i).sqrt()).collect();
    let inv: Vec<f64> = scale.iter().map(|s| 1.0 / s).collect();
    let r = sub.scaled(&inv);
    let lo: Vec<f64> = active.iter().zip(&scale).map(|(&i, s)| lower[i] / s).collect();
    let hi: Vec<f64> = active.iter().zip(&scale).map(|(&i, s)| upper[i] / s).collect();

    match active.len() {
        0 => Ok(RectProbResult::exact(1.0)),
        1 => Ok(RectProbResult::closed_form(norm_interval(lo[0], hi[0]))),
        2 => {
            let rho = r.get(0, 1);
            if !(rho.abs() < 1.0) {
                return Err(Error::NotPositiveDefinite { index: active[1], pivot: 1.0 - rho * rho });
            }
            Ok(RectProbResult::closed_form(bvn_rect([lo[0], lo[1]], [hi[0], hi[1]], rho)))
        }
        _ => {
            let plan = SeparationPlan::new(&r, &lo, &hi).map_err(|e| match e {
                Error::NotPositiveDefinite { index, pivot } => {
                    Error::NotPositiveDefinite { index: active[index], pivot }
                }
                other => other,
            })?;
            Ok(plan.integrate(cfg))
        }
    }
}

/// Reordered Cholesky factor and bounds, ready for the unit-cube integrand.
struct SeparationPlan {
    chol: Matrix,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SeparationPlan {
    /// Builds the factor one column at a time, at each step choosing the
    /// remaining variable with the smallest expected conditional interval
    /// mass. Ties go to the lowest original index.
    fn new(r: &SymMatrix, lower: &[f64], upper: &[f64]) -> Result<Self> {
        let n = r.order();
        let mut a = r.as_matrix().clone();
        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        let mut orig: Vec<usize> = (0..n).collect();
        let mut chol = Matrix::zeros(n, n);
        let mut expected = vec![0.0; n];
        let tol = n as f64 * f64::EPSILON;

        for j in 0..n {
            let mut best = None;
            let mut best_mass = f64::INFINITY;
            let mut best_orig = usize::MAX;
            for i in j..n {
                let mut var = a.get(i, i);
                let mut shift = 0.0;
                for m in 0..j {
                    var -= chol.get(i, m) * chol.get(i, m);
                    shift += chol.get(i, m) * expected[m];
                }
                if var <= tol {
                    continue;
                }
                let s = var.sqrt();
                let mass = norm_interval((lo[i] - shift) / s, (hi[i] - shift) / s);
                if mass < best_mass || (mass == best_mass && orig[i] < best_orig) {
                    best = Some(i);
                    best_mass = mass;
                    best_orig = orig[i];
                }
            }
            let Some(p) = best else {
                return Err(Error::NotPositiveDefinite { index: orig[j], pivot: 0.0 });
            };
            if p != j {
                swap_sym(&mut a, p, j);
                chol_swap_rows(&mut chol, p, j);
                lo.swap(p, j);
                hi.swap(p, j);
                orig.swap(p, j);
            }
            let mut var = a.get(j, j);
            for m in 0..j {
                var -= chol.get(j, m) * chol.get(j, m);
            }
            let ljj = var.sqrt();
            chol.set(j, j, ljj);
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for m in 0..j {
                    s -= chol.get(i, m) * chol.get(j, m);
                }
                chol.set(i, j, s / ljj);
            }
            let shift: f64 = (0..j).map(|m| chol.get(j, m) * expected[m]).sum();
            let (ta, tb) = ((lo[j] - shift) / ljj, (hi[j] - shift) / ljj);
            let mass = norm_interval(ta, tb);
            expected[j] = if mass > 0.0 {
                (density_or_zero(ta) - density_or_zero(tb)) / mass
            } else if ta.is_finite() {
                ta
            } else {
                tb
            };
        }
        Ok(Self { chol, lower: lo, upper: hi })
    }

    fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Separation-of-variables integrand at `w ∈ [0,1]^{n−1}`.
    fn integrand(&self, w: &[f64], y: &mut [f64]) -> f64 {
        let n = self.dim();
        let mut f = 1.0;
        for i in 0..n {
            let row = self.chol.row(i);
            let shift: f64 = row[..i].iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            let lii = row[i];
            let ta = (self.lower[i] - shift) / lii;
            let tb = (self.upper[i] - shift) / lii;
            let mass = norm_interval(ta, tb);
            f *= mass;
            if f == 0.0 {
                return 0.0;
            }
            if i + 1 < n {
                y[i] = sample_interval(ta, tb, mass, w[i]);
            }
        }
        f
    }

    fn integrate(&self, cfg: &QmcConfig) -> RectProbResult {
        let n = self.dim();
        let dims = n - 1;
        let gen: Vec<f64> = PRIMES[..dims].iter().map(|&p| (p as f64).sqrt().fract()).collect();
        let shifts: Vec<Vec<f64>> = (0..cfg.shifts)
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(s as u64);
                (0..dims).map(|_| rng.random::<f64>()).collect()
            })
            .collect();

        let mut sums = vec![0.0; cfg.shifts];
        let mut w = vec![0.0; dims];
        let mut w_anti = vec![0.0; dims];
        let mut y = vec![0.0; n];
        let mut done = 0usize;
        let mut target = FIRST_STAGE_POINTS.min(cfg.max_points_per_shift);
        let (mut value, mut error);
        loop {
            for (s, shift) in shifts.iter().enumerate() {
                let mut acc = 0.0;
                for k in done + 1..=target {
                    for j in 0..dims {
                        let x = (k as f64 * gen[j] + shift[j]).fract();
                        // Tent transform periodizes the integrand.
                        let t = (2.0 * x - 1.0).abs();
                        w[j] = t;
                        w_anti[j] = 1.0 - t;
                    }
                    acc += 0.5 * (self.integrand(&w, &mut y) + self.integrand(&w_anti, &mut y));
                }
                sums[s] += acc;
            }
            done = target;
            let means: Vec<f64> = sums.iter().map(|s| s / done as f64).collect();
            value = means.iter().sum::<f64>() / means.len() as f64;
            let var = means.iter().map(|m| (m - value).powi(2)).sum::<f64>()
                / (means.len() as f64 - 1.0);
            error = 3.0 * (var / means.len() as f64).sqrt();
            if error <= cfg.target_abs_error || done >= cfg.max_points_per_shift {
                break;
            }
            target = (2 * done).min(cfg.max_points_per_shift);
        }
        RectProbResult {
            value: value.clamp(0.0, 1.0),
            error_estimate: error,
            points_used: 2 * done * cfg.shifts,
            shifts_used: cfg.shifts,
        }
    }
}

#[inline]
fn density_or_zero(x: f64) -> f64 {
    if x.is_finite() {
        phi(x)
    } else {
        0.0
    }
}

/// Quantile of `u` within the standard normal restricted to `[ta, tb]`,
/// computed on the tail side that keeps precision.
#[inline]
fn sample_interval(ta: f64, tb: f64, mass: f64, u: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let y = if ta > 0.0 {
        let upper_tail = norm_cdf(-ta) - u * mass;
        -norm_inv_unchecked(upper_tail.clamp(TINY, 1.0 - f64::EPSILON))
    } else {
        let p = norm_cdf(ta) + u * mass;
        norm_inv_unchecked(p.clamp(TINY, 1.0 - f64::EPSILON))
    };
    y.clamp(ta, tb)
}

fn swap_sym(a: &mut Matrix, p: usize, q: usize) {
    let n = a.rows();
    for k in 0..n {
        let t = a.get(p, k);
        a.set(p, k, a.get(q, k));
        a.set(q, k, t);
    }
    for k in 0..n {
        let t = a.get(k, p);
        a.set(k, p, a.get(k, q));
        a.set(k, q, t);
    }
}

fn chol_swap_rows(l: &mut Matrix, p: usize, q: usize) {
    for k in 0..l.cols() {
        let t = l.get(p, k);
        l.set(p, k, l.get(q, k));
        l.set(q, k, t);
    }
}

const PRIMES: [u32; MAX_DIM] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];
