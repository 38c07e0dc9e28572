//! Monte Carlo oracle for the truncated law: rejection sampling, a
//! coordinate-wise Gibbs sampler, moment estimates with standard errors, and
//! running-estimate traces.
//!
//! Streams come from ChaCha8 seeded by the caller, so identical inputs give
//! bit-identical draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix, SymMatrix};
use crate::model::TruncatedMvnSpec;
use crate::prob::QmcConfig;
use crate::special::{norm_cdf, norm_interval, norm_inv_unchecked};

/// Below this truncation mass rejection sampling is refused.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// z-value for two-sided 95% intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMethod {
    Rejection,
    Gibbs,
}

impl SampleMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SampleMethod::Rejection => "rejection",
            SampleMethod::Gibbs => "gibbs",
        }
    }
}

/// Draws from the truncated law, one row per draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub draws: Vec<Vec<f64>>,
    pub seed: u64,
    pub method: SampleMethod,
    /// Accepted over proposed; rejection only.
    pub acceptance_rate: Option<f64>,
    pub burn_in: usize,
    pub thinning: usize,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

/// Sample moments with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McMomentEstimate {
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
    pub mean_se: Vec<f64>,
    pub cov_se: SymMatrix,
    pub n: usize,
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidConfig { what: "sample size must be at least 1".into() });
    }
    Ok(())
}

/// I.i.d. draws by proposing from the untruncated law and keeping those in the box.
pub fn rejection_sample(spec: &TruncatedMvnSpec, n: usize, seed: u64) -> Result<SampleBatch> {
    check_n(n)?;
    let alpha = spec.alpha(&QmcConfig::default().with_seed(seed))?;
    if alpha.value < MIN_ACCEPTANCE {
        return Err(Error::AcceptanceTooLow { alpha: alpha.value });
    }
    let d = spec.dim();
    let chol = cholesky(spec.cov())?;
    let l = chol.lower();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Generous cap so a badly estimated α cannot loop forever.
    let max_proposals = ((n as f64 / alpha.value) * 50.0).ceil() as u64 + 10_000;
    let mut draws = Vec::with_capacity(n);
    let mut proposed = 0u64;
    let mut z = vec![0.0; d];
    let mut x = vec![0.0; d];
    while draws.len() < n {
        if proposed >= max_proposals {
            return Err(Error::AcceptanceTooLow { alpha: draws.len() as f64 / proposed as f64 });
        }
        proposed += 1;
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let row = l.row(i);
            x[i] = spec.mean()[i] + row[..=i].iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
        }
        if spec.contains(&x) {
            draws.push(x.clone());
        }
    }
    Ok(SampleBatch {
        draws,
        seed,
        method: SampleMethod::Rejection,
        acceptance_rate: Some(n as f64 / proposed as f64),
        burn_in: 0,
        thinning: 1,
    })
}

/// Coordinate-wise Gibbs sampler: each full conditional is a univariate
/// truncated normal, drawn by inverse CDF.
pub fn gibbs_sample(
    spec: &TruncatedMvnSpec,
    n: usize,
    burn_in: usize,
    thinning: usize,
    seed: u64,
) -> Result<SampleBatch> {
    check_n(n)?;
    if thinning == 0 {
        return Err(Error::InvalidConfig { what: "thinning must be at least 1".into() });
    }
    let d = spec.dim();
    let omega = spec.cov().inverse()?;
    let mu = spec.mean();
    let (a, b) = (spec.lower(), spec.upper());
    let cond_sd: Vec<f64> = (0..d).map(|i| (1.0 / omega.get(i, i)).sqrt()).collect();

    let mut x: Vec<f64> = (0..d).map(|i| mu[i].clamp(a[i], b[i])).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(n);
    let total = burn_in + n * thinning;
    for sweep in 0..total {
        for i in 0..d {
            let mut s = 0.0;
            for j in 0..d {
                if j != i {
                    s += omega.get(i, j) * (x[j] - mu[j]);
                }
            }
            let m = mu[i] - s / omega.get(i, i);
            let sd = cond_sd[i];
            let lo = if a[i].is_finite() { (a[i] - m) / sd } else { a[i] };
            let hi = if b[i].is_finite() { (b[i] - m) / sd } else { b[i] };
            let z = truncated_standard_normal(lo, hi, &mut rng);
            x[i] = (m + sd * z).clamp(a[i], b[i]);
        }
        if sweep >= burn_in && (sweep - burn_in + 1) % thinning == 0 {
            draws.push(x.clone());
        }
    }
    Ok(SampleBatch {
        draws,
        seed,
        method: SampleMethod::Gibbs,
        acceptance_rate: None,
        burn_in,
        thinning,
    })
}

/// One draw from `N(0,1)` restricted to `[lo, hi]`.
///
/// Inverse CDF on the tail side of the interval; once the tail mass
/// underflows, exponential-proposal rejection takes over.
pub fn truncated_standard_normal<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    if lo > 0.0 {
        let (pa, pb) = (norm_cdf(-lo), norm_cdf(-hi));
        if pa > 1e-300 {
            let u: f64 = rng.random();
            let q = pb + u * (pa - pb);
            return (-norm_inv_unchecked(q.clamp(1e-300, 1.0 - f64::EPSILON))).clamp(lo, hi);
        }
        return exponential_tail(lo, hi, rng);
    }
    if hi < 0.0 {
        return -truncated_standard_normal(-hi, -lo, rng);
    }
    let mass = norm_interval(lo, hi);
    let u: f64 = rng.random();
    let p = norm_cdf(lo) + u * mass;
    norm_inv_unchecked(p.clamp(1e-300, 1.0 - f64::EPSILON)).clamp(lo, hi)
}

/// Robert's exponential-proposal sampler for `[lo, hi]` with `lo` far in the tail.
fn exponential_tail<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    let rate = 0.5 * (lo + (lo * lo + 4.0).sqrt());
    loop {
        let u: f64 = rng.random();
        let z = lo - (1.0 - u).ln() / rate;
        if z > hi {
            continue;
        }
        let v: f64 = rng.random();
        if v <= (-0.5 * (z - rate).powi(2)).exp() {
            return z;
        }
    }
}

/// Sample mean and covariance (n − 1 denominator) with standard errors.
///
/// Rejection draws are i.i.d. and use the usual asymptotic errors. Gibbs
/// draws are autocorrelated; their errors are the larger of the i.i.d. value
/// and a batch-means estimate.
pub fn estimate_moments(batch: &SampleBatch) -> Result<McMomentEstimate> {
    estimate_rows(&batch.draws, batch.method)
}

fn estimate_rows(rows: &[Vec<f64>], method: SampleMethod) -> Result<McMomentEstimate> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidConfig { what: "at least 2 draws are required".into() });
    }
    let d = rows[0].len();
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);

    let mut cov = Matrix::zeros(d, d);
    let mut fourth = Matrix::zeros(d, d);
    for r in rows {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in 0..=i {
                let dj = r[j] - mean[j];
                cov.set(i, j, cov.get(i, j) + di * dj);
                fourth.set(i, j, fourth.get(i, j) + di * di * dj * dj);
            }
        }
    }
    let mut cov_se = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let biased = cov.get(i, j) / nf;
            let m4 = fourth.get(i, j) / nf;
            let s = cov.get(i, j) / (nf - 1.0);
            cov.set(i, j, s);
            cov.set(j, i, s);
            let se = ((m4 - biased * biased).max(0.0) / nf).sqrt();
            cov_se.set(i, j, se);
            cov_se.set(j, i, se);
        }
    }
    let mut mean_se: Vec<f64> = (0..d).map(|i| (cov.get(i, i) / nf).sqrt()).collect();

    if method == SampleMethod::Gibbs {
        let batches = (nf.sqrt().floor() as usize).max(1);
        if batches >= 2 {
            let size = n / batches;
            for i in 0..d {
                let bm = batch_means_se(rows, batches, size, |r| r[i]);
                mean_se[i] = mean_se[i].max(bm);
                for j in 0..=i {
                    let (mi, mj) = (mean[i], mean[j]);
                    let bm = batch_means_se(rows, batches, size, |r| (r[i] - mi) * (r[j] - mj));
                    let se = cov_se.get(i, j).max(bm);
                    cov_se.set(i, j, se);
                    cov_se.set(j, i, se);
                }
            }
        }
    }
    Ok(McMomentEstimate {
        mean,
        cov: SymMatrix::symmetrized(&cov),
        mean_se,
        cov_se: SymMatrix::symmetrized(&cov_se),
        n,
    })
}

fn batch_means_se(
    rows: &[Vec<f64>],
    batches: usize,
    size: usize,
    f: impl Fn(&[f64]) -> f64,
) -> f64 {
    let means: Vec<f64> = (0..batches)
        .map(|b| rows[b * size..(b + 1) * size].iter().map(|r| f(r)).sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    (var / batches as f64).sqrt()
}

/// Running estimate after the first `n` draws.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
    /// Half-widths of 95% intervals for the mean entries.
    pub mean_half_width: Vec<f64>,
    /// Half-widths of 95% intervals for the covariance entries.
    pub cov_half_width: SymMatrix,
}

/// Running estimates at sample sizes `stride, 2·stride, …, n` from one batch.
pub fn trace_rows(batch: &SampleBatch, stride: usize) -> Result<Vec<TraceRow>> {
    if stride == 0 {
        return Err(Error::InvalidConfig { what: "stride must be at least 1".into() });
    }
    let n = batch.len();
    let mut sizes: Vec<usize> = (1..=n / stride).map(|k| k * stride).filter(|&m| m >= 2).collect();
    if sizes.last() != Some(&n) && n >= 2 {
        sizes.push(n);
    }
    sizes
        .into_iter()
        .map(|m| {
            let e = estimate_rows(&batch.draws[..m], batch.method)?;
            Ok(TraceRow {
                n: m,
                mean_half_width: e.mean_se.iter().map(|s| Z95 * s).collect(),
                cov_half_width: e.cov_se.scaled(&vec![Z95.sqrt(); e.mean.len()]),
                mean: e.mean,
                cov: e.cov,
            })
        })
        .collect()
}

/// Draws `n` points and reports running estimates every `stride` draws.
pub fn trace_export(
    spec: &TruncatedMvnSpec,
    n: usize,
    stride: usize,
    seed: u64,
    method: SampleMethod,
) -> Result<Vec<TraceRow>> {
    if stride == 0 {
        return Err(Error::InvalidConfig { what: "stride must be at least 1".into() });
    }
    let batch = match method {
        SampleMethod::Rejection => rejection_sample(spec, n, seed)?,
        SampleMethod::Gibbs => gibbs_sample(spec, n, 100 * spec.dim(), 1, seed)?,
    };
    trace_rows(&batch, stride)
}
