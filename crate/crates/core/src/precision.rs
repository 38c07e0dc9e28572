//! Precision matrix before and after truncation.
//!
//! When some variables are left untruncated, every entry of `Ω*` outside the
//! truncated block equals the corresponding entry of `Ω`. The report below
//! marks those entries as proven and checks the rest numerically.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix};
use crate::model::TruncatedMvnSpec;
use crate::moments::{detect_partition, moments_auto, MomentResult};
use crate::prob::QmcConfig;

/// Safety factor applied to the propagated moment error when deciding
/// whether a precision entry moved.
pub const TOLERANCE_FACTOR: f64 = 100.0;

/// `Ω = Σ⁻¹`.
pub fn precision_matrix(cov: &SymMatrix) -> Result<SymMatrix> {
    cov.inverse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryStatus {
    /// Outside the truncated block, so unchanged by construction.
    InvariantProven,
    /// Inside the truncated block but unchanged within tolerance.
    InvariantObserved,
    /// Zero in `Ω` and still zero within tolerance in `Ω*`.
    ZeroPreserved,
    Changed,
}

impl EntryStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            EntryStatus::InvariantProven => "invariant-proven",
            EntryStatus::InvariantObserved => "invariant-observed",
            EntryStatus::ZeroPreserved => "zero-preserved",
            EntryStatus::Changed => "changed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PrecisionReport {
    pub omega_before: SymMatrix,
    pub omega_after: SymMatrix,
    pub truncated_set: Vec<usize>,
    /// Row-major `d × d` classification.
    pub entry_status: Vec<Vec<EntryStatus>>,
    /// Largest `|Ω*_ij − Ω_ij|` over entries classed as invariant or zero-preserved.
    pub max_invariant_deviation: f64,
    /// Per-entry tolerance used for the classification.
    pub tolerance: SymMatrix,
    pub moments: MomentResult,
}

fn row_abs_sums(m: &SymMatrix) -> Vec<f64> {
    let d = m.order();
    (0..d).map(|i| (0..d).map(|j| m.get(i, j).abs()).sum()).collect()
}

/// Truncates `N(μ, Ω⁻¹)` to `[lower, upper]` and compares `Ω*`, the inverse
/// of the truncated covariance, with `Ω`. `mean` defaults to zero.
pub fn truncated_precision_report(
    omega: &SymMatrix,
    mean: Option<&[f64]>,
    lower: &[f64],
    upper: &[f64],
    cfg: &QmcConfig,
) -> Result<PrecisionReport> {
    let d = omega.order();
    let sigma = omega.inverse()?;
    let mean = mean.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; d]);
    let spec = TruncatedMvnSpec::new(mean, sigma, lower.to_vec(), upper.to_vec())?;
    let moments = moments_auto(&spec, cfg)?;
    let omega_after = moments.cov.inverse()?;
    let partition = detect_partition(&spec);

    // To first order δΩ* = −Ω* δΣ* Ω*, so |δΩ*_ij| ≤ e·r_i·r_j with r the
    // absolute row sums of Ω*. The rounding floor keeps closed-form routes
    // from demanding exact equality.
    let rounding = f64::EPSILON * d as f64 * moments.cov.as_matrix().max_abs();
    let err = moments.error_estimate.max(rounding);
    let r = row_abs_sums(&omega_after);
    let tolerance = SymMatrix::symmetrized(&Matrix::from_fn(d, d, |i, j| TOLERANCE_FACTOR * err * r[i] * r[j]));

    let mut entry_status = vec![vec![EntryStatus::Changed; d]; d];
    let mut max_dev = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let before = omega.get(i, j);
            let dev = (omega_after.get(i, j) - before).abs();
            let tol = tolerance.get(i, j);
            let status = if before == 0.0 && omega_after.get(i, j).abs() <= tol {
                EntryStatus::ZeroPreserved
            } else if !partition.is_truncated(i) || !partition.is_truncated(j) {
                EntryStatus::InvariantProven
            } else if dev <= tol {
                EntryStatus::InvariantObserved
            } else {
                EntryStatus::Changed
            };
            if status != EntryStatus::Changed {
                max_dev = max_dev.max(dev);
            }
            entry_status[i][j] = status;
        }
    }
    Ok(PrecisionReport {
        omega_before: omega.clone(),
        omega_after,
        truncated_set: partition.truncated,
        entry_status,
        max_invariant_deviation: max_dev,
        tolerance,
        moments,
    })
}

/// Outcome of checking off-diagonal invariance under full truncation.
#[derive(Debug, Clone)]
pub struct ConjectureProbe {
    pub max_deviation: f64,
    /// Entry attaining the maximum, if there are off-diagonal entries.
    pub argmax: Option<(usize, usize)>,
    pub omega_before: SymMatrix,
    pub omega_after: SymMatrix,
    pub error_estimate: f64,
}

/// Largest off-diagonal `|Ω*_ij − Ω_ij|` when every variable is truncated.
/// Only measures; nothing here assumes the value is zero.
pub fn conjecture_probe(spec: &TruncatedMvnSpec, cfg: &QmcConfig) -> Result<ConjectureProbe> {
    let partition = detect_partition(spec);
    if !partition.free.is_empty() {
        return Err(Error::Domain {
            what: format!("every variable must be truncated; free: {:?}", partition.free),
        });
    }
    let omega = spec.cov().inverse()?;
    let moments = moments_auto(spec, cfg)?;
    let omega_after = moments.cov.inverse()?;
    let d = spec.dim();
    let mut best = (0.0f64, None);
    for i in 0..d {
        for j in 0..i {
            let dev = (omega_after.get(i, j) - omega.get(i, j)).abs();
            if best.1.is_none() || dev > best.0 {
                best = (dev, Some((i, j)));
            }
        }
    }
    Ok(ConjectureProbe {
        max_deviation: best.0,
        argmax: best.1,
        omega_before: omega,
        omega_after,
        error_estimate: moments.error_estimate,
    })
}
