//! Problem spec files: JSON with `mean`, `sigma` (or `omega`), `lower`,
//! `upper` and an optional `qmc` block. Infinite bounds are written as the
//! strings "inf" / "-inf" (any case).

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;
use tmvn_core::{QmcConfig, SymMatrix};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Number {
    Float(f64),
    Token(String),
}

impl Number {
    fn value(&self, what: &str) -> Result<f64, CliError> {
        match self {
            Number::Float(v) => Ok(*v),
            Number::Token(s) => match s.trim().to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                _ => Err(CliError::Parse(format!("{what}: unrecognised number {s:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QmcBlock {
    pub points: Option<usize>,
    pub shifts: Option<usize>,
    pub target_error: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    mean: Option<Vec<f64>>,
    sigma: Option<Vec<Vec<f64>>>,
    omega: Option<Vec<Vec<f64>>>,
    lower: Option<Vec<Number>>,
    upper: Option<Vec<Number>>,
    #[serde(default)]
    qmc: QmcBlock,
}

/// Which matrix the file supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Covariance,
    Precision,
}

#[derive(Debug, Clone)]
pub struct SpecFile {
    pub mean: Option<Vec<f64>>,
    pub matrix: Vec<Vec<f64>>,
    pub kind: MatrixKind,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub qmc: QmcBlock,
}

fn bounds(v: Option<Vec<Number>>, what: &str) -> Result<Option<Vec<f64>>, CliError> {
    v.map(|xs| xs.iter().map(|x| x.value(what)).collect()).transpose()
}

impl SpecFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawSpec = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        let (matrix, kind) = match (raw.sigma, raw.omega) {
            (Some(s), None) => (s, MatrixKind::Covariance),
            (None, Some(o)) => (o, MatrixKind::Precision),
            (Some(_), Some(_)) => return Err(CliError::Parse("give either sigma or omega, not both".into())),
            (None, None) => return Err(CliError::Parse("missing sigma".into())),
        };
        let d = matrix.len();
        if d == 0 || matrix.iter().any(|r| r.len() != d) {
            return Err(CliError::Parse("matrix must be square and non-empty".into()));
        }
        let spec = SpecFile {
            mean: raw.mean,
            matrix,
            kind,
            lower: bounds(raw.lower, "lower")?,
            upper: bounds(raw.upper, "upper")?,
            qmc: raw.qmc,
        };
        for (name, len) in [
            ("mean", spec.mean.as_ref().map(Vec::len)),
            ("lower", spec.lower.as_ref().map(Vec::len)),
            ("upper", spec.upper.as_ref().map(Vec::len)),
        ] {
            if let Some(n) = len {
                if n != d {
                    return Err(CliError::Parse(format!("{name} has length {n}, matrix has order {d}")));
                }
            }
        }
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn matrix(&self) -> Result<SymMatrix, CliError> {
        SymMatrix::from_rows(&self.matrix).map_err(CliError::Numeric)
    }

    /// Mean, lower and upper, all required.
    pub fn require_box(&self) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), CliError> {
        let need = |v: &Option<Vec<f64>>, name: &str| {
            v.clone().ok_or_else(|| CliError::Parse(format!("missing {name}")))
        };
        Ok((need(&self.mean, "mean")?, need(&self.lower, "lower")?, need(&self.upper, "upper")?))
    }

    /// The effective QMC settings: file values, then command-line overrides.
    pub fn qmc_config(&self, flags: &QmcBlock) -> QmcConfig {
        let base = QmcConfig::default();
        QmcConfig {
            max_points_per_shift: flags.points.or(self.qmc.points).unwrap_or(base.max_points_per_shift),
            shifts: flags.shifts.or(self.qmc.shifts).unwrap_or(base.shifts),
            target_abs_error: flags.target_error.or(self.qmc.target_error).unwrap_or(base.target_abs_error),
            seed: flags.seed.or(self.qmc.seed).unwrap_or(base.seed),
        }
    }
}

/// JSON value for a bound, using the string tokens for infinities.
pub fn bound_json(v: f64) -> Value {
    if v == f64::INFINITY {
        Value::from("inf")
    } else if v == f64::NEG_INFINITY {
        Value::from("-inf")
    } else {
        Value::from(v)
    }
}

/// Parses `lo:hi,lo:hi,...` into lower and upper vectors.
pub fn parse_box(s: &str) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let token = |t: &str| -> Result<f64, CliError> {
        Number::Token(t.to_string())
            .value("--box")
            .or_else(|_| t.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("--box: bad number {t:?}"))))
    };
    let mut lo = vec![];
    let mut hi = vec![];
    for part in s.split(',') {
        let (a, b) = part
            .split_once(':')
            .ok_or_else(|| CliError::Usage(format!("--box: expected lo:hi, got {part:?}")))?;
        lo.push(token(a)?);
        hi.push(token(b)?);
    }
    Ok((lo, hi))
}
