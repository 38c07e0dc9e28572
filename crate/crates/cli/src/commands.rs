use serde_json::{json, Value};
use tmvn_core::sampler::{trace_rows, SampleBatch, TraceRow};
use tmvn_core::{
    conjecture_probe, detect_partition, estimate_moments, gibbs_sample, moments_auto, rejection_sample,
    truncated_moments, truncated_precision_report, Error, Marginal1d, Marginal2d, QmcConfig, SampleMethod,
    SymMatrix, TruncatedMvnSpec,
};

use crate::output::{alpha_json, csv_table, document, emit, json_text, matrix_json, moments_json};
use crate::spec::{bound_json, parse_box, MatrixKind, QmcBlock, SpecFile};
use crate::{Cli, CliError, Command, MomentRoute, SamplerArg};

struct Loaded {
    spec: TruncatedMvnSpec,
    cfg: QmcConfig,
    input: Value,
}

fn input_json(mean: &[f64], matrix_key: &str, m: &SymMatrix, lower: &[f64], upper: &[f64]) -> Value {
    json!({
        "mean": mean,
        matrix_key: matrix_json(m),
        "lower": lower.iter().map(|v| bound_json(*v)).collect::<Vec<_>>(),
        "upper": upper.iter().map(|v| bound_json(*v)).collect::<Vec<_>>(),
    })
}

fn flags(cli: &Cli) -> QmcBlock {
    QmcBlock { points: cli.points, shifts: cli.shifts, target_error: cli.target_error, seed: cli.seed }
}

fn config(file: &SpecFile, cli: &Cli) -> Result<QmcConfig, CliError> {
    let cfg = file.qmc_config(&flags(cli));
    cfg.validate().map_err(CliError::UsageNumeric)?;
    Ok(cfg)
}

fn load(cli: &Cli, path: &std::path::Path) -> Result<Loaded, CliError> {
    let file = SpecFile::read(path)?;
    if file.kind != MatrixKind::Covariance {
        return Err(CliError::Parse("this command needs sigma, not omega".into()));
    }
    let (mean, lower, upper) = file.require_box()?;
    let cov = file.matrix()?;
    let cfg = config(&file, cli)?;
    let input = input_json(&mean, "sigma", &cov, &lower, &upper);
    let spec = TruncatedMvnSpec::new(mean, cov, lower, upper)?;
    Ok(Loaded { spec, cfg, input })
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.csv && !matches!(cli.command, Command::Marginal { .. } | Command::Sample { .. }) {
        return Err(CliError::Usage("--csv applies to marginal and sample output only".into()));
    }
    let text = match &cli.command {
        Command::Prob { spec } => prob(cli, spec)?,
        Command::Moments { spec, method } => moments(cli, spec, *method)?,
        Command::Marginal { spec, dims, grid } => marginal(cli, spec, dims, grid)?,
        Command::Sample { spec, n, method, trace, burn_in, thinning } => {
            sample(cli, spec, *n, *method, *trace, *burn_in, *thinning)?
        }
        Command::Precision { spec, bounds } => precision(cli, spec, bounds.as_deref())?,
    };
    emit(&text, cli.out.as_deref())
}

fn prob(cli: &Cli, path: &std::path::Path) -> Result<String, CliError> {
    let l = load(cli, path)?;
    let alpha = l.spec.alpha(&l.cfg)?;
    Ok(json_text(&document("prob", &l.cfg, l.input, json!({}), alpha_json(&alpha))))
}

fn moments(cli: &Cli, path: &std::path::Path, route: MomentRoute) -> Result<String, CliError> {
    let l = load(cli, path)?;
    let result = match route {
        MomentRoute::Auto => moments_auto(&l.spec, &l.cfg)?,
        MomentRoute::Full => truncated_moments(&l.spec, &l.cfg)?,
        MomentRoute::Jk => {
            if detect_partition(&l.spec).free.is_empty() {
                return Err(CliError::Numeric(Error::EmptyFreeSet));
            }
            moments_auto(&l.spec, &l.cfg)?
        }
    };
    let options = json!({ "method": format!("{route:?}").to_lowercase() });
    Ok(json_text(&document("moments", &l.cfg, l.input, options, moments_json(&result))))
}

/// 1-based `q` or `q,r` into zero-based indices.
fn parse_dims(s: &str, d: usize) -> Result<Vec<usize>, CliError> {
    let dims: Vec<usize> = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("--dims: bad index {t:?}")))
        })
        .collect::<Result<_, _>>()?;
    if dims.is_empty() || dims.len() > 2 {
        return Err(CliError::Usage("--dims takes one or two indices".into()));
    }
    for &k in &dims {
        if k == 0 || k > d {
            return Err(CliError::UsageNumeric(Error::IndexOutOfRange { index: k, dim: d }));
        }
    }
    if dims.len() == 2 && dims[0] == dims[1] {
        return Err(CliError::UsageNumeric(Error::DuplicateIndex { index: dims[0] }));
    }
    Ok(dims.into_iter().map(|k| k - 1).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Axis {
    min: f64,
    max: f64,
    steps: usize,
}

impl Axis {
    fn parse(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Usage(format!("--grid: expected min:max:steps, got {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let min: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let max: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !min.is_finite() || !max.is_finite() || !(min < max) || steps < 2 {
            return Err(bad());
        }
        Ok(Axis { min, max, steps })
    }

    fn points(&self) -> Vec<f64> {
        let h = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.max } else { self.min + h * i as f64 })
            .collect()
    }

    fn json(&self) -> Value {
        json!({ "min": self.min, "max": self.max, "steps": self.steps })
    }
}

fn parse_grid(s: &str, n: usize) -> Result<Vec<Axis>, CliError> {
    let axes: Vec<Axis> = s.split(',').map(Axis::parse).collect::<Result<_, _>>()?;
    match (axes.len(), n) {
        (1, _) => Ok(vec![axes[0]; n]),
        (k, n) if k == n => Ok(axes),
        _ => Err(CliError::Usage(format!("--grid: expected 1 or {n} axes"))),
    }
}

fn marginal(cli: &Cli, path: &std::path::Path, dims: &str, grid: &str) -> Result<String, CliError> {
    let l = load(cli, path)?;
    let dims = parse_dims(dims, l.spec.dim())?;
    let axes = parse_grid(grid, dims.len())?;
    let (header, rows, alpha) = if dims.len() == 1 {
        let m = Marginal1d::new(&l.spec, dims[0], &l.cfg)?;
        let mut rows = vec![];
        for x in axes[0].points() {
            let v = m.eval(x)?;
            rows.push(vec![x, v.density, v.error_estimate]);
        }
        (vec!["x", "density", "error_estimate"], rows, m.alpha().clone())
    } else {
        let m = Marginal2d::new(&l.spec, dims[0], dims[1], &l.cfg)?;
        let mut rows = vec![];
        for x in axes[0].points() {
            for y in axes[1].points() {
                let v = m.eval(x, y)?;
                rows.push(vec![x, y, v.density, v.error_estimate]);
            }
        }
        (vec!["x", "y", "density", "error_estimate"], rows, l.spec.alpha(&l.cfg)?)
    };
    if cli.csv {
        let header: Vec<String> = header.into_iter().map(String::from).collect();
        return Ok(csv_table(&header, &rows));
    }
    let options = json!({
        "dims": dims.iter().map(|k| k + 1).collect::<Vec<_>>(),
        "grid": axes.iter().map(Axis::json).collect::<Vec<_>>(),
    });
    let result = json!({ "alpha": alpha_json(&alpha), "columns": header, "rows": rows });
    Ok(json_text(&document("marginal", &l.cfg, l.input, options, result)))
}

fn trace_table(rows: &[TraceRow], d: usize) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut header = vec!["n".to_string()];
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    header.extend((1..=d).map(|i| format!("mean_{i}")));
    header.extend(pairs.iter().map(|(i, j)| format!("cov_{}_{}", i + 1, j + 1)));
    header.extend((1..=d).map(|i| format!("mean_hw_{i}")));
    header.extend(pairs.iter().map(|(i, j)| format!("cov_hw_{}_{}", i + 1, j + 1)));
    let table = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.n as f64];
            v.extend(&r.mean);
            v.extend(pairs.iter().map(|&(i, j)| r.cov.get(i, j)));
            v.extend(&r.mean_half_width);
            v.extend(pairs.iter().map(|&(i, j)| r.cov_half_width.get(i, j)));
            v
        })
        .collect();
    (header, table)
}

fn sample(
    cli: &Cli,
    path: &std::path::Path,
    n: usize,
    method: SamplerArg,
    trace: Option<usize>,
    burn_in: Option<usize>,
    thinning: usize,
) -> Result<String, CliError> {
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    if thinning == 0 {
        return Err(CliError::Usage("--thinning must be at least 1".into()));
    }
    if trace == Some(0) {
        return Err(CliError::Usage("--trace stride must be at least 1".into()));
    }
    let l = load(cli, path)?;
    let d = l.spec.dim();
    let seed = l.cfg.seed;
    let burn_in = burn_in.unwrap_or(100 * d);
    let batch: SampleBatch = match method {
        SamplerArg::Rejection => rejection_sample(&l.spec, n, seed)?,
        SamplerArg::Gibbs => gibbs_sample(&l.spec, n, burn_in, thinning, seed)?,
    };
    let options = json!({
        "n": n,
        "method": batch.method.as_str(),
        "burn_in": if batch.method == SampleMethod::Gibbs { json!(burn_in) } else { Value::Null },
        "thinning": thinning,
        "trace": trace,
    });

    if let Some(stride) = trace {
        let rows = trace_rows(&batch, stride)?;
        if cli.csv {
            let (header, table) = trace_table(&rows, d);
            return Ok(csv_table(&header, &table));
        }
        let rows_json: Vec<Value> = rows
            .iter()
            .map(|r| {
                json!({
                    "n": r.n,
                    "mean": r.mean,
                    "cov": matrix_json(&r.cov),
                    "mean_half_width": r.mean_half_width,
                    "cov_half_width": matrix_json(&r.cov_half_width),
                })
            })
            .collect();
        let result = json!({ "acceptance_rate": batch.acceptance_rate, "rows": rows_json });
        return Ok(json_text(&document("sample", &l.cfg, l.input, options, result)));
    }

    if cli.csv {
        let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        return Ok(csv_table(&header, &batch.draws));
    }
    let estimate = if n >= 2 {
        let e = estimate_moments(&batch)?;
        json!({
            "mean": e.mean,
            "cov": matrix_json(&e.cov),
            "mean_se": e.mean_se,
            "cov_se": matrix_json(&e.cov_se),
        })
    } else {
        Value::Null
    };
    let result = json!({
        "acceptance_rate": batch.acceptance_rate,
        "estimate": estimate,
        "draws": batch.draws,
    });
    Ok(json_text(&document("sample", &l.cfg, l.input, options, result)))
}

fn precision(cli: &Cli, path: &std::path::Path, bounds: Option<&str>) -> Result<String, CliError> {
    let file = SpecFile::read(path)?;
    let d = file.dim();
    let matrix = file.matrix()?;
    let omega = match file.kind {
        MatrixKind::Precision => matrix,
        MatrixKind::Covariance => matrix.inverse()?,
    };
    let (lower, upper) = match bounds {
        Some(b) => {
            let (lo, hi) = parse_box(b)?;
            if lo.len() != d {
                return Err(CliError::Usage(format!("--box has {} sides, matrix has order {d}", lo.len())));
            }
            (lo, hi)
        }
        None => (
            file.lower.clone().ok_or_else(|| CliError::Parse("missing lower (or pass --box)".into()))?,
            file.upper.clone().ok_or_else(|| CliError::Parse("missing upper (or pass --box)".into()))?,
        ),
    };
    let mean = file.mean.clone().unwrap_or_else(|| vec![0.0; d]);
    let cfg = config(&file, cli)?;
    let report = truncated_precision_report(&omega, Some(&mean), &lower, &upper, &cfg)?;

    let probe = if report.truncated_set.len() == d {
        let spec = TruncatedMvnSpec::new(mean.clone(), omega.inverse()?, lower.clone(), upper.clone())?;
        let p = conjecture_probe(&spec, &cfg)?;
        json!({
            "max_off_diagonal_deviation": p.max_deviation,
            "argmax": p.argmax.map(|(i, j)| [i + 1, j + 1]),
        })
    } else {
        Value::Null
    };
    let status: Vec<Vec<&str>> =
        report.entry_status.iter().map(|r| r.iter().map(|s| s.as_str()).collect()).collect();
    let result = json!({
        "truncated_set": report.truncated_set.iter().map(|i| i + 1).collect::<Vec<_>>(),
        "omega": matrix_json(&report.omega_before),
        "omega_star": matrix_json(&report.omega_after),
        "entry_status": status,
        "max_invariant_deviation": report.max_invariant_deviation,
        "tolerance": matrix_json(&report.tolerance),
        "moments": moments_json(&report.moments),
        "conjecture_probe": probe,
    });
    let input = input_json(&mean, "omega", &omega, &lower, &upper);
    Ok(json_text(&document("precision", &cfg, input, json!({ "box": bounds }), result)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(Axis::parse("-1:1:3").unwrap().points(), vec![-1.0, 0.0, 1.0]);
        for bad in ["1:0:5", "0:1:1", "0:1", "a:1:3", "0:inf:3"] {
            assert!(Axis::parse(bad).is_err(), "{bad}");
        }
        assert_eq!(parse_grid("0:1:5", 2).unwrap().len(), 2);
        assert!(parse_grid("0:1:5,0:1:5,0:1:5", 2).is_err());
    }

    #[test]
    fn dims_parsing() {
        assert_eq!(parse_dims("2", 3).unwrap(), vec![1]);
        assert_eq!(parse_dims("1,3", 3).unwrap(), vec![0, 2]);
        assert!(matches!(parse_dims("1,1", 3), Err(CliError::UsageNumeric(Error::DuplicateIndex { .. }))));
        assert!(parse_dims("0", 3).is_err());
        assert!(parse_dims("4", 3).is_err());
    }
}
