//! Result documents and output writing.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};
use tmvn_core::{MomentResult, QmcConfig, RectProbResult, SymMatrix};

use crate::CliError;

pub fn matrix_json(m: &SymMatrix) -> Value {
    json!(m.to_rows())
}

pub fn alpha_json(a: &RectProbResult) -> Value {
    json!({
        "value": a.value,
        "error_estimate": a.error_estimate,
        "points_used": a.points_used,
        "shifts_used": a.shifts_used,
    })
}

pub fn moments_json(m: &MomentResult) -> Value {
    json!({
        "method": m.method.as_str(),
        "mean": m.mean,
        "cov": matrix_json(&m.cov),
        "error_estimate": m.error_estimate,
        "asymmetry": m.asymmetry,
        "alpha": alpha_json(&m.alpha),
    })
}

/// Wraps a payload with tool metadata, the effective settings and the input
/// echo needed to reproduce it.
pub fn document(command: &str, cfg: &QmcConfig, input: Value, options: Value, result: Value) -> Value {
    let mut doc = Map::new();
    doc.insert("tool".into(), json!("tmvn"));
    doc.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    doc.insert("command".into(), json!(command));
    doc.insert("seed".into(), json!(cfg.seed));
    doc.insert(
        "qmc".into(),
        json!({
            "points": cfg.max_points_per_shift,
            "shifts": cfg.shifts,
            "target_error": cfg.target_abs_error,
            "seed": cfg.seed,
        }),
    );
    doc.insert("input".into(), input);
    doc.insert("options".into(), options);
    doc.insert("result".into(), result);
    Value::Object(doc)
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn csv_number(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_table(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.iter().map(|v| csv_number(*v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

pub fn json_text(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("serializable document");
    s.push('\n');
    s
}

/// Writes to stdout, or atomically to `path` through a temporary file in the
/// same directory.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
            out.flush().map_err(|e| CliError::Io(e.to_string()))
        }
        Some(p) => {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::Io(e.to_string()))?;
            tmp.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
            tmp.persist(p).map_err(|e| CliError::Io(e.to_string()))?;
            Ok(())
        }
    }
}
