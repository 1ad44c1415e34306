//! Text trace format for loss tensors, plus CSV export of aggregated losses.
//!
//! ```text
//! n s T UNIT            (or: n s T RANGE a b)
//! ℓ_0(0,0) ℓ_0(1,0) ... ℓ_0(s-1,0)
//! ℓ_0(0,1) ...
//! ...                   n·T value lines, expert-major then time
//! ```
//!
//! Line and column numbers in errors are 1-based.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::loss::{AggregatedLosses, LossTensor, Regime};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("reading trace: {0}")]
    Io(#[from] io::Error),
    #[error("line 1: malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: cannot parse {token:?} as a number")]
    BadValue {
        line: usize,
        column: usize,
        token: String,
    },
    #[error("line {line}, column {column}: value {value} violates {regime}")]
    RegimeViolation {
        line: usize,
        column: usize,
        value: f64,
        regime: Regime,
    },
}

pub fn ingest_trace(path: impl AsRef<Path>) -> Result<LossTensor, TraceError> {
    parse_trace(&fs::read_to_string(path)?)
}

pub fn parse_trace(text: &str) -> Result<LossTensor, TraceError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| TraceError::MalformedHeader("empty file".into()))?;
    let (n, s, horizon, regime) = parse_header(header)?;

    let rows = n * horizon;
    let mut values = Vec::with_capacity(rows * s);
    let mut seen = 0usize;
    for (k, line) in lines.enumerate() {
        let line_no = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        if seen == rows {
            return Err(TraceError::DimensionMismatch {
                line: line_no,
                expected: 0,
                found: line.split_whitespace().count(),
            });
        }
        let before = values.len();
        for (c, token) in line.split_whitespace().enumerate() {
            let v: f64 = token.parse().map_err(|_| TraceError::BadValue {
                line: line_no,
                column: c + 1,
                token: token.to_string(),
            })?;
            if !v.is_finite() {
                return Err(TraceError::BadValue {
                    line: line_no,
                    column: c + 1,
                    token: token.to_string(),
                });
            }
            values.push(v);
        }
        let found = values.len() - before;
        if found != s {
            return Err(TraceError::DimensionMismatch {
                line: line_no,
                expected: s,
                found,
            });
        }
        seen += 1;
    }
    if seen != rows {
        return Err(TraceError::DimensionMismatch {
            line: text.lines().count() + 1,
            expected: rows,
            found: seen,
        });
    }

    // Negative traces (e.g. negated accuracies) are shifted to start at zero.
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = (min < 0.0).then(|| -min);
    if let Some(delta) = shift {
        values.iter_mut().for_each(|v| *v += delta);
    }

    if let Some(k) = values.iter().position(|&v| !regime.admits(v)) {
        return Err(TraceError::RegimeViolation {
            line: k / s + 2,
            column: k % s + 1,
            value: values[k],
            regime,
        });
    }

    let mut tensor = LossTensor::new(n, s, horizon, regime, values)
        .map_err(|e| TraceError::MalformedHeader(e.to_string()))?;
    if let Some(delta) = shift {
        tensor.set_shift(delta);
    }
    Ok(tensor)
}

fn parse_header(line: &str) -> Result<(usize, usize, usize, Regime), TraceError> {
    let bad = |msg: &str| TraceError::MalformedHeader(format!("{msg} in {line:?}"));
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() < 4 {
        return Err(bad("expected `n s T regime`"));
    }
    let dim = |k: usize, name: &str| -> Result<usize, TraceError> {
        match tokens[k].parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(bad(&format!("{name} must be a positive integer"))),
        }
    };
    let (n, s, horizon) = (dim(0, "n")?, dim(1, "s")?, dim(2, "T")?);
    let regime = match (tokens[3].to_ascii_uppercase().as_str(), &tokens[4..]) {
        ("UNIT", []) => Regime::Unit,
        ("RANGE", [a, b]) => {
            let a: f64 = a.parse().map_err(|_| bad("RANGE bound a is not a number"))?;
            let b: f64 = b.parse().map_err(|_| bad("RANGE bound b is not a number"))?;
            Regime::range(a, b).map_err(|e| bad(&e.to_string()))?
        }
        ("RANGE", _) => return Err(bad("RANGE needs exactly two bounds")),
        ("UNIT", _) => return Err(bad("UNIT takes no bounds")),
        (other, _) => return Err(bad(&format!("unknown regime {other:?}"))),
    };
    Ok((n, s, horizon, regime))
}

/// Serialise in the trace format. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn export_trace(tensor: &LossTensor) -> String {
    let mut out = String::new();
    let regime = match tensor.regime() {
        Regime::Unit => "UNIT".to_string(),
        Regime::Range { a, b } => format!("RANGE {a} {b}"),
    };
    let _ = writeln!(
        out,
        "{} {} {} {}",
        tensor.experts(),
        tensor.servers(),
        tensor.horizon(),
        regime
    );
    for i in 0..tensor.experts() {
        for t in 0..tensor.horizon() {
            let row: Vec<String> = tensor.row(i, t).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    out
}

/// `expert,time,loss`, one row per `(i, t)`, expert-major.
pub fn aggregated_csv(agg: &AggregatedLosses) -> String {
    let mut out = String::from("expert,time,loss\n");
    for i in 0..agg.experts() {
        for t in 0..agg.horizon() {
            let _ = writeln!(out, "{i},{t},{}", agg.get(i, t));
        }
    }
    out
}
