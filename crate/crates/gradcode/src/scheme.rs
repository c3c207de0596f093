//! Scheme files: a JSON document holding one encoding matrix.
//!
//! ```text
//! {
//!   "version": 1,
//!   "kind": "cyc",
//!   "n": 3,
//!   "k": 3,
//!   "s": 1,
//!   "h_seed": 7,
//!   "B": [
//!     [0.5, 1.0, 0.0],
//!     ...
//!   ]
//! }
//! ```
//!
//! Fields are written in the order shown; `h_seed` only for cyclic codes.
//! Entries use the shortest decimal text that parses back to the same
//! `f64`, so a write/read round trip is lossless. Plan files add `alpha`,
//! `naive_per_worker` and `naive_assignment` (one list of naive partition
//! indices per worker) before `B`, which then holds the coded stage.

use std::fmt::Write as _;

use gradcode_core::{CodeKind, GradientCode, Mat, TwoStagePlan};
use serde::Deserialize;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Field {
        field: &'static str,
        message: String,
    },
}

impl ParseError {
    fn field(field: &'static str, message: impl Into<String>) -> Self {
        ParseError::Field {
            field,
            message: message.into(),
        }
    }
}

impl From<serde_json::Error> for ParseError {
    fn from(e: serde_json::Error) -> Self {
        // serde_json appends " at line L column C"; keep just the message
        let full = e.to_string();
        let message = match full.rfind(" at line ") {
            Some(i) => full[..i].to_string(),
            None => full,
        };
        ParseError::Syntax {
            line: e.line(),
            column: e.column(),
            message,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    version: u32,
    kind: String,
    n: usize,
    k: usize,
    s: usize,
    #[serde(default)]
    h_seed: Option<u64>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    naive_per_worker: Option<usize>,
    #[serde(default)]
    naive_assignment: Option<Vec<Vec<usize>>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
}

fn num(x: f64) -> String {
    serde_json::to_string(&x).expect("matrix entries are finite")
}

fn write_header(out: &mut String, code: &GradientCode) {
    let _ = writeln!(out, "{{");
    let _ = writeln!(out, "  \"version\": {FORMAT_VERSION},");
    let _ = writeln!(out, "  \"kind\": \"{}\",", code.kind());
    let _ = writeln!(out, "  \"n\": {},", code.n());
    let _ = writeln!(out, "  \"k\": {},", code.k());
    let _ = writeln!(out, "  \"s\": {},", code.s());
    if let Some(seed) = code.h_seed() {
        let _ = writeln!(out, "  \"h_seed\": {seed},");
    }
}

fn write_b(out: &mut String, b: &Mat) {
    let _ = writeln!(out, "  \"B\": [");
    for i in 0..b.rows() {
        let row: Vec<String> = b.row(i).iter().map(|&x| num(x)).collect();
        let sep = if i + 1 < b.rows() { "," } else { "" };
        let _ = writeln!(out, "    [{}]{sep}", row.join(", "));
    }
    let _ = writeln!(out, "  ]");
    let _ = writeln!(out, "}}");
}

pub fn export_code(code: &GradientCode) -> String {
    let mut out = String::new();
    write_header(&mut out, code);
    write_b(&mut out, code.b());
    out
}

pub fn export_plan(plan: &TwoStagePlan) -> String {
    let mut out = String::new();
    write_header(&mut out, plan.coded());
    let _ = writeln!(out, "  \"alpha\": {},", num(plan.alpha()));
    let _ = writeln!(out, "  \"naive_per_worker\": {},", plan.naive_per_worker());
    let _ = writeln!(out, "  \"naive_assignment\": [");
    for w in 0..plan.n() {
        let parts: Vec<String> = plan
            .naive_assignment(w)
            .expect("worker in range")
            .map(|p| p.to_string())
            .collect();
        let sep = if w + 1 < plan.n() { "," } else { "" };
        let _ = writeln!(out, "    [{}]{sep}", parts.join(", "));
    }
    let _ = writeln!(out, "  ],");
    write_b(&mut out, plan.coded().b());
    out
}

fn code_from_raw(raw: &RawScheme) -> Result<GradientCode, ParseError> {
    if raw.version != FORMAT_VERSION {
        return Err(ParseError::field(
            "version",
            format!(
                "unsupported version {}, expected {FORMAT_VERSION}",
                raw.version
            ),
        ));
    }
    let kind: CodeKind = raw
        .kind
        .parse()
        .map_err(|_| ParseError::field("kind", format!("unknown kind `{}`", raw.kind)))?;
    if raw.b.len() != raw.n {
        return Err(ParseError::field(
            "B",
            format!("{} rows, but n = {}", raw.b.len(), raw.n),
        ));
    }
    if let Some(i) = raw.b.iter().position(|row| row.len() != raw.k) {
        return Err(ParseError::field(
            "B",
            format!("row {i} has {} entries, but k = {}", raw.b[i].len(), raw.k),
        ));
    }
    let b = Mat::from_rows(&raw.b).map_err(|e| ParseError::field("B", e.to_string()))?;
    GradientCode::from_parts(kind, raw.n, raw.k, raw.s, b, raw.h_seed).map_err(|e| {
        let field = match e {
            gradcode_core::Error::InvalidParameter(ref m) if m.contains("h_seed") => "h_seed",
            gradcode_core::Error::Divisibility { .. } => "s",
            _ => "B",
        };
        ParseError::field(field, e.to_string())
    })
}

/// Reads a scheme file. Plan-only fields, if present, are ignored.
pub fn import_code(text: &str) -> Result<GradientCode, ParseError> {
    let raw: RawScheme = serde_json::from_str(text)?;
    code_from_raw(&raw)
}

pub fn import_plan(text: &str) -> Result<TwoStagePlan, ParseError> {
    let raw: RawScheme = serde_json::from_str(text)?;
    let code = code_from_raw(&raw)?;
    let alpha = raw
        .alpha
        .ok_or_else(|| ParseError::field("alpha", "missing; not a plan file"))?;
    let m = raw
        .naive_per_worker
        .ok_or_else(|| ParseError::field("naive_per_worker", "missing; not a plan file"))?;
    let plan = TwoStagePlan::from_parts(alpha, m, code).map_err(|e| {
        let field = match e {
            gradcode_core::Error::InvalidAlpha(_) => "alpha",
            _ => "naive_per_worker",
        };
        ParseError::field(field, e.to_string())
    })?;
    let assignment = raw
        .naive_assignment
        .ok_or_else(|| ParseError::field("naive_assignment", "missing; not a plan file"))?;
    if assignment.len() != plan.n() {
        return Err(ParseError::field(
            "naive_assignment",
            format!("{} workers listed, but n = {}", assignment.len(), plan.n()),
        ));
    }
    for (w, parts) in assignment.iter().enumerate() {
        let expected: Vec<usize> = plan.naive_assignment(w).expect("worker in range").collect();
        if *parts != expected {
            return Err(ParseError::field(
                "naive_assignment",
                format!("worker {w} lists {parts:?}, expected {expected:?}"),
            ));
        }
    }
    Ok(plan)
}
