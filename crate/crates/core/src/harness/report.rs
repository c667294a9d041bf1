//! Bit-stable report emission.
//!
//! JSON goes through [`serde_json::Value`], whose maps are ordered, and a
//! formatter that prints every float with 17 significant digits. CSV cells
//! use the same float format.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::bounds::{BoundAudit, Constant, Tail};
use crate::direct_method::ConvergenceReport;
use crate::error::{Error, Result};
use crate::harness::verify::RunReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// A float in scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct StableFloats;

impl Formatter for StableFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// Serializes any value as sorted, float-stable JSON followed by a newline.
pub fn to_stable_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let tree = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, StableFloats);
    tree.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

/// One header row plus one row per point.
pub fn report_csv(report: &RunReport) -> Result<Vec<u8>> {
    let dim = report.config.function.space().dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index".to_string()];
    for k in 0..dim {
        header.push(format!("x{k}_re"));
        header.push(format!("x{k}_im"));
    }
    header.extend(
        ["deviation", "phi_tilde", "tail", "margin"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    for p in &report.points {
        let mut row = vec![p.index.to_string()];
        row.extend(p.x.to_real().into_iter().map(fmt_f64));
        row.push(fmt_f64(p.deviation));
        row.push(fmt_f64(p.phi_tilde));
        row.push(tail_cell(p.tail));
        row.push(fmt_f64(p.margin));
        w.write_record(&row)?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::Io(io::Error::other(e.to_string())))
}

fn tail_cell(t: Tail) -> String {
    match t {
        Tail::Finite(v) => fmt_f64(v),
        Tail::Unavailable => "unavailable".into(),
    }
}

/// One row per point: coordinates of `x` and `A(x)`, then convergence data.
pub fn approximations_csv(reports: &[ConvergenceReport], dim: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index".to_string()];
    for name in ["x", "a"] {
        for k in 0..dim {
            header.push(format!("{name}{k}_re"));
            header.push(format!("{name}{k}_im"));
        }
    }
    header.extend(["iterations", "converged", "tail_bound"].map(String::from));
    w.write_record(&header)?;
    for (i, r) in reports.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(r.point.to_real().into_iter().map(fmt_f64));
        row.extend(r.value.to_real().into_iter().map(fmt_f64));
        row.push(r.iterations.to_string());
        row.push(r.converged.to_string());
        row.push(tail_cell(r.tail_bound));
        w.write_record(&row)?;
    }
    finish(w)
}

/// A header and a single row.
pub fn audit_csv(a: &BoundAudit) -> Result<Vec<u8>> {
    let constant = |c: Constant| match c {
        Constant::Finite(v) => fmt_f64(v),
        Constant::Divergent => "divergent".to_string(),
    };
    let mut header: Vec<String> = ["which", "theta", "r", "rho2", "alpha", "beta", "paper_constant", "derived_constant", "empirical_sup"]
        .map(String::from)
        .to_vec();
    let mut row = vec![
        a.which.to_string(),
        fmt_f64(a.theta),
        fmt_f64(a.r),
        fmt_f64(a.rho2),
        fmt_f64(a.alpha),
        fmt_f64(a.beta),
        constant(a.paper_constant),
        constant(a.derived_constant),
        fmt_f64(a.empirical_sup),
    ];
    for (k, v) in &a.verdicts {
        header.push(k.clone());
        row.push(serde_json::to_value(v)?.as_str().unwrap_or_default().to_string());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    w.write_record(&row)?;
    finish(w)
}

pub fn render(report: &RunReport, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => to_stable_json(report),
        Format::Csv => report_csv(report),
    }
}

/// Writes `report` to `path`.
pub fn write_report(report: &RunReport, format: Format, path: &Path) -> Result<()> {
    fs::write(path, render(report, format)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_have_17_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        let v: f64 = fmt_f64(std::f64::consts::PI).parse().unwrap();
        assert_eq!(v, std::f64::consts::PI);
    }

    #[test]
    fn keys_are_sorted() {
        let out = to_stable_json(&json!({"b": 1, "a": 0.5, "c": [2.0]})).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "{\"a\":5.0000000000000000e-1,\"b\":1,\"c\":[2.0000000000000000e0]}\n"
        );
    }

    #[test]
    fn output_parses_back() {
        let out = to_stable_json(&json!({"x": -1.25e-300})).unwrap();
        let back: serde_json::Value = serde_json::from_slice(&out).unwrap();
        assert_eq!(back["x"].as_f64(), Some(-1.25e-300));
    }
}
