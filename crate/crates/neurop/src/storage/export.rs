//! Human-readable exports: RFC-4180-style CSV and 8-bit grayscale PGM (P5).

use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Field2D;

use super::bytes::write_file_atomic;

/// Formats an `f64` with `.` as the decimal separator (Rust's shortest
/// round-trip formatting).
pub fn format_float(v: f64) -> String {
    format!("{v}")
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') || field.contains('\r') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Writes a CSV file with CRLF record separators and minimal quoting.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    let push_record = |out: &mut String, fields: &[String]| {
        let line: Vec<String> = fields.iter().map(|f| csv_escape(f)).collect();
        out.push_str(&line.join(","));
        out.push_str("\r\n");
    };
    push_record(&mut out, header);
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Format(format!(
                "csv: row has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        push_record(&mut out, row);
    }
    write_file_atomic(path, out.as_bytes())
}

/// Writes a field as binary 8-bit PGM, mapping `[lo, hi]` linearly onto
/// `[0, 255]` with clamping.
pub fn write_pgm(path: &Path, field: &Field2D, lo: f64, hi: f64) -> Result<()> {
    if !(hi > lo) {
        return Err(Error::arg("pgm", format!("invalid bounds [{lo}, {hi}]")));
    }
    let mut out = format!("P5\n{} {}\n255\n", field.w(), field.h()).into_bytes();
    let scale = 255.0 / (hi - lo);
    out.extend(field.data().iter().map(|&v| {
        let t = ((v - lo) * scale).round();
        t.clamp(0.0, 255.0) as u8
    }));
    write_file_atomic(path, &out)
}

/// Writes a field as PGM using its own min/max as bounds; returns the bounds
/// used (for a sidecar file). Constant fields map to mid-gray.
pub fn write_pgm_auto(path: &Path, field: &Field2D) -> Result<(f64, f64)> {
    let lo = field.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = field.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    write_pgm(path, field, lo, hi)?;
    Ok((lo, hi))
}
