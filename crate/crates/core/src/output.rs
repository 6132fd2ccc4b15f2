//! Full-precision text formatting shared by every CSV writer.

use std::io::Write;

use crate::error::Result;

/// Formats a float with 17 significant digits, which round-trips exactly.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // Keeps the sign of negative zero out of the output for stable diffs.
        return "0".to_string();
    }
    format!("{v:.16e}")
}

/// Writes one CSV row of floats.
pub fn write_row(w: &mut impl Write, values: &[f64]) -> Result<()> {
    let line: Vec<String> = values.iter().map(|&v| fmt_f64(v)).collect();
    writeln!(w, "{}", line.join(","))?;
    Ok(())
}

/// Writes a CSV header.
pub fn write_header(w: &mut impl Write, names: &[&str]) -> Result<()> {
    writeln!(w, "{}", names.join(","))?;
    Ok(())
}
