//! Result table and CSV emission.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub snr_db: f64,
    pub method: String,
    pub nmse: f64,
    pub seed: u64,
}

/// Writes `snr_db,method,nmse,seed` rows with 12 significant digits on the
/// NMSE and LF line endings; byte-identical for identical inputs.
pub fn emit_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(64 + rows.len() * 48);
    out.extend_from_slice(b"snr_db,method,nmse,seed\n");
    for row in rows {
        writeln!(
            out,
            "{},{},{:.11e},{}",
            row.snr_db, row.method, row.nmse, row.seed
        )?;
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
