//! Result emission. CSV is the primary format; numbers are printed with
//! Rust's shortest-round-trip float formatting so a parse-and-reprint
//! cycle is byte-identical.

use std::io::Write;
use std::path::Path;

use crate::sim::SweepRow;

/// Column order of the CSV output. This is the stable schema; downstream
/// tooling may rely on it.
pub const CSV_HEADER: &str =
    "snr_db,scheme,frames,data_bits,bit_errors,ber,mean_nmse_db,mean_papr_db,mean_iterations_used";

/// Supported output encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Render rows as CSV with the fixed header.
pub fn csv_string(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.snr_db,
            r.scheme,
            r.frames,
            r.data_bits,
            r.bit_errors,
            r.ber,
            r.mean_nmse_db,
            r.mean_papr_db,
            r.mean_iterations_used
        ));
    }
    out
}

/// Parse rows back from CSV text. Inverse of [`csv_string`]; scheme tokens
/// never contain commas, so plain splitting is exact.
pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        Some(h) => return Err(format!("unexpected header: {h}")),
        None => return Err("empty input".into()),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(format!(
                "line {}: expected 9 fields, got {}",
                i + 2,
                fields.len()
            ));
        }
        let num = |j: usize| -> Result<f64, String> {
            fields[j]
                .parse()
                .map_err(|e| format!("line {}: field {}: {e}", i + 2, j + 1))
        };
        let int = |j: usize| -> Result<usize, String> {
            fields[j]
                .parse()
                .map_err(|e| format!("line {}: field {}: {e}", i + 2, j + 1))
        };
        rows.push(SweepRow {
            snr_db: num(0)?,
            scheme: fields[1].to_string(),
            frames: int(2)?,
            data_bits: int(3)?,
            bit_errors: int(4)?,
            ber: num(5)?,
            mean_nmse_db: num(6)?,
            mean_papr_db: num(7)?,
            mean_iterations_used: num(8)?,
            failed_trials: 0,
        });
    }
    Ok(rows)
}

/// Render rows as a pretty-printed JSON array.
pub fn json_string(rows: &[SweepRow]) -> Result<String, String> {
    serde_json::to_string_pretty(rows)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| e.to_string())
}

/// Write rows to `destination`, or stdout when none is given.
pub fn emit_results(
    rows: &[SweepRow],
    format: OutputFormat,
    destination: Option<&Path>,
) -> Result<(), String> {
    if rows.is_empty() {
        return Err("no rows to emit".into());
    }
    let text = match format {
        OutputFormat::Csv => csv_string(rows),
        OutputFormat::Json => json_string(rows)?,
    };
    match destination {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| format!("writing {}: {e}", path.display()))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(|e| format!("writing stdout: {e}"))
        }
    }
}
