use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;

pub const REPORT_COLUMNS: [&str; 6] = ["layout", "method", "partner_type", "mean", "std", "n"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub layout: String,
    pub method: String,
    pub partner_type: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    /// Whitespace-aligned table for terminals.
    Text,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Text => "txt",
        }
    }
}

/// Render rows in input order. Floats use Rust's shortest round-trip form in
/// CSV and two decimals in text.
pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> Result<String, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r).map_err(|e| EvalError::Report(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| EvalError::Report(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| EvalError::Report(e.to_string()))
        }
        ReportFormat::Text => {
            let mut table: Vec<[String; 6]> = vec![REPORT_COLUMNS.map(String::from)];
            for r in rows {
                table.push([
                    r.layout.clone(),
                    r.method.clone(),
                    r.partner_type.clone(),
                    format!("{:.2}", r.mean),
                    format!("{:.2}", r.std),
                    r.n.to_string(),
                ]);
            }
            let widths: Vec<usize> = (0..6).map(|c| table.iter().map(|row| row[c].len()).max().unwrap_or(0)).collect();
            let mut out = String::new();
            for row in &table {
                let cells: Vec<String> = row
                    .iter()
                    .enumerate()
                    // Text columns left-aligned, numbers right-aligned.
                    .map(
                        |(c, s)| {
                            if c < 3 {
                                format!("{s:<w$}", w = widths[c])
                            } else {
                                format!("{s:>w$}", w = widths[c])
                            }
                        },
                    )
                    .collect();
                out.push_str(cells.join("  ").trim_end());
                out.push('\n');
            }
            Ok(out)
        }
    }
}

pub fn write_report(rows: &[ReportRow], path: &Path, format: ReportFormat) -> Result<(), EvalError> {
    let text = emit_report(rows, format)?;
    std::fs::write(path, text).map_err(|e| EvalError::Report(format!("{}: {e}", path.display())))
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>, EvalError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| EvalError::Report(e.to_string()))?;
    reader.deserialize().map(|r| r.map_err(|e| EvalError::Report(e.to_string()))).collect()
}
