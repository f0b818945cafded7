//! Result persistence: CSV rows for plotting, JSON manifests for audit.

use std::io::Write;
use std::path::Path;

use spt_qcnn::Error;

use crate::experiments::ResultRecord;
use crate::config::OutputFormat;

pub const CSV_HEADER: &str = "sweep_value,depth,y,y_stderr,density,shots,seed";

pub fn csv_text(record: &ResultRecord) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &record.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.sweep_value, r.depth, r.y, r.y_stderr, r.density, r.shots, r.seed
        ));
    }
    out
}

pub fn json_text(record: &ResultRecord) -> String {
    let mut s = serde_json::to_string_pretty(record).expect("record serializes");
    s.push('\n');
    s
}

/// Writes the record in the requested format; plain text payloads
/// (expansions, truth tables) are written verbatim.
pub fn emit(record: &ResultRecord, format: OutputFormat, path: &str) -> Result<(), Error> {
    let io_err = |source| Error::Io {
        path: path.to_string(),
        source,
    };
    let payload = if let Some(text) = &record.text {
        text.clone()
    } else {
        match format {
            OutputFormat::Csv => csv_text(record),
            OutputFormat::Json => json_text(record),
        }
    };
    let mut file = std::fs::File::create(Path::new(path)).map_err(io_err)?;
    file.write_all(payload.as_bytes()).map_err(io_err)?;
    Ok(())
}
