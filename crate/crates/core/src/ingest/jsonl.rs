//! Line-oriented JSON reading and writing.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::records::Validate;
use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Malformed lines are reported and skipped.
    #[default]
    Lenient,
    /// The first malformed line aborts the load.
    Strict,
}

#[derive(Debug)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    /// Skipped lines (lenient mode only), each carrying its line number.
    pub skipped: Vec<IngestError>,
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses one line, mapping both JSON and validation failures to a
/// line-numbered error.
pub fn parse_line<T: DeserializeOwned + Validate>(
    path: &Path,
    line_no: usize,
    line: &str,
) -> Result<T, IngestError> {
    let line_err = |message: String| IngestError::Line {
        path: PathBuf::from(path),
        line: line_no,
        message,
    };
    let record: T = serde_json::from_str(line).map_err(|e| line_err(e.to_string()))?;
    record.validate().map_err(|e| line_err(e.to_string()))?;
    Ok(record)
}

/// Reads one JSON object per line. Blank lines are ignored; line numbers in
/// errors are 1-based.
pub fn load_jsonl<T: DeserializeOwned + Validate>(
    path: &Path,
    strictness: Strictness,
) -> Result<Loaded<T>, IngestError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Loaded {
        records: Vec::new(),
        skipped: Vec::new(),
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(path, i + 1, &line) {
            Ok(r) => out.records.push(r),
            Err(e) if strictness == Strictness::Strict => return Err(e),
            Err(e) => {
                tracing::warn!(error = %e, "skipping malformed record");
                out.skipped.push(e);
            }
        }
    }
    Ok(out)
}

pub fn save_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| io_err(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
