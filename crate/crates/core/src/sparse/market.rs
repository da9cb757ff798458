//! Matrix Market coordinate files (`real general` only).
//!
//! Indices are 1-based on disk and 0-based in memory.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::SparseDesign;
use crate::error::FormatError;

pub const HEADER: &str = "%%MatrixMarket matrix coordinate real general";

pub fn read_path(path: &Path) -> Result<SparseDesign, FormatError> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| FormatError::io(&name, e))?;
    read(BufReader::new(file), &name)
}

pub fn read<R: BufRead>(reader: R, source_name: &str) -> Result<SparseDesign, FormatError> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let parse_err = |line, msg: String| FormatError::parse(source_name, line, msg);

    let (line_no, banner) = match lines.next() {
        Some((n, l)) => (n, l.map_err(|e| FormatError::io(source_name, e))?),
        None => return Err(parse_err(1, "empty file".into())),
    };
    let tokens: Vec<String> = banner
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(line_no, format!("expected '{HEADER}'")));
    }
    if tokens[2] != "coordinate" || tokens[3] != "real" || tokens[4] != "general" {
        return Err(parse_err(
            line_no,
            format!(
                "unsupported layout '{} {} {}'; only 'coordinate real general' is read",
                tokens[2], tokens[3], tokens[4]
            ),
        ));
    }

    let mut shape: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    for (line_no, line) in lines {
        let line = line.map_err(|e| FormatError::io(source_name, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match shape {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(line_no, "expected 'rows cols entries'".into()));
                }
                let parsed: Result<Vec<usize>, _> = fields.iter().map(|f| f.parse()).collect();
                let dims = parsed.map_err(|e| parse_err(line_no, format!("bad size line: {e}")))?;
                shape = Some((dims[0], dims[1], dims[2]));
                entries.reserve(dims[2]);
            }
            Some((rows, cols, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(line_no, "expected 'row col value'".into()));
                }
                let row: usize = fields[0]
                    .parse()
                    .map_err(|e| parse_err(line_no, format!("bad row index: {e}")))?;
                let col: usize = fields[1]
                    .parse()
                    .map_err(|e| parse_err(line_no, format!("bad column index: {e}")))?;
                let value: f64 = fields[2]
                    .parse()
                    .map_err(|e| parse_err(line_no, format!("bad value: {e}")))?;
                if row == 0 || col == 0 || row > rows || col > cols {
                    return Err(parse_err(
                        line_no,
                        format!("index ({row}, {col}) outside a {rows}x{cols} matrix (1-based)"),
                    ));
                }
                if !value.is_finite() {
                    return Err(parse_err(line_no, "non-finite value".into()));
                }
                entries.push((row - 1, col - 1, value));
            }
        }
    }

    let (rows, cols, declared) =
        shape.ok_or_else(|| parse_err(line_no + 1, "missing size line".into()))?;
    if entries.len() != declared {
        return Err(FormatError::Model {
            source_name: source_name.to_string(),
            message: format!("size line declares {declared} entries, found {}", entries.len()),
        });
    }
    SparseDesign::from_triplets(rows, cols, &entries).map_err(|error| FormatError::Invalid {
        source_name: source_name.to_string(),
        error,
    })
}

pub fn write_path(m: &SparseDesign, path: &Path) -> Result<(), FormatError> {
    let name = path.display().to_string();
    let file = File::create(path).map_err(|e| FormatError::io(&name, e))?;
    let mut out = BufWriter::new(file);
    write(m, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| FormatError::io(&name, e))
}

/// Writes entries in column-major order. Values use the shortest decimal
/// form that parses back to the same `f64`.
pub fn write<W: Write>(m: &SparseDesign, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{HEADER}")?;
    writeln!(out, "{} {} {}", m.n_rows(), m.n_cols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}
