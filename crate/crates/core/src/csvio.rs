//! Minimal CSV reading shared by the file loaders. All formats in this
//! crate are plain comma-separated tables with a fixed header row, LF line
//! endings and no quoting.

use std::fs;
use std::path::Path;

/// One parsed data row: 1-based line number plus its fields.
pub(crate) struct Row {
    pub line: usize,
    pub fields: Vec<String>,
}

/// Reads `path`, checks the header matches `header` exactly and returns the
/// remaining non-empty rows split on commas.
pub(crate) fn read_table(
    path: &Path,
    header: &str,
) -> Result<Vec<Row>, (usize, String)> {
    let text = fs::read_to_string(path).map_err(|e| (0, format!("cannot read: {e}")))?;
    parse_table(&text, header)
}

/// Same as [`read_table`] for already-loaded text.
pub(crate) fn parse_table(text: &str, header: &str) -> Result<Vec<Row>, (usize, String)> {
    let mut rows = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim_end_matches('\r') == header => {}
        Some((_, first)) => {
            return Err((1, format!("expected header `{header}`, found `{first}`")));
        }
        None => return Err((1, format!("empty file, expected header `{header}`"))),
    }
    let width = header.split(',').count();
    for (idx, raw) in lines {
        let line = idx + 1;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<String> = trimmed.split(',').map(|f| f.to_string()).collect();
        if fields.len() != width {
            return Err((line, format!("expected {width} fields, found {}", fields.len())));
        }
        rows.push(Row { line, fields });
    }
    Ok(rows)
}

/// Parses one field with positional error context.
pub(crate) fn field<T: std::str::FromStr>(
    row: &Row,
    col: usize,
    what: &str,
) -> Result<T, (usize, String)> {
    let raw = &row.fields[col];
    raw.trim()
        .parse::<T>()
        .map_err(|_| (row.line, format!("invalid {what}: `{raw}`")))
}

/// Rejects empty or whitespace-containing identifier fields.
pub(crate) fn ident(row: &Row, col: usize, what: &str) -> Result<String, (usize, String)> {
    let raw = row.fields[col].trim();
    if raw.is_empty() || raw.contains(char::is_whitespace) {
        return Err((row.line, format!("invalid {what}: `{}`", row.fields[col])));
    }
    Ok(raw.to_string())
}
