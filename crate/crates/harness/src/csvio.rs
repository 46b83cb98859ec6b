//! Versioned CSV reading and writing.
//!
//! Every file starts with a `# format: gsml.<kind>.v1` line followed by a
//! header row; readers check both before touching the data. Floats are
//! written with Rust's shortest round-trip formatting, so a parse of a file
//! recovers the exact bit patterns that produced it and reruns are
//! byte-comparable.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use gsml_core::error::{Error, Result};

/// Write `rows` under the versioned `kind` marker and `header`.
pub fn write_csv<P: AsRef<Path>>(
    path: P,
    kind: &str,
    header: &str,
    rows: &[Vec<String>],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    writeln!(out, "# format: gsml.{kind}.v1")?;
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Incremental writer used where results must hit disk per batch.
pub struct CsvWriter {
    out: BufWriter<File>,
    columns: usize,
}

impl CsvWriter {
    pub fn create<P: AsRef<Path>>(path: P, kind: &str, header: &str) -> Result<CsvWriter> {
        let mut out = BufWriter::new(File::create(path.as_ref())?);
        writeln!(out, "# format: gsml.{kind}.v1")?;
        writeln!(out, "{header}")?;
        Ok(CsvWriter {
            out,
            columns: header.split(',').count(),
        })
    }

    pub fn write_row(&mut self, row: &[String]) -> Result<()> {
        debug_assert_eq!(row.len(), self.columns, "row width must match the header");
        writeln!(self.out, "{}", row.join(","))?;
        Ok(())
    }

    /// Push everything buffered so far to the file.
    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Read a file written by [`write_csv`], validating marker and header.
///
/// Returns the data rows split on commas; blank lines are skipped.
pub fn read_csv<P: AsRef<Path>>(path: P, kind: &str, header: &str) -> Result<Vec<Vec<String>>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let marker = lines
        .next()
        .ok_or_else(|| Error::format(format!("{}: empty file", path.display())))??;
    let expected = format!("# format: gsml.{kind}.v1");
    if marker != expected {
        return Err(Error::format(format!(
            "{}: expected marker {expected:?}, found {marker:?}",
            path.display()
        )));
    }
    let head = lines
        .next()
        .ok_or_else(|| Error::format(format!("{}: missing header", path.display())))??;
    if head != header {
        return Err(Error::format(format!(
            "{}: expected header {header:?}, found {head:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        rows.push(line.split(',').map(str::to_owned).collect());
    }
    Ok(rows)
}

/// Parse one CSV field as `f64`.
pub fn field_f64(row: &[String], idx: usize) -> Result<f64> {
    let raw = row
        .get(idx)
        .ok_or_else(|| Error::format(format!("missing column {idx}")))?;
    raw.parse()
        .map_err(|_| Error::format(format!("column {idx}: {raw:?} is not a number")))
}

/// Parse one CSV field as `usize`.
pub fn field_usize(row: &[String], idx: usize) -> Result<usize> {
    let raw = row
        .get(idx)
        .ok_or_else(|| Error::format(format!("missing column {idx}")))?;
    raw.parse()
        .map_err(|_| Error::format(format!("column {idx}: {raw:?} is not an index")))
}

/// Shortest round-trip decimal for a float field.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn roundtrip_preserves_bits() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let values = [1.0 / 3.0, -0.1, 2.0f64.powi(-52), 1e300];
        let rows: Vec<Vec<String>> = values
            .iter()
            .map(|&v| vec!["x".into(), fmt_f64(v)])
            .collect();
        write_csv(&path, "test", "name,value", &rows).unwrap();
        let back = read_csv(&path, "test", "name,value").unwrap();
        assert_eq!(back.len(), values.len());
        for (row, &v) in back.iter().zip(&values) {
            assert_eq!(field_f64(row, 1).unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn wrong_marker_or_header_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&path, "alpha", "a,b", &[]).unwrap();
        assert!(read_csv(&path, "beta", "a,b").is_err());
        assert!(read_csv(&path, "alpha", "a,c").is_err());
        assert!(read_csv(&path, "alpha", "a,b").is_ok());
    }
}
