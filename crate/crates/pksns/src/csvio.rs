//! Diagnostics CSV: one header row with the [`DiagRecord::COLUMNS`] names,
//! floats with 17 significant digits, flags as an integer.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use pksns_core::DiagRecord;

use crate::error::{io_err, Error, Result};

pub fn header_line() -> String {
    DiagRecord::COLUMNS.join(",")
}

pub fn format_record(r: &DiagRecord) -> String {
    let mut s = String::with_capacity(16 * 24);
    for v in r.floats() {
        s.push_str(&format!("{v:.16e},"));
    }
    s.push_str(&r.flags.to_string());
    s
}

/// Appending writer; a missing or empty file gets the header first, an existing
/// one must carry the same header.
pub struct CsvWriter {
    path: PathBuf,
    file: File,
}

impl CsvWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut file = File::create(path).map_err(io_err(path))?;
        writeln!(file, "{}", header_line()).map_err(io_err(path))?;
        Ok(Self { path: path.to_owned(), file })
    }

    pub fn append(path: &Path) -> Result<Self> {
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        if !fresh {
            let f = File::open(path).map_err(io_err(path))?;
            let mut first = String::new();
            BufReader::new(f).read_line(&mut first).map_err(io_err(path))?;
            if first.trim_end() != header_line() {
                return Err(Error::Csv { path: path.to_owned(), reason: "existing header does not match the diagnostics schema".into() });
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
        if fresh {
            writeln!(file, "{}", header_line()).map_err(io_err(path))?;
        }
        Ok(Self { path: path.to_owned(), file })
    }

    pub fn write(&mut self, r: &DiagRecord) -> Result<()> {
        writeln!(self.file, "{}", format_record(r)).map_err(io_err(&self.path))?;
        self.file.flush().map_err(io_err(&self.path))
    }
}

pub fn write_csv(records: &[DiagRecord], path: &Path) -> Result<()> {
    let mut w = CsvWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<DiagRecord>> {
    let bad = |reason: String| Error::Csv { path: path.to_owned(), reason };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_owned).collect();
    if header != DiagRecord::COLUMNS {
        return Err(bad(format!("unexpected columns {header:?}")));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let mut v = [0.0; 15];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = row[k].parse().map_err(|e| bad(format!("row {}: column {}: {e}", i + 1, DiagRecord::COLUMNS[k])))?;
        }
        let flags = row[15].parse().map_err(|e| bad(format!("row {}: flags: {e}", i + 1)))?;
        out.push(DiagRecord::from_floats(v, flags));
    }
    Ok(out)
}

/// Keeps only rows with `t <= t_max`; used before appending after a restart.
pub fn truncate_after(path: &Path, t_max: f64) -> Result<Vec<DiagRecord>> {
    let rows: Vec<DiagRecord> = read_csv(path)?.into_iter().filter(|r| r.t <= t_max).collect();
    write_csv(&rows, path)?;
    Ok(rows)
}

/// Writes a small table with a header and preformatted rows.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv { path: path.to_owned(), reason: e.to_string() })?;
    let wrap = |e: csv::Error| Error::Csv { path: path.to_owned(), reason: e.to_string() };
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(r).map_err(wrap)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
