//! Profile CSV: header `h,ratio,tau,corrected,source`, LF line endings,
//! numbers with 17 significant digits, `ratio` empty when unknown.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{ProfileRow, ProfileTable, Source};
use crate::error::{Error, Result};

const HEADER: [&str; 5] = ["h", "ratio", "tau", "corrected", "source"];

/// 17 significant digits; parses back to the identical `f64`.
pub fn csv_number(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_profile_csv<W: Write>(table: &ProfileTable, out: W) -> Result<()> {
    let mut w = ::csv::WriterBuilder::new().terminator(::csv::Terminator::Any(b'\n')).from_writer(out);
    let io = |e: ::csv::Error| Error::Io(e.to_string());
    w.write_record(HEADER).map_err(io)?;
    for r in table.rows() {
        w.write_record([
            csv_number(r.h),
            r.ratio.map(csv_number).unwrap_or_default(),
            csv_number(r.tau),
            r.corrected().to_string(),
            r.source.as_str().to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_profile_csv(table: &ProfileTable, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    write_profile_csv(table, std::io::BufWriter::new(file))
}

pub fn read_profile_csv<R: Read>(input: R) -> Result<ProfileTable> {
    let mut reader = ::csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    if header.iter().ne(HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {:?}, got {:?}", HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| Error::Parse { line, message };
        let number = |field: &str, name: &str| -> Result<f64> {
            field.trim().parse::<f64>().map_err(|_| bad(format!("{name}: cannot parse {field:?}")))
        };
        let h = number(&record[0], "h")?;
        let ratio = match record[1].trim() {
            "" => None,
            s => Some(number(s, "ratio")?),
        };
        let tau = number(&record[2], "tau")?;
        let corrected: bool = record[3]
            .trim()
            .parse()
            .map_err(|_| bad(format!("corrected: expected true or false, got {:?}", &record[3])))?;
        let source: Source = record[4].trim().parse().map_err(bad)?;
        if corrected != source.is_correction() {
            return Err(bad(format!("corrected={corrected} is inconsistent with source {}", source.as_str())));
        }
        rows.push(ProfileRow { h, ratio, tau, source });
    }
    ProfileTable::from_sorted(None, rows)
}

pub fn load_profile_csv(path: impl AsRef<Path>) -> Result<ProfileTable> {
    let file = File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_profile_csv(file)
}
