//! Shared CSV plumbing: LF-terminated writers, shortest round-trip number
//! formatting, and the absent-value marker.

use crate::error::{Error, Result};

pub const ABSENT: &str = "NA";

pub(crate) fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

pub(crate) fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

pub(crate) fn finish(wtr: csv::Writer<Vec<u8>>) -> String {
    let bytes = wtr
        .into_inner()
        .expect("in-memory writer cannot fail to flush");
    String::from_utf8(bytes).expect("writer only receives UTF-8 fields")
}

/// Renders a header and rows of preformatted fields as LF-terminated CSV.
pub fn table<R, F>(header: &[&str], rows: R) -> String
where
    R: IntoIterator<Item = Vec<F>>,
    F: AsRef<[u8]>,
{
    let mut wtr = writer();
    wtr.write_record(header).unwrap();
    for row in rows {
        wtr.write_record(row).unwrap();
    }
    finish(wtr)
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_else(|| ABSENT.to_string())
}

pub(crate) fn header_of(record: &csv::StringRecord) -> String {
    record.iter().collect::<Vec<_>>().join(",")
}

pub(crate) fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

pub(crate) fn parse_year(field: &str, line: u64) -> Result<i32> {
    field.parse::<i32>().map_err(|_| Error::Malformed {
        line,
        message: format!("year {field:?} is not an integer"),
    })
}

pub(crate) fn parse_number(field: &str, what: &str, line: u64) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Malformed {
            line,
            message: format!("{what} {field:?} is not a finite number"),
        }),
    }
}
