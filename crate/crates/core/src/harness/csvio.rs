//! `user,item,rating` CSV files.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Third-column names accepted as a header on line 1.
const RATING_HEADERS: &[&str] = &[
    "rating",
    "ratings",
    "value",
    "score",
    "stars",
    "preference",
    "pref",
    "r",
];

fn is_header(record: &csv::StringRecord) -> bool {
    match record.get(2) {
        Some(field) => field.parse::<f64>().is_err() && RATING_HEADERS.contains(&field.to_ascii_lowercase().as_str()),
        None => false,
    }
}

pub fn read_ratings_csv(path: impl AsRef<Path>) -> Result<Vec<(String, String, f64)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ratings_csv(BufReader::new(file))
}

/// Parses `user,item,rating` records. Line 1 is skipped when its third
/// field is a rating column name. Errors carry 1-based line numbers.
pub fn parse_ratings_csv<R: Read>(reader: R) -> Result<Vec<(String, String, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if idx == 0 && line == 1 && is_header(&record) {
            continue;
        }
        let bad = |message: String| Error::Parse { line, message };
        if record.len() != 3 {
            return Err(bad(format!(
                "expected 3 fields (user,item,rating), found {}",
                record.len()
            )));
        }
        let (user, item, raw) = (&record[0], &record[1], &record[2]);
        if user.is_empty() || item.is_empty() {
            return Err(bad("empty user or item token".into()));
        }
        let value: f64 = raw.parse().map_err(|_| bad(format!("invalid rating {raw:?}")))?;
        if !value.is_finite() {
            return Err(bad(format!("non-finite rating {raw:?}")));
        }
        out.push((user.to_owned(), item.to_owned(), value));
    }
    Ok(out)
}

/// Writes a `user,item,rating` header and one record per triple.
pub fn write_ratings_csv<W, I, U, T>(out: W, triples: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (U, T, f64)>,
    U: AsRef<str>,
    T: AsRef<str>,
{
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| Error::InvalidParameter(format!("csv write failed: {e}"));
    w.write_record(["user", "item", "rating"]).map_err(map)?;
    for (u, i, v) in triples {
        w.write_record([u.as_ref(), i.as_ref(), &v.to_string()]).map_err(map)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidParameter(format!("csv write failed: {e}")))?;
    Ok(())
}
