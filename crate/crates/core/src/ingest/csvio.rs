use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// Open a delimited file and check that every required column is present.
pub(crate) fn open(path: &Path, required: &[&str]) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(BufReader::with_capacity(1 << 20, file));
    if rdr.headers().map(|h| h.is_empty()).unwrap_or(true) {
        // Empty file: no header, no rows.
        return Ok(rdr);
    }
    let headers = rdr.headers().map_err(|e| Error::csv(format!("reading {}", path.display()), e))?;
    let missing: Vec<&str> = required
        .iter()
        .copied()
        .filter(|col| !headers.iter().any(|h| h == *col))
        .collect();
    if !missing.is_empty() {
        return Err(Error::parse(
            path,
            1,
            format!("header is missing column(s) {}", missing.join(", ")),
        ));
    }
    Ok(rdr)
}

/// Deserialize every row, reporting the offending line on failure.
pub(crate) fn for_each_row<T, F>(path: &Path, required: &[&str], mut f: F) -> Result<()>
where
    T: DeserializeOwned,
    F: FnMut(u64, T) -> Result<()>,
{
    let mut rdr = open(path, required)?;
    if rdr.headers().map(|h| h.is_empty()).unwrap_or(true) {
        return Ok(());
    }
    let headers = rdr.headers().cloned().map_err(|e| Error::csv(path.display().to_string(), e))?;
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map(|p| p.line()).unwrap_or(0);
                let row: T = record
                    .deserialize(Some(&headers))
                    .map_err(|e| Error::parse(path, line, e.to_string()))?;
                f(line, row)?;
            }
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(Error::parse(path, line, e.to_string()));
            }
        }
    }
    Ok(())
}

/// Create a writer for `path`; callers own the atomic-rename policy.
pub(crate) fn writer<W: Write>(inner: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(inner)
}
