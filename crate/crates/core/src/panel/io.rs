use std::io::Write;
use std::path::Path;

use super::{is_weekend, Panel, PanelRow, Provenance, ACTIVITY_COLUMNS, COVARIATE_COLUMNS};
use crate::error::{Error, Result};
use crate::ingest::{csv_writer, open_csv};

const BASE_COLUMNS: [&str; 11] = [
    "tract_id",
    "t",
    "crime",
    "past_crime",
    "checkins",
    "inout_flow",
    "selfloop_flow",
    "passthrough_flow",
    "x",
    "y",
    "weekend",
];

pub(super) fn write_panel<W: Write>(panel: &Panel, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    let ctx = "writing panel";
    let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
    if panel.has_activity() {
        header.extend(ACTIVITY_COLUMNS);
    }
    if panel.has_covariates() {
        header.extend(COVARIATE_COLUMNS);
    }
    w.write_record(&header).map_err(|e| Error::csv(ctx, e))?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for r in panel.rows() {
        rec.clear();
        rec.push(r.tract_id.clone());
        for v in [r.t as u64, r.crime, r.past_crime, r.checkins, r.inout_flow, r.selfloop_flow, r.passthrough_flow] {
            rec.push(v.to_string());
        }
        rec.push(r.x.to_string());
        rec.push(r.y.to_string());
        rec.push(u8::from(r.weekend).to_string());
        if let Some(a) = r.activity {
            rec.extend(a.iter().map(u64::to_string));
        }
        if let Some(c) = r.covariates {
            rec.extend(c.iter().map(f64::to_string));
        }
        w.write_record(&rec).map_err(|e| Error::csv(ctx, e))?;
    }
    w.flush().map_err(|e| Error::io(ctx, e))?;
    Ok(())
}

pub(super) fn read_panel(path: &Path, year: i32) -> Result<Panel> {
    let mut rdr = open_csv(path, &BASE_COLUMNS)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path.display().to_string(), e))?.clone();
    if headers.is_empty() {
        return Err(Error::parse(path, 1, "empty panel file"));
    }
    let col = |name: &str| headers.iter().position(|h| h == name);
    let base: Vec<usize> = BASE_COLUMNS.iter().map(|c| col(c).unwrap()).collect();
    let optional = |names: &[&str]| -> Result<Option<Vec<usize>>> {
        let found: Vec<Option<usize>> = names.iter().map(|c| col(c)).collect();
        match found.iter().filter(|f| f.is_some()).count() {
            0 => Ok(None),
            n if n == names.len() => Ok(Some(found.into_iter().flatten().collect())),
            _ => Err(Error::parse(path, 1, format!("incomplete column group {}", names.join(",")))),
        }
    };
    let activity_cols = optional(&ACTIVITY_COLUMNS)?;
    let cov_cols = optional(&COVARIATE_COLUMNS)?;

    let mut rows = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(path, line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let int = |i: usize| -> Result<u64> {
            field(i)
                .parse::<u64>()
                .map_err(|_| Error::parse(path, line, format!("{}: expected a count, got {:?}", &headers[i], field(i))))
        };
        let float = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, line, format!("{}: expected a number, got {:?}", &headers[i], field(i))))
        };
        let t = int(base[1])? as usize;
        if t >= crate::HOURS_PER_WEEK {
            return Err(Error::parse(path, line, format!("hour-of-week {t} out of range")));
        }
        let weekend = match field(base[10]) {
            "0" => false,
            "1" => true,
            other => return Err(Error::parse(path, line, format!("weekend: expected 0 or 1, got {other:?}"))),
        };
        if weekend != is_weekend(t) {
            return Err(Error::parse(path, line, format!("weekend flag inconsistent with hour {t}")));
        }
        let activity = match &activity_cols {
            Some(c) => Some([int(c[0])?, int(c[1])?, int(c[2])?, int(c[3])?, int(c[4])?]),
            None => None,
        };
        let covariates = match &cov_cols {
            Some(c) => Some([float(c[0])?, float(c[1])?, float(c[2])?]),
            None => None,
        };
        rows.push(PanelRow {
            tract_id: field(base[0]).to_string(),
            t,
            crime: int(base[2])?,
            past_crime: int(base[3])?,
            checkins: int(base[4])?,
            inout_flow: int(base[5])?,
            selfloop_flow: int(base[6])?,
            passthrough_flow: int(base[7])?,
            x: float(base[8])?,
            y: float(base[9])?,
            weekend,
            activity,
            covariates,
        });
    }
    Panel::from_rows(year, rows, Provenance::default())
}
