use std::io::Write;
use std::path::Path;

use chrono::NaiveDateTime;

use super::timestamp::{format_timestamp, parse_timestamp, Timezone};
use super::{csvio, IngestReport, Transition, TransitionSet, VenueIdx, VenueSet};
use crate::error::{Error, Result};

/// Longest allowed gap between the two check-ins of a transition.
pub const MAX_TRANSITION_SECONDS: i64 = 3 * 3600;

/// One raw check-in of a user at a venue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckIn {
    pub user_key: String,
    pub ts: NaiveDateTime,
    pub venue: VenueIdx,
}

fn column(headers: &csv::StringRecord, name: &str) -> usize {
    headers.iter().position(|h| h == name).expect("header checked by csvio::open")
}

fn timestamp_field(path: &Path, line: u64, raw: &str, tz: Timezone) -> Result<NaiveDateTime> {
    parse_timestamp(raw, tz).ok_or_else(|| Error::parse(path, line, format!("unparseable timestamp {raw:?}")))
}

/// Read `user_key,start_ts,end_ts,src_venue,dst_venue`.
///
/// Records referencing unknown venues, venues outside every tract, or breaking the
/// transition rules (distinct venues, ordered times, three-hour window) are dropped and counted.
pub fn parse_transitions(
    path: &Path,
    venues: &VenueSet,
    tz: Timezone,
    report: &mut IngestReport,
) -> Result<TransitionSet> {
    const COLS: [&str; 5] = ["user_key", "start_ts", "end_ts", "src_venue", "dst_venue"];
    let mut rdr = csvio::open(path, &COLS)?;
    let mut out = Vec::new();
    if rdr.headers().map(|h| h.is_empty()).unwrap_or(true) {
        return Ok(out);
    }
    let headers = rdr.headers().cloned().map_err(|e| Error::csv(path.display().to_string(), e))?;
    let idx: Vec<usize> = COLS.iter().map(|c| column(&headers, c)).collect();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(Error::parse(path, line, e.to_string()));
            }
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        report.transitions_read += 1;
        let start_ts = timestamp_field(path, line, &record[idx[1]], tz)?;
        let end_ts = timestamp_field(path, line, &record[idx[2]], tz)?;
        let (Some(src), Some(dst)) = (venues.lookup(&record[idx[3]]), venues.lookup(&record[idx[4]])) else {
            report.transitions_unknown_venue += 1;
            continue;
        };
        let t = Transition {
            user_key: record[idx[0]].to_string(),
            start_ts,
            end_ts,
            src_venue: src,
            dst_venue: dst,
        };
        if !t.is_valid() {
            report.transitions_invalid += 1;
            continue;
        }
        if venues.get(src).tract_id.is_none() || venues.get(dst).tract_id.is_none() {
            report.transitions_unassigned_venue += 1;
            continue;
        }
        out.push(t);
    }
    if report.transitions_unassigned_venue > 0 {
        log::warn!(
            "{} transition(s) dropped: venue outside every tract",
            report.transitions_unassigned_venue
        );
    }
    Ok(out)
}

/// Read raw check-ins `user_key,ts,venue_id`; unknown venues are skipped and counted.
pub fn parse_checkins(path: &Path, venues: &VenueSet, tz: Timezone, report: &mut IngestReport) -> Result<Vec<CheckIn>> {
    #[derive(serde::Deserialize)]
    struct Row {
        user_key: String,
        ts: String,
        venue_id: String,
    }
    let mut out = Vec::new();
    csvio::for_each_row(path, &["user_key", "ts", "venue_id"], |line, row: Row| {
        report.checkins_read += 1;
        let ts = timestamp_field(path, line, &row.ts, tz)?;
        match venues.lookup(&row.venue_id) {
            Some(venue) => out.push(CheckIn {
                user_key: row.user_key,
                ts,
                venue,
            }),
            None => report.checkins_unknown_venue += 1,
        }
        Ok(())
    })?;
    Ok(out)
}

/// Pair consecutive check-ins of each user into transitions.
///
/// Check-ins are ordered by `(user_key, ts)`, ties keeping input order. A pair yields a
/// transition when the venues differ and the second check-in is at most three hours later.
pub fn derive_transitions(checkins: &[CheckIn]) -> TransitionSet {
    let mut order: Vec<usize> = (0..checkins.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&checkins[a], &checkins[b]);
        x.user_key.cmp(&y.user_key).then(x.ts.cmp(&y.ts))
    });
    order
        .windows(2)
        .filter_map(|w| {
            let (a, b) = (&checkins[w[0]], &checkins[w[1]]);
            let t = Transition {
                user_key: a.user_key.clone(),
                start_ts: a.ts,
                end_ts: b.ts,
                src_venue: a.venue,
                dst_venue: b.venue,
            };
            (a.user_key == b.user_key && t.is_valid()).then_some(t)
        })
        .collect()
}

/// Write transitions in the input format.
pub fn write_transitions<W: Write>(transitions: &[Transition], venues: &VenueSet, out: W) -> Result<()> {
    let mut w = csvio::writer(out);
    let err = |e| Error::csv("writing transitions", e);
    w.write_record(["user_key", "start_ts", "end_ts", "src_venue", "dst_venue"])
        .map_err(err)?;
    for t in transitions {
        w.write_record([
            t.user_key.as_str(),
            &format_timestamp(&t.start_ts),
            &format_timestamp(&t.end_ts),
            &venues.get(t.src_venue).venue_id,
            &venues.get(t.dst_venue).venue_id,
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("writing transitions", e))
}
