//! CSV input and output.

use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{DailyFeatureVector, Measure};
use crate::projection::GpsRecord;
use crate::segmentation::{Event, MobilityTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TimeFormat {
    Epoch,
    Iso,
}

fn parse_iso(s: &str) -> Option<f64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_micros() as f64 / 1e6);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp_micros() as f64 / 1e6);
        }
    }
    None
}

/// Reads `timestamp,latitude,longitude[,accuracy]` rows. Timestamps are
/// epoch seconds or ISO-8601 (naive values are UTC); the format is taken from
/// the first row. Rows with accuracy above `max_accuracy_m` are dropped.
pub fn read_gps_csv<R: Read>(input: R, max_accuracy_m: Option<f64>) -> Result<Vec<GpsRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(ti), Some(lai), Some(loi)) = (col("timestamp"), col("latitude"), col("longitude")) else {
        return Err(Error::Parse("header must contain timestamp, latitude and longitude".into()));
    };
    let acc = col("accuracy");
    let mut format = None;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let ts = field(ti);
        let fmt = *format.get_or_insert(if ts.parse::<f64>().is_ok() { TimeFormat::Epoch } else { TimeFormat::Iso });
        let t = match fmt {
            TimeFormat::Epoch => ts.parse::<f64>().ok(),
            TimeFormat::Iso => parse_iso(ts),
        }
        .ok_or_else(|| Error::Parse(format!("line {line}: bad timestamp {ts:?}")))?;
        let num = |i: usize, what: &str| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| Error::Parse(format!("line {line}: bad {what} {:?}", field(i))))
        };
        let accuracy = match acc {
            Some(i) if !field(i).is_empty() => Some(num(i, "accuracy")?),
            _ => None,
        };
        if let (Some(a), Some(max)) = (accuracy, max_accuracy_m) {
            if a > max {
                continue;
            }
        }
        out.push(GpsRecord::new(t, num(lai, "latitude")?, num(loi, "longitude")?, accuracy)?);
    }
    Ok(out)
}

/// Writes records as `timestamp,latitude,longitude,accuracy` with epoch
/// seconds.
pub fn write_gps_csv<W: Write>(records: &[GpsRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "latitude", "longitude", "accuracy"])?;
    for r in records {
        let acc = r.accuracy.map(|a| a.to_string()).unwrap_or_default();
        w.write_record([r.t.to_string(), r.lat.to_string(), r.lon.to_string(), acc])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EventRow<'a> {
    subject_id: &'a str,
    kind: &'static str,
    x: f64,
    y: f64,
    t: f64,
    dx: f64,
    dy: f64,
    dt: f64,
    observed: bool,
    missing_s: f64,
}

pub fn write_events_csv<W: Write>(trace: &MobilityTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in &trace.events {
        let Event { kind, x, y, t, dx, dy, dt, observed, missing_s } = *e;
        w.serialize(EventRow { subject_id: &trace.subject_id, kind: kind.as_str(), x, y, t, dx, dy, dt, observed, missing_s })?;
    }
    w.flush()?;
    Ok(())
}

/// Header for feature rows: identifiers, then every measure in order,
/// then `_lo`/`_hi` pairs when `with_intervals`.
pub fn feature_header(with_intervals: bool) -> Vec<String> {
    let mut h: Vec<String> = ["subject_id", "day", "date", "valid"].iter().map(|s| s.to_string()).collect();
    h.extend(Measure::ALL.iter().map(|m| m.name().to_string()));
    if with_intervals {
        for m in Measure::ALL {
            h.push(format!("{}_lo", m.name()));
            h.push(format!("{}_hi", m.name()));
        }
    }
    h
}

fn date_of(day: i64) -> String {
    DateTime::from_timestamp(day * 86_400, 0).map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default()
}

pub fn write_features_csv<W: Write>(rows: &[(String, DailyFeatureVector)], with_intervals: bool, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(feature_header(with_intervals))?;
    for (subject, v) in rows {
        let mut rec = vec![subject.clone(), v.day.to_string(), date_of(v.day), v.valid.to_string()];
        rec.extend(Measure::ALL.iter().map(|&m| v.get(m).to_string()));
        if with_intervals {
            for m in Measure::ALL {
                let (lo, hi) = v.interval(m).unwrap_or((f64::NAN, f64::NAN));
                rec.push(lo.to_string());
                rec.push(hi.to_string());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
