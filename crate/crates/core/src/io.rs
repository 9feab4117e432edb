//! File formats read and written by the pipeline: CSV tables and JSON
//! reports.
//!
//! Every CSV reader checks the exact header and reports the 1-based line of the
//! first malformed row. Floats are written in Rust's shortest round-trip form,
//! so write → read → write is the identity.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::alarm::{AlarmEvent, Verdict};
use crate::cluster::{ClusterKind, SnapshotRow};
use crate::eval::{DecisionPoint, EvalReport, Region};
use crate::signal::EcgSeries;
use crate::{Error, Result};

struct Table {
    header: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table<R: Read>(input: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(Table { header, rows })
}

fn expect_header(t: &Table, expected: &[&str]) -> Result<()> {
    if t.header.len() != expected.len() || t.header.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(Error::parse(1, format!("expected header `{}`, got `{}`", expected.join(","), t.header.join(","))));
    }
    Ok(())
}

fn num(line: u64, field: &str, name: &str) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| Error::parse(line, format!("{name}: not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("{name}: non-finite value")));
    }
    Ok(v)
}

fn int<T: std::str::FromStr>(line: u64, field: &str, name: &str) -> Result<T> {
    field.parse().map_err(|_| Error::parse(line, format!("{name}: not an integer: {field:?}")))
}

fn opt<T>(line: u64, field: &str, f: impl Fn(u64, &str) -> Result<T>) -> Result<Option<T>> {
    if field.is_empty() {
        Ok(None)
    } else {
        f(line, field).map(Some)
    }
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// A single strictly increasing column of seconds.
fn read_time_column<R: Read>(input: R, column: &str) -> Result<Vec<f64>> {
    let t = read_table(input)?;
    expect_header(&t, &[column])?;
    let mut out: Vec<f64> = Vec::with_capacity(t.rows.len());
    for (line, row) in &t.rows {
        let v = num(*line, &row[0], column)?;
        if let Some(&prev) = out.last() {
            if v <= prev {
                return Err(Error::parse(*line, format!("{column} must be strictly increasing")));
            }
        }
        out.push(v);
    }
    Ok(out)
}

fn write_time_column(column: &str, values: &[f64]) -> String {
    let mut s = format!("{column}\n");
    for v in values {
        let _ = writeln!(s, "{v}");
    }
    s
}

pub fn read_beats_csv<R: Read>(input: R) -> Result<Vec<f64>> {
    read_time_column(input, "beat_time_sec")
}

pub fn write_beats_csv(beat_times: &[f64]) -> String {
    write_time_column("beat_time_sec", beat_times)
}

pub fn read_onsets_csv<R: Read>(input: R) -> Result<Vec<f64>> {
    read_time_column(input, "onset_sec")
}

pub fn write_onsets_csv(onsets: &[f64]) -> String {
    write_time_column("onset_sec", onsets)
}

/// ECG samples on a uniform grid; the rate is taken from the span of `t_sec`.
pub fn read_ecg_csv<R: Read>(input: R) -> Result<EcgSeries> {
    let t = read_table(input)?;
    expect_header(&t, &["t_sec", "mv"])?;
    let mut times = Vec::with_capacity(t.rows.len());
    let mut samples = Vec::with_capacity(t.rows.len());
    for (line, row) in &t.rows {
        let ts = num(*line, &row[0], "t_sec")?;
        if let Some(&prev) = times.last() {
            if ts <= prev {
                return Err(Error::parse(*line, "t_sec must be strictly increasing"));
            }
        }
        times.push(ts);
        samples.push(num(*line, &row[1], "mv")?);
    }
    if times.len() < 2 {
        return Err(Error::InsufficientSignal("ECG needs at least two samples".into()));
    }
    let span = times[times.len() - 1] - times[0];
    let rate = (times.len() - 1) as f64 / span;
    if !rate.is_finite() || rate <= 0.0 {
        return Err(Error::parse(2, "cannot infer sample rate"));
    }
    Ok(EcgSeries::new(rate, samples, times[0]))
}

pub fn write_ecg_csv(ecg: &EcgSeries) -> String {
    let mut s = String::from("t_sec,mv\n");
    for (i, v) in ecg.samples.iter().enumerate() {
        let _ = writeln!(s, "{},{v}", ecg.time_of(i));
    }
    s
}

pub fn read_alarms_csv<R: Read>(input: R) -> Result<Vec<AlarmEvent>> {
    let t = read_table(input)?;
    expect_header(&t, &["time_sec", "score", "window_id"])?;
    t.rows
        .iter()
        .map(|(line, r)| {
            Ok(AlarmEvent {
                time: num(*line, &r[0], "time_sec")?,
                score: num(*line, &r[1], "score")?,
                window_id: int(*line, &r[2], "window_id")?,
            })
        })
        .collect()
}

pub fn write_alarms_csv(alarms: &[AlarmEvent]) -> String {
    let mut s = String::from("time_sec,score,window_id\n");
    for a in alarms {
        let _ = writeln!(s, "{},{},{}", a.time, a.score, a.window_id);
    }
    s
}

/// One row of the per-window detection log.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub window_id: usize,
    pub time_sec: f64,
    pub micro_id: u64,
    pub macro_id: Option<u64>,
    pub verdict: Verdict,
    pub score: f64,
    pub recon_error: f64,
}

const WINDOW_HEADER: [&str; 7] = ["window_id", "time_sec", "micro_id", "macro_id", "verdict", "score", "recon_error"];

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Normal => "normal",
        Verdict::Abnormal => "abnormal",
    }
}

pub fn read_windows_csv<R: Read>(input: R) -> Result<Vec<WindowRecord>> {
    let t = read_table(input)?;
    expect_header(&t, &WINDOW_HEADER)?;
    let mut out: Vec<WindowRecord> = Vec::with_capacity(t.rows.len());
    for (line, r) in &t.rows {
        let line = *line;
        let verdict = match r[4].as_str() {
            "normal" => Verdict::Normal,
            "abnormal" => Verdict::Abnormal,
            other => return Err(Error::parse(line, format!("verdict: unknown value {other:?}"))),
        };
        let rec = WindowRecord {
            window_id: int(line, &r[0], "window_id")?,
            time_sec: num(line, &r[1], "time_sec")?,
            micro_id: int(line, &r[2], "micro_id")?,
            macro_id: opt(line, &r[3], |l, f| int(l, f, "macro_id"))?,
            verdict,
            score: num(line, &r[5], "score")?,
            recon_error: num(line, &r[6], "recon_error")?,
        };
        if let Some(prev) = out.last() {
            if rec.time_sec < prev.time_sec {
                return Err(Error::parse(line, "time_sec must be non-decreasing"));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_windows_csv(rows: &[WindowRecord]) -> String {
    let mut s = WINDOW_HEADER.join(",");
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.window_id,
            r.time_sec,
            r.micro_id,
            fmt_opt(r.macro_id),
            verdict_str(r.verdict),
            r.score,
            r.recon_error
        );
    }
    s
}

fn snapshot_header(dim: usize) -> Vec<String> {
    let mut h = vec!["micro_id".to_string(), "kind".into(), "weight".into()];
    h.extend((0..dim).map(|i| format!("cx_{i}")));
    h.push("radius".into());
    h.push("macro_id".into());
    h
}

pub fn write_snapshot_csv(rows: &[SnapshotRow]) -> String {
    let dim = rows.first().map_or(0, |r| r.center.len());
    let mut s = snapshot_header(dim).join(",");
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{},{},{}", r.micro_id, r.kind.as_str(), r.weight);
        for c in &r.center {
            let _ = write!(s, ",{c}");
        }
        let _ = writeln!(s, ",{},{}", r.radius, fmt_opt(r.macro_id));
    }
    s
}

pub fn read_snapshot_csv<R: Read>(input: R) -> Result<Vec<SnapshotRow>> {
    let t = read_table(input)?;
    if t.header.len() < 5 {
        return Err(Error::parse(1, "snapshot header too short"));
    }
    let dim = t.header.len() - 5;
    let expected = snapshot_header(dim);
    let expected: Vec<&str> = expected.iter().map(String::as_str).collect();
    expect_header(&t, &expected)?;
    t.rows
        .iter()
        .map(|(line, r)| {
            let line = *line;
            let kind = match r[1].as_str() {
                "potential" => ClusterKind::Potential,
                "outlier" => ClusterKind::Outlier,
                other => return Err(Error::parse(line, format!("kind: unknown value {other:?}"))),
            };
            let center = (0..dim).map(|i| num(line, &r[3 + i], "cx")).collect::<Result<Vec<f64>>>()?;
            Ok(SnapshotRow {
                micro_id: int(line, &r[0], "micro_id")?,
                kind,
                weight: num(line, &r[2], "weight")?,
                center,
                radius: num(line, &r[3 + dim], "radius")?,
                macro_id: opt(line, &r[4 + dim], |l, f| int(l, f, "macro_id"))?,
            })
        })
        .collect()
}

pub fn write_decision_table_csv(points: &[DecisionPoint]) -> String {
    let mut s = String::from("time_sec,score,label,alarm\n");
    for p in points {
        let _ = writeln!(s, "{},{},{},{}", p.time, p.score, p.region.as_str(), u8::from(p.alarm));
    }
    s
}

pub fn read_decision_table_csv<R: Read>(input: R) -> Result<Vec<DecisionPoint>> {
    let t = read_table(input)?;
    expect_header(&t, &["time_sec", "score", "label", "alarm"])?;
    t.rows
        .iter()
        .map(|(line, r)| {
            let line = *line;
            let region = match r[2].as_str() {
                "positive" => Region::Positive,
                "negative" => Region::Negative,
                "excluded" => Region::Excluded,
                other => return Err(Error::parse(line, format!("label: unknown value {other:?}"))),
            };
            let alarm = match r[3].as_str() {
                "0" => false,
                "1" => true,
                other => return Err(Error::parse(line, format!("alarm: expected 0 or 1, got {other:?}"))),
            };
            Ok(DecisionPoint { time: num(line, &r[0], "time_sec")?, score: num(line, &r[1], "score")?, region, alarm })
        })
        .collect()
}

pub fn write_intervals_csv(intervals: &[(f64, f64)]) -> String {
    let mut s = String::from("start_sec,end_sec\n");
    for (a, b) in intervals {
        let _ = writeln!(s, "{a},{b}");
    }
    s
}

pub fn read_intervals_csv<R: Read>(input: R) -> Result<Vec<(f64, f64)>> {
    let t = read_table(input)?;
    expect_header(&t, &["start_sec", "end_sec"])?;
    t.rows
        .iter()
        .map(|(line, r)| {
            let a = num(*line, &r[0], "start_sec")?;
            let b = num(*line, &r[1], "end_sec")?;
            if b < a {
                return Err(Error::parse(*line, "interval ends before it starts"));
            }
            Ok((a, b))
        })
        .collect()
}

/// Pretty JSON report with a trailing newline.
pub fn write_report_json(report: &EvalReport) -> String {
    pretty(report)
}

/// Per-k sweep reports as a JSON array of `{k, report}` objects.
pub fn write_sweep_json(reports: &[(usize, EvalReport)]) -> String {
    #[derive(Serialize)]
    struct Row<'a> {
        k: usize,
        report: &'a EvalReport,
    }
    pretty(&reports.iter().map(|(k, report)| Row { k: *k, report }).collect::<Vec<_>>())
}

pub fn read_report_json(text: &str) -> Result<EvalReport> {
    serde_json::from_str(text).map_err(|e| Error::parse(e.line() as u64, e.to_string()))
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

pub fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}
