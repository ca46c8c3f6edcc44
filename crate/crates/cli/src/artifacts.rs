//! CSV forms of statistic and critical-value sequences.
//!
//! Both start with `# key=value` comment lines carrying the sequence
//! metadata, then a headered table keyed by observation index.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use tvgc_core::bootstrap::CriticalValueSequence;
use tvgc_core::procedures::{Algorithm, StatPoint, StatSequence};

use crate::error::{CliError, Result};

pub const STATS_HEADER: &str = "index,date,statistic,argmax_start,note";
pub const CV_HEADER: &str = "index,date,critical_value";

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn date_at(dates: &[NaiveDate], i: usize) -> String {
    dates.get(i).map(|d| d.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn stats_csv(stats: &StatSequence, dates: &[NaiveDate], manifest: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# manifest={manifest}");
    let _ = writeln!(out, "# algorithm={}", stats.algorithm);
    let _ = writeln!(out, "# robust={}", stats.robust);
    let _ = writeln!(out, "# lag_order={}", stats.lag_order);
    let _ = writeln!(out, "# min_window={}", stats.min_window);
    let _ = writeln!(out, "# sample_len={}", stats.sample_len);
    let _ = writeln!(out, "{STATS_HEADER}");
    for p in &stats.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.index,
            date_at(dates, p.index),
            opt(p.statistic.map(fmt_f64)),
            opt(p.argmax_start),
            csv_field(p.note.as_deref().unwrap_or(""))
        );
    }
    out
}

pub fn cv_csv(cv: &CriticalValueSequence, dates: &[NaiveDate], manifest: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# manifest={manifest}");
    let _ = writeln!(out, "# algorithm={}", cv.algorithm);
    let _ = writeln!(out, "# robust={}", cv.robust);
    let _ = writeln!(out, "# quantile={}", fmt_f64(cv.quantile));
    let _ = writeln!(out, "# replications_used={}", cv.replications_used);
    let _ = writeln!(out, "# discarded={}", cv.discarded);
    let _ = writeln!(out, "{CV_HEADER}");
    for (i, v) in cv.values.iter().enumerate() {
        let index = cv.first_index + i;
        let _ = writeln!(out, "{},{},{}", index, date_at(dates, index), fmt_f64(*v));
    }
    out
}

struct Table {
    meta: BTreeMap<String, String>,
    rows: Vec<(usize, csv::StringRecord)>,
}

fn read_table(path: &Path, header: &str) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let bad = |line: usize, message: String| CliError::Artifact {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut meta = BTreeMap::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line.trim_start_matches('#').trim().split_once('=') {
            meta.insert(k.to_string(), v.to_string());
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let found = rdr
        .headers()
        .map_err(|e| bad(1, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found != header {
        return Err(bad(1, format!("expected header `{header}`, found `{found}`")));
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(0, e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != width {
            return Err(bad(line, format!("expected {width} fields, found {}", rec.len())));
        }
        rows.push((line, rec));
    }
    Ok(Table { meta, rows })
}

fn meta_value<T: std::str::FromStr>(path: &Path, meta: &BTreeMap<String, String>, key: &str) -> Result<T> {
    meta.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CliError::Artifact {
            path: path.to_path_buf(),
            message: format!("missing or invalid `# {key}=` line"),
        })
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: &str, what: &str) -> Result<T> {
    field.parse().map_err(|_| CliError::Artifact {
        path: path.to_path_buf(),
        message: format!("line {line}: invalid {what} `{field}`"),
    })
}

fn parse_dates(path: &Path, table: &Table) -> Result<Vec<(usize, Option<NaiveDate>)>> {
    table
        .rows
        .iter()
        .map(|(line, r)| {
            let index = parse_field(path, *line, &r[0], "index")?;
            let date = if r[1].is_empty() {
                None
            } else {
                Some(parse_field(path, *line, &r[1], "date")?)
            };
            Ok((index, date))
        })
        .collect()
}

fn algorithm(path: &Path, meta: &BTreeMap<String, String>) -> Result<Algorithm> {
    let label: String = meta_value(path, meta, "algorithm")?;
    Algorithm::parse(&label).ok_or_else(|| CliError::Artifact {
        path: path.to_path_buf(),
        message: format!("unknown algorithm `{label}`"),
    })
}

/// Statistic sequence plus the date of each point.
pub fn read_stats(path: &Path) -> Result<(StatSequence, Vec<Option<NaiveDate>>)> {
    let t = read_table(path, STATS_HEADER)?;
    let keys = parse_dates(path, &t)?;
    let mut points = Vec::with_capacity(t.rows.len());
    for ((line, r), (index, _)) in t.rows.iter().zip(&keys) {
        let statistic = if r[2].is_empty() {
            None
        } else {
            Some(parse_field(path, *line, &r[2], "statistic")?)
        };
        let argmax_start = if r[3].is_empty() {
            None
        } else {
            Some(parse_field(path, *line, &r[3], "argmax_start")?)
        };
        let note = (!r[4].is_empty()).then(|| r[4].to_string());
        points.push(StatPoint {
            index: *index,
            statistic,
            argmax_start,
            note,
        });
    }
    let stats = StatSequence {
        algorithm: algorithm(path, &t.meta)?,
        robust: meta_value(path, &t.meta, "robust")?,
        lag_order: meta_value(path, &t.meta, "lag_order")?,
        min_window: meta_value(path, &t.meta, "min_window")?,
        sample_len: meta_value(path, &t.meta, "sample_len")?,
        points,
    };
    check_consecutive(path, keys.iter().map(|k| k.0))?;
    Ok((stats, keys.into_iter().map(|k| k.1).collect()))
}

pub fn read_cv(path: &Path) -> Result<CriticalValueSequence> {
    let t = read_table(path, CV_HEADER)?;
    let keys = parse_dates(path, &t)?;
    check_consecutive(path, keys.iter().map(|k| k.0))?;
    let mut values = Vec::with_capacity(t.rows.len());
    for (line, r) in &t.rows {
        values.push(parse_field::<f64>(path, *line, &r[2], "critical value")?);
    }
    Ok(CriticalValueSequence {
        algorithm: algorithm(path, &t.meta)?,
        robust: meta_value(path, &t.meta, "robust")?,
        quantile: meta_value(path, &t.meta, "quantile")?,
        replications_used: meta_value(path, &t.meta, "replications_used")?,
        discarded: meta_value(path, &t.meta, "discarded")?,
        first_index: keys.first().map(|k| k.0).unwrap_or(0),
        values,
    })
}

fn check_consecutive(path: &Path, mut idx: impl Iterator<Item = usize>) -> Result<()> {
    let Some(mut prev) = idx.next() else {
        return Err(CliError::Artifact {
            path: path.to_path_buf(),
            message: "no rows".into(),
        });
    };
    for i in idx {
        if i != prev + 1 {
            return Err(CliError::Artifact {
                path: path.to_path_buf(),
                message: format!("index {i} does not follow {prev}"),
            });
        }
        prev = i;
    }
    Ok(())
}
