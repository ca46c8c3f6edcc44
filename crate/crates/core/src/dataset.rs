//! Ingestion, validation and alignment of price and attention series.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default largest number of missing calendar days tolerated between
/// consecutive GSVI download segments.
pub const DEFAULT_MAX_GAP_DAYS: i64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSeries {
    pub name: String,
    pub source_tag: String,
    pub observations: Vec<(NaiveDate, f64)>,
}

impl RawSeries {
    /// Validates ordering and finiteness.
    pub fn new(
        name: impl Into<String>,
        source_tag: impl Into<String>,
        observations: Vec<(NaiveDate, f64)>,
    ) -> Result<Self> {
        let name = name.into();
        for w in observations.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::UnorderedDates { name, date: w[1].0 });
            }
        }
        if let Some((d, v)) = observations.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite value {v} on {d} in `{name}`")));
        }
        Ok(Self {
            name,
            source_tag: source_tag.into(),
            observations,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.observations.first().map(|o| o.0)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.observations.last().map(|o| o.0)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().map(|o| o.1)
    }
}

/// Date-indexed (attention, log return) pairs for one country.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedDataset {
    pub dates: Vec<NaiveDate>,
    pub attention: Vec<f64>,
    pub returns: Vec<f64>,
    pub country: String,
    pub meta: BTreeMap<String, String>,
}

impl AlignedDataset {
    pub fn new(
        dates: Vec<NaiveDate>,
        attention: Vec<f64>,
        returns: Vec<f64>,
        country: impl Into<String>,
        meta: BTreeMap<String, String>,
    ) -> Result<Self> {
        let country = country.into();
        if dates.len() != attention.len() || dates.len() != returns.len() {
            return Err(Error::Invalid(format!(
                "column lengths differ: {} dates, {} attention, {} returns",
                dates.len(),
                attention.len(),
                returns.len()
            )));
        }
        if dates.len() < 2 {
            return Err(Error::TooShort {
                name: country,
                needed: 2,
                got: dates.len(),
            });
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::UnorderedDates {
                    name: country,
                    date: w[1],
                });
            }
        }
        for (d, a) in dates.iter().zip(&attention) {
            if !(0.0..=100.0).contains(a) {
                return Err(Error::Invalid(format!("attention {a} on {d} outside [0, 100]")));
            }
        }
        for (d, r) in dates.iter().zip(&returns) {
            if !r.is_finite() {
                return Err(Error::Invalid(format!("non-finite return on {d}")));
            }
        }
        Ok(Self {
            dates,
            attention,
            returns,
            country,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// First `n` observations (same country and metadata).
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            dates: self.dates[..n].to_vec(),
            attention: self.attention[..n].to_vec(),
            returns: self.returns[..n].to_vec(),
            country: self.country.clone(),
            meta: self.meta.clone(),
        }
    }

    pub fn mean_attention(&self) -> f64 {
        self.attention.iter().sum::<f64>() / self.len() as f64
    }

    /// Writes the `date,attention,log_return` CSV. Country and metadata go
    /// into leading `#` comment lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# country={}", self.country)?;
        for (k, v) in &self.meta {
            writeln!(w, "# meta.{k}={v}")?;
        }
        writeln!(w, "date,attention,log_return")?;
        for i in 0..self.len() {
            // `{}` on f64 prints the shortest string that parses back exactly
            writeln!(w, "{},{},{}", self.dates[i], self.attention[i], self.returns[i])?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(mut r: R, origin: &str) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let mut country = String::new();
        let mut meta = BTreeMap::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim();
            if let Some(c) = body.strip_prefix("country=") {
                country = c.to_string();
            } else if let Some(kv) = body.strip_prefix("meta.") {
                if let Some((k, v)) = kv.split_once('=') {
                    meta.insert(k.to_string(), v.to_string());
                }
            }
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        let expected = ["date", "attention", "log_return"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: 1,
                message: format!(
                    "expected header `date,attention,log_return`, found `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        let (mut dates, mut attention, mut returns) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let perr = |message: String| Error::Parse {
                path: origin.to_string(),
                line,
                message,
            };
            if rec.len() != 3 {
                return Err(perr(format!("expected 3 fields, found {}", rec.len())));
            }
            dates.push(parse_date(&rec[0]).map_err(&perr)?);
            attention.push(parse_value(&rec[1]).map_err(&perr)?);
            returns.push(parse_value(&rec[2]).map_err(&perr)?);
        }
        Self::new(dates, attention, returns, country, meta)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, &path.display().to_string())
    }
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("bad date `{s}`: {e}"))
}

fn parse_value(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("bad value `{s}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite value `{s}`"))
    }
}

/// Reads a headered `date,value` CSV. Errors carry the 1-based line number.
pub fn read_raw_csv<R: Read>(r: R, name: &str, source_tag: &str, origin: &str) -> Result<RawSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "date" || &headers[1] != "value" {
        return Err(Error::Parse {
            path: origin.to_string(),
            line: 1,
            message: "expected header `date,value`".into(),
        });
    }
    let mut obs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let perr = |message: String| Error::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        if rec.len() != 2 {
            return Err(perr(format!("expected 2 fields, found {}", rec.len())));
        }
        let date = parse_date(&rec[0]).map_err(&perr)?;
        let value = parse_value(&rec[1]).map_err(&perr)?;
        if let Some(&(prev, _)) = obs.last() {
            if date <= prev {
                return Err(perr(format!("date {date} not after previous {prev}")));
            }
        }
        obs.push((date, value));
    }
    RawSeries::new(name, source_tag, obs)
}

pub fn load_raw_csv(path: &Path, name: &str, source_tag: &str) -> Result<RawSeries> {
    let file = std::fs::File::open(path)?;
    read_raw_csv(file, name, source_tag, &path.display().to_string())
}

pub fn write_raw_csv<W: Write>(series: &RawSeries, mut w: W) -> Result<()> {
    writeln!(w, "date,value")?;
    for (d, v) in &series.observations {
        writeln!(w, "{d},{v}")?;
    }
    Ok(())
}

/// `r_t = ln(P_t / P_{t-1})`, dated at `t`.
pub fn log_returns(prices: &RawSeries) -> Result<RawSeries> {
    if prices.len() < 2 {
        return Err(Error::TooShort {
            name: prices.name.clone(),
            needed: 2,
            got: prices.len(),
        });
    }
    if let Some(&(date, value)) = prices.observations.iter().find(|(_, v)| *v <= 0.0) {
        return Err(Error::NonPositivePrice { date, value });
    }
    let obs = prices
        .observations
        .windows(2)
        .map(|w| (w[1].0, (w[1].1 / w[0].1).ln()))
        .collect();
    RawSeries::new(format!("{}_log_return", prices.name), "log-returns", obs)
}

/// Overlap rescaling applied while stitching.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverlapRescale {
    pub segment: usize,
    pub overlap_days: usize,
    pub factor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stitched {
    pub series: RawSeries,
    pub rescales: Vec<OverlapRescale>,
}

/// Concatenates GSVI download segments. On overlapping dates the later
/// segment wins; with `rescale_overlap` each later segment is first
/// multiplied by `mean(merged on overlap) / mean(segment on overlap)` and
/// clamped to [0, 100].
pub fn stitch_gsvi(segments: &[RawSeries], rescale_overlap: bool, max_gap_days: i64) -> Result<Stitched> {
    let first = segments
        .first()
        .ok_or_else(|| Error::Invalid("no GSVI segments given".into()))?;
    let mut merged: BTreeMap<NaiveDate, f64> = first.observations.iter().copied().collect();
    let mut rescales = Vec::new();
    for (idx, pair) in segments.windows(2).enumerate() {
        let (prev, seg) = (&pair[0], &pair[1]);
        let seg_idx = idx + 1;
        let (Some(prev_start), Some(start)) = (prev.first_date(), seg.first_date()) else {
            return Err(Error::Invalid(format!("GSVI segment {seg_idx} is empty")));
        };
        if start < prev_start {
            return Err(Error::Invalid(format!(
                "GSVI segments not ordered by start date (segment {seg_idx} starts {start})"
            )));
        }
        let merged_end = *merged.keys().next_back().expect("non-empty");
        let missing = (start - merged_end).num_days() - 1;
        if missing > max_gap_days {
            return Err(Error::SegmentGap {
                after: merged_end,
                before: start,
                days: missing,
                max_gap: max_gap_days,
            });
        }
        let overlap: Vec<(f64, f64)> = seg
            .observations
            .iter()
            .filter_map(|(d, v)| merged.get(d).map(|m| (*m, *v)))
            .collect();
        let mut factor = 1.0;
        if rescale_overlap && !overlap.is_empty() {
            let earlier = overlap.iter().map(|o| o.0).sum::<f64>() / overlap.len() as f64;
            let later = overlap.iter().map(|o| o.1).sum::<f64>() / overlap.len() as f64;
            if later <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "GSVI segment {seg_idx} has zero mean over its overlap; cannot rescale"
                )));
            }
            factor = earlier / later;
            rescales.push(OverlapRescale {
                segment: seg_idx,
                overlap_days: overlap.len(),
                factor,
            });
        }
        for &(d, v) in &seg.observations {
            let v = if rescale_overlap && !overlap.is_empty() {
                (v * factor).clamp(0.0, 100.0)
            } else {
                v
            };
            merged.insert(d, v);
        }
    }
    let series = RawSeries::new(first.name.clone(), "gsvi-stitched", merged.into_iter().collect())?;
    Ok(Stitched { series, rescales })
}

/// Inner join of attention and returns on date.
pub fn align(attention: &RawSeries, returns: &RawSeries, country: &str, min_len: usize) -> Result<AlignedDataset> {
    let by_date: BTreeMap<NaiveDate, f64> = returns.observations.iter().copied().collect();
    let (mut dates, mut att, mut ret) = (Vec::new(), Vec::new(), Vec::new());
    for &(d, a) in &attention.observations {
        if let Some(&r) = by_date.get(&d) {
            dates.push(d);
            att.push(a);
            ret.push(r);
        }
    }
    if dates.is_empty() {
        return Err(Error::Invalid(format!(
            "`{}` and `{}` share no dates",
            attention.name, returns.name
        )));
    }
    let needed = min_len.max(2);
    if dates.len() < needed {
        return Err(Error::TooShort {
            name: format!("aligned {country}"),
            needed,
            got: dates.len(),
        });
    }
    AlignedDataset::new(dates, att, ret, country, BTreeMap::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day(i: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 2, 11).unwrap() + chrono::Duration::days(i)
    }

    fn series(start: i64, values: &[f64]) -> RawSeries {
        let obs = values
            .iter()
            .enumerate()
            .map(|(i, v)| (day(start + i as i64), *v))
            .collect();
        RawSeries::new("s", "test", obs).unwrap()
    }

    #[test]
    fn log_return_identity() {
        let r = log_returns(&series(0, &[100.0, 100.0])).unwrap();
        assert_eq!(r.observations, vec![(day(1), 0.0)]);
    }

    #[test]
    fn log_return_definition() {
        let r = log_returns(&series(0, &[100.0, 105.0])).unwrap();
        assert_eq!(r.observations[0].1, (1.05f64).ln());
    }

    #[test]
    fn log_returns_telescope() {
        let r = log_returns(&series(0, &[100.0, 50.0, 100.0])).unwrap();
        let v: Vec<f64> = r.values().collect();
        assert!((v[0] + 2f64.ln()).abs() < 1e-15);
        assert!((v[1] - 2f64.ln()).abs() < 1e-15);
        assert!((v[0] + v[1]).abs() < 1e-15);
    }

    #[test]
    fn non_positive_price_names_date() {
        let err = log_returns(&series(0, &[100.0, 0.0, 3.0])).unwrap_err();
        match err {
            Error::NonPositivePrice { date, .. } => assert_eq!(date, day(1)),
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(
            log_returns(&series(0, &[1.0])).unwrap_err(),
            Error::TooShort { .. }
        ));
    }

    #[test]
    fn raw_series_rejects_duplicates() {
        let obs = vec![(day(0), 1.0), (day(0), 2.0)];
        assert!(matches!(
            RawSeries::new("x", "t", obs),
            Err(Error::UnorderedDates { .. })
        ));
    }

    #[test]
    fn stitch_single_segment_is_identity() {
        let s = series(0, &[1.0, 2.0, 3.0]);
        let out = stitch_gsvi(std::slice::from_ref(&s), false, 3).unwrap();
        assert_eq!(out.series.observations, s.observations);
    }

    #[test]
    fn stitch_adjacent_segments_concatenate() {
        let a = series(0, &vec![10.0; 90]);
        let b = series(90, &vec![20.0; 90]);
        let out = stitch_gsvi(&[a, b], false, 3).unwrap();
        assert_eq!(out.series.len(), 180);
        assert_eq!(out.series.observations[89].1, 10.0);
        assert_eq!(out.series.observations[90].1, 20.0);
    }

    #[test]
    fn stitch_rescales_overlap_by_hand_ratio() {
        // earlier overlap mean (40+50+60)/3 = 50, later (20+25+30)/3 = 25, ratio 2
        let a = series(0, &[30.0, 40.0, 50.0, 60.0]);
        let b = series(1, &[20.0, 25.0, 30.0, 35.0]);
        let out = stitch_gsvi(&[a, b], true, 3).unwrap();
        assert_eq!(out.rescales.len(), 1);
        assert_eq!(out.rescales[0].factor, 2.0);
        assert_eq!(out.rescales[0].overlap_days, 3);
        let v: Vec<f64> = out.series.values().collect();
        assert_eq!(v, vec![30.0, 40.0, 50.0, 60.0, 70.0]);
        let overlap_mean = (v[1] + v[2] + v[3]) / 3.0;
        assert_eq!(overlap_mean, 50.0);
    }

    #[test]
    fn stitch_without_rescale_later_wins() {
        let a = series(0, &[1.0, 2.0, 3.0]);
        let b = series(2, &[9.0, 8.0]);
        let out = stitch_gsvi(&[a, b], false, 3).unwrap();
        let v: Vec<f64> = out.series.values().collect();
        assert_eq!(v, vec![1.0, 2.0, 9.0, 8.0]);
        assert!(out.rescales.is_empty());
    }

    #[test]
    fn stitch_rescale_clamps() {
        let a = series(0, &[80.0, 90.0]);
        let b = series(1, &[45.0, 60.0]);
        let out = stitch_gsvi(&[a, b], true, 3).unwrap();
        assert_eq!(out.series.observations[2].1, 100.0);
    }

    #[test]
    fn stitch_gap_rejected() {
        let a = series(0, &[1.0, 2.0]);
        let b = series(6, &[1.0, 2.0]);
        assert!(matches!(
            stitch_gsvi(&[a.clone(), b], false, 3),
            Err(Error::SegmentGap { days: 4, .. })
        ));
        let c = series(5, &[1.0]);
        assert!(stitch_gsvi(&[a, c], false, 3).is_ok());
    }

    #[test]
    fn align_identical_dates_lossless() {
        let a = series(0, &[1.0, 2.0, 3.0]);
        let r = series(0, &[0.1, 0.2, 0.3]);
        let d = align(&a, &r, "US", 2).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.attention, vec![1.0, 2.0, 3.0]);
        assert_eq!(d.returns, vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn align_drops_unmatched_date() {
        let a = series(0, &[1.0, 2.0, 3.0, 4.0]);
        let r = RawSeries::new("r", "t", vec![(day(0), 0.1), (day(1), 0.2), (day(3), 0.4)]).unwrap();
        let d = align(&a, &r, "US", 2).unwrap();
        assert_eq!(d.dates, vec![day(0), day(1), day(3)]);
        assert_eq!(d.attention, vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn align_errors() {
        let a = series(0, &[1.0, 2.0]);
        let r = series(10, &[1.0, 2.0]);
        assert!(matches!(align(&a, &r, "US", 2), Err(Error::Invalid(_))));
        let r = series(0, &[1.0, 2.0]);
        match align(&a, &r, "US", 90) {
            Err(Error::TooShort { needed, got, .. }) => assert_eq!((needed, got), (90, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn aligned_rejects_out_of_range_attention() {
        let r = AlignedDataset::new(
            vec![day(0), day(1)],
            vec![50.0, 101.0],
            vec![0.0, 0.0],
            "US",
            BTreeMap::new(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn raw_csv_reports_line_of_bad_date() {
        let text = "date,value\n2020-01-01,1\n2020-13-01,2\n";
        match read_raw_csv(text.as_bytes(), "p", "prices", "prices.csv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn aligned_csv_round_trip(
            vals in proptest::collection::vec((0.0f64..=100.0, -1.0f64..1.0), 2..60),
            score in 0u32..100,
        ) {
            let dates = (0..vals.len()).map(|i| day(i as i64)).collect();
            let mut meta = BTreeMap::new();
            meta.insert("individualism".to_string(), score.to_string());
            let d = AlignedDataset::new(
                dates,
                vals.iter().map(|v| v.0).collect(),
                vals.iter().map(|v| v.1).collect(),
                "US",
                meta,
            ).unwrap();
            let mut buf = Vec::new();
            d.write_csv(&mut buf).unwrap();
            let back = AlignedDataset::read_csv(buf.as_slice(), "mem").unwrap();
            prop_assert_eq!(back, d);
        }

        #[test]
        fn cumulative_log_returns_recover_log_prices(
            prices in proptest::collection::vec(0.01f64..1e5, 2..80)
        ) {
            let s = series(0, &prices);
            let r = log_returns(&s).unwrap();
            let mut acc = 0.0;
            for (i, v) in r.values().enumerate() {
                acc += v;
                let expect = prices[i + 1].ln() - prices[0].ln();
                prop_assert!((acc - expect).abs() < 1e-12 * (1.0 + expect.abs()) + 1e-12);
            }
        }

        #[test]
        fn align_is_symmetric_in_dates(
            mask_a in proptest::collection::vec(any::<bool>(), 30),
            mask_b in proptest::collection::vec(any::<bool>(), 30),
        ) {
            let pick = |m: &[bool], v: f64| {
                let obs: Vec<_> = m.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| (day(i as i64), v)).collect();
                RawSeries::new("x", "t", obs).unwrap()
            };
            let a = pick(&mask_a, 10.0);
            let b = pick(&mask_b, 20.0);
            let ab = align(&a, &b, "X", 2);
            let ba = align(&b, &a, "X", 2);
            match (ab, ba) {
                (Ok(x), Ok(y)) => prop_assert_eq!(x.dates, y.dates),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "asymmetric failure"),
            }
        }

        #[test]
        fn stitch_without_rescale_preserves_values(
            a in proptest::collection::vec(0.0f64..100.0, 1..20),
            b in proptest::collection::vec(0.0f64..100.0, 1..20),
            shift in 0i64..25,
        ) {
            let sa = series(0, &a);
            let start = shift.min(a.len() as i64 + 3);
            let sb = series(start, &b);
            let out = stitch_gsvi(&[sa.clone(), sb.clone()], false, 3).unwrap();
            for (d, v) in &out.series.observations {
                let from_b = sb.observations.iter().find(|o| o.0 == *d).map(|o| o.1);
                let from_a = sa.observations.iter().find(|o| o.0 == *d).map(|o| o.1);
                prop_assert_eq!(Some(*v), from_b.or(from_a));
            }
        }
    }
}
