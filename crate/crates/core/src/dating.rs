//! Episodes of causality from a statistic sequence and its critical values.
//!
//! An episode opens at the first endpoint whose statistic is strictly above
//! the critical value and closes just before the next endpoint strictly
//! below it. Endpoints without a statistic neither open nor close one.

use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::bootstrap::CriticalValueSequence;
use crate::dataset::AlignedDataset;
use crate::procedures::{Algorithm, StatSequence};
use crate::{Error, Result};

/// Episodes shorter than this many observations are flagged.
pub const DEFAULT_MIN_DURATION: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalEpisode {
    pub start_index: usize,
    pub end_index: usize,
    /// Still above the critical value at the last endpoint.
    pub ongoing: bool,
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
    pub peak_statistic: f64,
    pub algorithm: Algorithm,
    pub robust: bool,
    /// Calendar days once dates are attached, observations before.
    pub duration_days: i64,
    pub sub_minimal: bool,
}

impl CausalEpisode {
    pub fn observations(&self) -> usize {
        self.end_index - self.start_index + 1
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.start_index..=self.end_index).contains(&index)
    }

    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start_index <= end && start <= self.end_index
    }
}

pub fn date_episodes(
    stats: &StatSequence,
    cv: &CriticalValueSequence,
    min_duration: usize,
) -> Result<Vec<CausalEpisode>> {
    let first = stats.first_index();
    if first != Some(cv.first_index) || stats.len() != cv.len() {
        return Err(Error::DomainMismatch(format!(
            "statistics cover {} endpoints from {:?}, critical values {} from {}",
            stats.len(),
            first,
            cv.len(),
            cv.first_index
        )));
    }
    if cv.robust != stats.robust || cv.algorithm != stats.algorithm {
        return Err(Error::DomainMismatch(format!(
            "critical values are for {} (robust={}), statistics for {} (robust={})",
            cv.algorithm, cv.robust, stats.algorithm, stats.robust
        )));
    }

    let mut out = Vec::new();
    let mut open: Option<(usize, f64)> = None;
    let make = |start: usize, end: usize, peak: f64, ongoing: bool| {
        let n = end - start + 1;
        CausalEpisode {
            start_index: start,
            end_index: end,
            ongoing,
            start_date: None,
            end_date: None,
            peak_statistic: peak,
            algorithm: stats.algorithm,
            robust: stats.robust,
            duration_days: n as i64,
            sub_minimal: n < min_duration,
        }
    };
    for (point, &c) in stats.points.iter().zip(&cv.values) {
        let Some(s) = point.statistic else { continue };
        match open {
            None if s > c => open = Some((point.index, s)),
            Some((start, peak)) if s < c => {
                out.push(make(start, point.index - 1, peak, false));
                open = None;
            }
            Some((start, peak)) => open = Some((start, peak.max(s))),
            None => {}
        }
    }
    if let (Some((start, peak)), Some(last)) = (open, stats.points.last()) {
        out.push(make(start, last.index, peak, true));
    }
    Ok(out)
}

/// Fills in dates and calendar-day durations from the sample's date axis.
pub fn attach_dates(episodes: &mut [CausalEpisode], dates: &[NaiveDate]) {
    for e in episodes {
        let (Some(&s), Some(&t)) = (dates.get(e.start_index), dates.get(e.end_index)) else {
            continue;
        };
        e.start_date = Some(s);
        e.end_date = Some(t);
        e.duration_days = (t - s).num_days() + 1;
    }
}

/// One JSON-lines record per episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub country: String,
    pub algorithm: Algorithm,
    pub robust: bool,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub ongoing: bool,
    pub duration_days: i64,
    pub peak_statistic: f64,
    pub sub_minimal: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeReport {
    pub text: String,
    pub records: Vec<EpisodeRecord>,
}

impl EpisodeReport {
    pub fn jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serialises"));
            out.push('\n');
        }
        out
    }
}

/// Human-readable listing plus records; episodes get dates from `data`.
pub fn episode_report(episodes: &[CausalEpisode], data: &AlignedDataset) -> EpisodeReport {
    let mut dated = episodes.to_vec();
    attach_dates(&mut dated, &data.dates);
    let mut text = String::new();
    let country = if data.country.is_empty() {
        "unknown"
    } else {
        &data.country
    };
    let _ = writeln!(text, "country: {country}");
    if dated.is_empty() {
        let _ = writeln!(text, "no episodes of causality detected");
    }
    let mut records = Vec::with_capacity(dated.len());
    for e in &dated {
        let (Some(s), Some(t)) = (e.start_date, e.end_date) else {
            continue;
        };
        let _ = write!(
            text,
            "{} {} to {}{} ({} days, peak {:.3}, {}{})",
            e.algorithm,
            s,
            t,
            if e.ongoing { " (ongoing)" } else { "" },
            e.duration_days,
            e.peak_statistic,
            if e.robust { "robust" } else { "homoskedastic" },
            if e.sub_minimal { ", below minimum duration" } else { "" },
        );
        text.push('\n');
        records.push(EpisodeRecord {
            country: country.to_string(),
            algorithm: e.algorithm,
            robust: e.robust,
            start_date: s,
            end_date: t,
            ongoing: e.ongoing,
            duration_days: e.duration_days,
            peak_statistic: e.peak_statistic,
            sub_minimal: e.sub_minimal,
        });
    }
    EpisodeReport { text, records }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procedures::StatPoint;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    pub(crate) fn seq(first: usize, values: &[Option<f64>]) -> StatSequence {
        StatSequence {
            algorithm: Algorithm::Rolling,
            robust: false,
            lag_order: 1,
            min_window: first + 1,
            sample_len: first + values.len(),
            points: values
                .iter()
                .enumerate()
                .map(|(i, &statistic)| StatPoint {
                    index: first + i,
                    statistic,
                    argmax_start: None,
                    note: None,
                })
                .collect(),
        }
    }

    fn cv(first: usize, values: Vec<f64>) -> CriticalValueSequence {
        CriticalValueSequence {
            algorithm: Algorithm::Rolling,
            robust: false,
            quantile: 0.95,
            replications_used: 1,
            discarded: 0,
            first_index: first,
            values,
        }
    }

    fn flat(first: usize, n: usize, c: f64) -> CriticalValueSequence {
        cv(first, vec![c; n])
    }

    #[test]
    fn single_crossing_episode() {
        let s = seq(1, &[Some(0.1), Some(5.0), Some(6.0), Some(0.2)]);
        let e = date_episodes(&s, &flat(1, 4, 3.0), 1).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!((e[0].start_index, e[0].end_index), (2, 3));
        assert!(!e[0].ongoing);
        assert_eq!(e[0].peak_statistic, 6.0);
    }

    #[test]
    fn ties_neither_open_nor_close() {
        let s = seq(0, &[Some(3.0), Some(4.0), Some(3.0), Some(3.0), Some(2.0), Some(3.0)]);
        let e = date_episodes(&s, &flat(0, 6, 3.0), 1).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!((e[0].start_index, e[0].end_index), (1, 3));
    }

    #[test]
    fn gaps_are_skipped_and_open_episode_is_ongoing() {
        let s = seq(0, &[Some(4.0), None, Some(1.0), None, Some(5.0), None]);
        let e = date_episodes(&s, &flat(0, 6, 3.0), 1).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!((e[0].start_index, e[0].end_index), (0, 1));
        assert_eq!((e[1].start_index, e[1].end_index), (4, 5));
        assert!(e[1].ongoing);
    }

    #[test]
    fn sub_minimal_flag() {
        let s = seq(0, &[Some(4.0), Some(1.0), Some(4.0), Some(4.0), Some(4.0), Some(1.0)]);
        let e = date_episodes(&s, &flat(0, 6, 3.0), 3).unwrap();
        assert!(e[0].sub_minimal);
        assert!(!e[1].sub_minimal);
    }

    #[test]
    fn domain_mismatch_is_an_error() {
        let s = seq(2, &[Some(1.0); 5]);
        assert!(matches!(
            date_episodes(&s, &flat(1, 5, 1.0), 1),
            Err(Error::DomainMismatch(_))
        ));
        assert!(matches!(
            date_episodes(&s, &flat(2, 4, 1.0), 1),
            Err(Error::DomainMismatch(_))
        ));
        let mut robust = flat(2, 5, 1.0);
        robust.robust = true;
        assert!(date_episodes(&s, &robust, 1).is_err());
    }

    fn dataset(n: usize) -> AlignedDataset {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates = (0..n).map(|i| start + chrono::Days::new(i as u64)).collect();
        AlignedDataset::new(
            dates,
            vec![50.0; n],
            vec![0.0; n],
            "Testland".to_string(),
            BTreeMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn report_lists_dated_episode() {
        let mut v = vec![Some(1.0); 300];
        for x in &mut v[10..206] {
            *x = Some(9.0);
        }
        let s = seq(0, &v);
        let e = date_episodes(&s, &flat(0, 300, 3.0), 1).unwrap();
        let r = episode_report(&e, &dataset(300));
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.records[0].duration_days, 196);
        assert!(r.text.contains("196 days"));
        assert!(r.text.contains("2020-01-11 to 2020-07-24"));
        let line = r.jsonl();
        let back: EpisodeRecord = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(back, r.records[0]);
    }

    #[test]
    fn empty_report_says_so() {
        let s = seq(0, &[Some(1.0); 10]);
        let e = date_episodes(&s, &flat(0, 10, 3.0), 1).unwrap();
        let r = episode_report(&e, &dataset(10));
        assert!(r.records.is_empty());
        assert!(r.text.contains("no episodes"));
        assert!(r.jsonl().is_empty());
    }

    fn stats_strategy() -> impl Strategy<Value = Vec<Option<f64>>> {
        prop::collection::vec(prop::option::weighted(0.9, 0.0f64..10.0), 1..80)
    }

    proptest! {
        #[test]
        fn episodes_are_ordered_and_disjoint(v in stats_strategy(), c in 0.5f64..9.5) {
            let s = seq(5, &v);
            let e = date_episodes(&s, &flat(5, v.len(), c), 1).unwrap();
            for w in e.windows(2) {
                prop_assert!(w[0].end_index < w[1].start_index);
            }
            for ep in &e {
                prop_assert!(ep.start_index <= ep.end_index);
                prop_assert!(ep.peak_statistic > c);
            }
        }

        #[test]
        fn raising_the_critical_value_shrinks_coverage(v in stats_strategy(), c in 0.5f64..8.0, bump in 0.0f64..2.0) {
            let s = seq(0, &v);
            let low = date_episodes(&s, &flat(0, v.len(), c), 1).unwrap();
            let high = date_episodes(&s, &flat(0, v.len(), c + bump), 1).unwrap();
            let covered = |e: &[CausalEpisode], i: usize| e.iter().any(|x| x.contains(i));
            for i in 0..v.len() {
                if covered(&high, i) {
                    prop_assert!(covered(&low, i));
                }
            }
        }

        #[test]
        fn increasing_transform_keeps_episodes(v in stats_strategy(), c in 0.5f64..9.5) {
            let f = |x: f64| (x + 1.0).ln() * 3.0 + 2.0;
            let s = seq(0, &v);
            let t: Vec<Option<f64>> = v.iter().map(|x| x.map(f)).collect();
            let a = date_episodes(&s, &flat(0, v.len(), c), 1).unwrap();
            let b = date_episodes(&seq(0, &t), &flat(0, v.len(), f(c)), 1).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!((x.start_index, x.end_index, x.ongoing), (y.start_index, y.end_index, y.ongoing));
            }
        }
    }
}
