//! Cumulative case-report series to daily new-case observations, and the
//! per-day likeliness ranking built from them.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::Network;
use crate::profiler::{DecaySpec, LikelinessResult, Profiler};
use crate::simulator::{Dataset, Observable};

/// Cumulative reported cases, `cumulative[date][region]`; `None` where a
/// region did not report on a date.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseReportSeries {
    regions: Vec<String>,
    dates: Vec<NaiveDate>,
    cumulative: Vec<Vec<Option<u64>>>,
}

impl CaseReportSeries {
    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn get(&self, date: NaiveDate, region: &str) -> Option<u64> {
        let d = self.dates.binary_search(&date).ok()?;
        let r = self.regions.iter().position(|x| x == region)?;
        self.cumulative[d][r]
    }

    /// Parses `date,region,cumulative_cases` rows (ISO dates, any order).
    /// Regions come out sorted by code.
    pub fn read_csv<R: Read>(reader: R, path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let load_err = |line: u64, reason: String| Error::Load {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["date", "region", "cumulative_cases"] {
            return Err(load_err(
                1,
                "header must be `date,region,cumulative_cases`".into(),
            ));
        }
        let mut rows: BTreeMap<(NaiveDate, String), u64> = BTreeMap::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != 3 {
                return Err(load_err(
                    line,
                    format!("expected 3 fields, found {}", record.len()),
                ));
            }
            let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
                .map_err(|e| load_err(line, format!("bad date `{}`: {e}", &record[0])))?;
            let region = record[1].to_string();
            if region.is_empty() {
                return Err(load_err(line, "empty region code".into()));
            }
            let count: i64 = record[2]
                .parse()
                .map_err(|_| load_err(line, format!("count `{}` is not an integer", &record[2])))?;
            if count < 0 {
                return Err(load_err(line, format!("negative count {count}")));
            }
            if rows.insert((date, region.clone()), count as u64).is_some() {
                return Err(load_err(
                    line,
                    format!("duplicate row for ({date}, {region})"),
                ));
            }
        }
        let dates: Vec<NaiveDate> = rows
            .keys()
            .map(|(d, _)| *d)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let regions: Vec<String> = rows
            .keys()
            .map(|(_, r)| r.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut cumulative = vec![vec![None; regions.len()]; dates.len()];
        for ((date, region), count) in rows {
            let d = dates.binary_search(&date).expect("date collected above");
            let r = regions
                .binary_search(&region)
                .expect("region collected above");
            cumulative[d][r] = Some(count);
        }
        Ok(Self {
            regions,
            dates,
            cumulative,
        })
    }
}

pub fn load_case_series(path: impl AsRef<Path>) -> Result<CaseReportSeries> {
    let path = path.as_ref();
    CaseReportSeries::read_csv(std::fs::File::open(path)?, path)
}

/// Default reporting threshold for keeping a region.
pub const DEFAULT_MIN_CASES: u64 = 5;
/// Default selection window, in days from the first report date.
pub const DEFAULT_WINDOW_DAYS: u32 = 31;

/// Keeps regions whose cumulative count reaches `min_cases` on some date in
/// the first `window_days` days of the series.
pub fn filter_regions(
    series: &CaseReportSeries,
    min_cases: u64,
    window_days: u32,
) -> Result<CaseReportSeries> {
    let Some(&first) = series.dates.first() else {
        return Ok(series.clone());
    };
    if window_days == 0 {
        return Err(Error::Parameter("window must span at least one day".into()));
    }
    let end = first + Duration::days(i64::from(window_days));
    let in_window: Vec<usize> = (0..series.dates.len())
        .filter(|&d| series.dates[d] < end)
        .collect();
    let keep: Vec<usize> = (0..series.regions.len())
        .filter(|&r| {
            min_cases == 0
                || in_window
                    .iter()
                    .filter_map(|&d| series.cumulative[d][r])
                    .any(|c| c >= min_cases)
        })
        .collect();
    Ok(CaseReportSeries {
        regions: keep.iter().map(|&r| series.regions[r].clone()).collect(),
        dates: series.dates.clone(),
        cumulative: series
            .cumulative
            .iter()
            .map(|row| keep.iter().map(|&r| row[r]).collect())
            .collect(),
    })
}

/// A downward correction of a cumulative count, clamped to zero new cases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Revision {
    pub date: NaiveDate,
    pub region: String,
    pub from: u64,
    pub to: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyDataset {
    /// 0 for the first day of the series.
    pub day_index: usize,
    /// Start of the one-day interval.
    pub date: NaiveDate,
    pub dataset: Dataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyDeltas {
    /// Region order of every dataset (matches the network labels).
    pub regions: Vec<String>,
    pub days: Vec<DailyDataset>,
    pub revisions: Vec<Revision>,
}

/// New cases per region for every consecutive calendar-day pair, ordered by
/// `labels`. Missing entries carry the last known count forward (regions
/// with no report yet count as zero); downward revisions yield zero and are
/// recorded.
pub fn daily_deltas(series: &CaseReportSeries, labels: &[String]) -> Result<DailyDeltas> {
    let have: BTreeSet<&String> = series.regions.iter().collect();
    let want: BTreeSet<&String> = labels.iter().collect();
    if have != want || want.len() != labels.len() {
        let missing: Vec<_> = want.difference(&have).collect();
        let extra: Vec<_> = have.difference(&want).collect();
        return Err(Error::LabelMismatch(format!(
            "case series and network disagree: network-only {missing:?}, series-only {extra:?}"
        )));
    }
    let column: Vec<usize> = labels
        .iter()
        .map(|l| {
            series
                .regions
                .iter()
                .position(|r| r == l)
                .expect("sets are equal")
        })
        .collect();

    let (Some(&first), Some(&last)) = (series.dates.first(), series.dates.last()) else {
        return Ok(DailyDeltas {
            regions: labels.to_vec(),
            days: Vec::new(),
            revisions: Vec::new(),
        });
    };

    let report = |date: NaiveDate| -> Option<&Vec<Option<u64>>> {
        series
            .dates
            .binary_search(&date)
            .ok()
            .map(|d| &series.cumulative[d])
    };
    let mut carried: Vec<u64> = column
        .iter()
        .map(|&c| report(first).and_then(|row| row[c]).unwrap_or(0))
        .collect();
    let mut days = Vec::new();
    let mut revisions = Vec::new();
    let mut date = first;
    while date < last {
        let next = date + Duration::days(1);
        let row = report(next);
        let mut values = Vec::with_capacity(labels.len());
        for (k, &c) in column.iter().enumerate() {
            let now = row.and_then(|row| row[c]).unwrap_or(carried[k]);
            if now < carried[k] {
                log::warn!(
                    "{}: cumulative count for {} revised down from {} to {}",
                    next,
                    labels[k],
                    carried[k],
                    now
                );
                revisions.push(Revision {
                    date: next,
                    region: labels[k].clone(),
                    from: carried[k],
                    to: now,
                });
            }
            values.push(now.saturating_sub(carried[k]) as f64);
            carried[k] = now;
        }
        days.push(DailyDataset {
            day_index: days.len(),
            date,
            dataset: Dataset::new(values, Observable::DeltaJ)?.with_t_obs(days.len() as f64),
        });
        date = next;
    }
    Ok(DailyDeltas {
        regions: labels.to_vec(),
        days,
        revisions,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEntry {
    pub day_index: usize,
    pub date: NaiveDate,
    pub result: LikelinessResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingTimeline {
    pub labels: Vec<String>,
    pub entries: Vec<TimelineEntry>,
}

impl RankingTimeline {
    /// CSV: `day_index,date,rank,region,score,degenerate_flag`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "day_index",
            "date",
            "rank",
            "region",
            "score",
            "degenerate_flag",
        ])?;
        for e in &self.entries {
            for (pos, &k) in e.result.ranking.iter().enumerate() {
                wtr.write_record([
                    e.day_index.to_string(),
                    e.date.to_string(),
                    (pos + 1).to_string(),
                    self.labels[k].clone(),
                    e.result.scores[k].to_string(),
                    u8::from(e.result.degenerate).to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    /// 1-based rank of `region` on every day.
    pub fn ranks_of(&self, region: &str) -> Option<Vec<usize>> {
        let k = self.labels.iter().position(|l| l == region)?;
        self.entries.iter().map(|e| e.result.rank_of(k)).collect()
    }
}

/// Scores every day's new-case vector against the network.
pub fn rank_timeline(
    net: &Network,
    deltas: &DailyDeltas,
    spec: DecaySpec,
) -> Result<RankingTimeline> {
    if deltas.regions != net.labels() {
        return Err(Error::LabelMismatch(format!(
            "dataset regions {:?} do not match network labels {:?}",
            deltas.regions,
            net.labels()
        )));
    }
    let profiler = Profiler::new(&crate::network::hop_distances(net), spec);
    let entries = deltas
        .days
        .iter()
        .map(|day| {
            Ok(TimelineEntry {
                day_index: day.day_index,
                date: day.date,
                result: profiler.score(&day.dataset)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RankingTimeline {
        labels: net.labels().to_vec(),
        entries,
    })
}

/// Directory holding the reconstructed aviation network and case series
/// shipped with the crate.
pub fn bundled_data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<CaseReportSeries> {
        CaseReportSeries::read_csv(text.as_bytes(), Path::new("cases.csv"))
    }

    fn labels(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    const THREE: &str = "date,region,cumulative_cases
2003-03-18,HKG,123
2003-03-17,HKG,95
2003-03-17,SIN,20
2003-03-18,SIN,23
2003-03-17,CAN,8
2003-03-18,CAN,8
";

    #[test]
    fn loads_and_sorts() {
        let s = parse(THREE).unwrap();
        assert_eq!(s.regions(), ["CAN", "HKG", "SIN"]);
        assert_eq!(s.dates().len(), 2);
        assert!(s.dates()[0] < s.dates()[1]);
        let d0 = NaiveDate::from_ymd_opt(2003, 3, 17).unwrap();
        assert_eq!(s.get(d0, "HKG"), Some(95));
    }

    #[test]
    fn duplicate_row_reports_second_line() {
        let text =
            "date,region,cumulative_cases\n2003-03-20,HKG,1\n2003-03-21,HKG,2\n2003-03-20,HKG,3\n";
        let err = parse(text).unwrap_err();
        assert!(matches!(err, Error::Load { line: 4, .. }), "{err}");
    }

    #[test]
    fn rejects_negative_and_malformed() {
        let neg = "date,region,cumulative_cases\n2003-03-20,HKG,-1\n";
        assert!(matches!(parse(neg), Err(Error::Load { line: 2, .. })));
        let bad_date = "date,region,cumulative_cases\n2003-13-20,HKG,1\n";
        assert!(matches!(parse(bad_date), Err(Error::Load { line: 2, .. })));
        let bad_header = "day,region,cumulative_cases\n2003-03-20,HKG,1\n";
        assert!(parse(bad_header).is_err());
    }

    #[test]
    fn deltas_subtract_consecutive_days() {
        let s = parse(THREE).unwrap();
        let d = daily_deltas(&s, &labels(&["HKG", "SIN", "CAN"])).unwrap();
        assert_eq!(d.days.len(), 1);
        assert_eq!(d.days[0].dataset.values(), [28.0, 3.0, 0.0]);
        assert_eq!(d.days[0].day_index, 0);
    }

    #[test]
    fn downward_revision_clamps_with_record() {
        let text = "date,region,cumulative_cases\n2003-04-01,USA,50\n2003-04-02,USA,48\n2003-04-03,USA,51\n";
        let d = daily_deltas(&parse(text).unwrap(), &labels(&["USA"])).unwrap();
        let v: Vec<f64> = d.days.iter().map(|x| x.dataset.values()[0]).collect();
        assert_eq!(v, [0.0, 3.0]);
        assert_eq!(d.revisions.len(), 1);
        assert_eq!((d.revisions[0].from, d.revisions[0].to), (50, 48));
    }

    #[test]
    fn missing_day_carries_forward() {
        let text = "date,region,cumulative_cases
2003-04-01,FRA,3
2003-04-01,HKG,700
2003-04-02,HKG,710
2003-04-03,FRA,4
2003-04-03,HKG,720
";
        let d = daily_deltas(&parse(text).unwrap(), &labels(&["FRA", "HKG"])).unwrap();
        assert_eq!(d.days[0].dataset.values(), [0.0, 10.0]);
        assert_eq!(d.days[1].dataset.values(), [1.0, 10.0]);
        assert!(d.revisions.is_empty());
    }

    #[test]
    fn absent_calendar_day_still_yields_a_pair() {
        let text = "date,region,cumulative_cases\n2003-04-01,HKG,1\n2003-04-03,HKG,5\n";
        let d = daily_deltas(&parse(text).unwrap(), &labels(&["HKG"])).unwrap();
        let v: Vec<f64> = d.days.iter().map(|x| x.dataset.values()[0]).collect();
        assert_eq!(v, [0.0, 4.0]);
    }

    #[test]
    fn label_mismatch() {
        let s = parse(THREE).unwrap();
        assert!(matches!(
            daily_deltas(&s, &labels(&["HKG", "SIN", "USA"])),
            Err(Error::LabelMismatch(_))
        ));
    }

    #[test]
    fn filter_threshold_edge() {
        let text = "date,region,cumulative_cases
2003-03-17,AAA,4
2003-03-18,AAA,4
2003-03-17,BBB,4
2003-03-18,BBB,5
2003-05-01,CCC,9
2003-03-17,CCC,0
";
        let s = parse(text).unwrap();
        let f = filter_regions(&s, 5, 31).unwrap();
        assert_eq!(f.regions(), ["BBB"]);
        let all = filter_regions(&s, 0, 31).unwrap();
        assert_eq!(all, s);
    }

    #[test]
    fn degenerate_day_is_flagged() {
        let text = "date,region,cumulative_cases
2003-03-17,A,1
2003-03-17,B,1
2003-03-18,A,1
2003-03-18,B,1
";
        let net = Network::from_adjacency(labels(&["A", "B"]), &[vec![0, 1], vec![1, 0]]).unwrap();
        let d = daily_deltas(&parse(text).unwrap(), net.labels()).unwrap();
        let tl = rank_timeline(&net, &d, DecaySpec::Polynomial(0.5)).unwrap();
        assert!(tl.entries[0].result.degenerate);
        assert_eq!(tl.entries[0].result.ranking, [0, 1]);
        let mut buf = Vec::new();
        tl.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "day_index,date,rank,region,score,degenerate_flag\n0,2003-03-17,1,A,0,1\n"
        ));
    }
}
