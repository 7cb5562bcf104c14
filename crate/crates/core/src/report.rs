//! File formats shared by the command-line tool and the pipeline.
//!
//! * series CSV: `mu,nu,window_end_date,coupling,p_nu_given_mu,p_mu_given_nu`,
//!   values with 12 significant digits, undefined conditionals left empty;
//! * segments JSON: array of [`PairSegments`];
//! * states JSON: array of [`PairStateReport`].

use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{segment_series, Segment, SegmentParams};
use crate::coupling::{
    format_decimal, recover_rational, state_timeline, to_f64, PairSeries, Rational, SeriesDiagnostics, StateKind,
    Threshold,
};
use crate::validation::PredictedStates;

/// Largest window denominator recovered exactly from a series CSV.
pub const MAX_RECOVERED_DENOMINATOR: u64 = 100_000;

/// Dated coupling values of one `(mu, nu)` pair.
pub type PairPoints = (String, String, Vec<(NaiveDate, f64)>);

pub const SERIES_HEADER: [&str; 6] = ["mu", "nu", "window_end_date", "coupling", "p_nu_given_mu", "p_mu_given_nu"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("series row {row}: {reason}")]
    BadRow { row: usize, reason: String },
}

/// One row of a series CSV, values recovered as exact fractions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeriesRow {
    pub mu: String,
    pub nu: String,
    pub window_end_date: NaiveDate,
    pub coupling: Rational,
    pub p_nu_given_mu: Option<Rational>,
    pub p_mu_given_nu: Option<Rational>,
}

/// Rows of one pair, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesTable {
    pub mu: String,
    pub nu: String,
    pub rows: Vec<SeriesRow>,
}

impl SeriesTable {
    pub fn coupling_values(&self) -> Vec<Rational> {
        self.rows.iter().map(|r| r.coupling).collect()
    }
}

pub fn write_series_csv<W: Write>(series: &[PairSeries], writer: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SERIES_HEADER)?;
    for s in series {
        for p in &s.points {
            let opt = |v: Option<Rational>| v.map(format_decimal).unwrap_or_default();
            w.write_record([
                s.mu.as_str(),
                s.nu.as_str(),
                &p.end_date.to_string(),
                &format_decimal(p.coupling),
                &opt(p.p_nu_given_mu),
                &opt(p.p_mu_given_nu),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// JSON rendering of series for `--format json`.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesJson<'a> {
    pub mu: &'a str,
    pub nu: &'a str,
    pub n: usize,
    pub diagnostics: SeriesDiagnostics,
    pub points: Vec<PointJson>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointJson {
    pub window_end_index: usize,
    pub window_end_date: NaiveDate,
    pub co_days: u64,
    pub mu_days: u64,
    pub nu_days: u64,
    pub coupling: f64,
    pub p_nu_given_mu: Option<f64>,
    pub p_mu_given_nu: Option<f64>,
}

pub fn series_json(series: &[PairSeries]) -> Vec<SeriesJson<'_>> {
    series
        .iter()
        .map(|s| SeriesJson {
            mu: &s.mu,
            nu: &s.nu,
            n: s.n,
            diagnostics: s.diagnostics,
            points: s
                .points
                .iter()
                .map(|p| PointJson {
                    window_end_index: p.end_day_index,
                    window_end_date: p.end_date,
                    co_days: p.co_days,
                    mu_days: p.mu_days,
                    nu_days: p.nu_days,
                    coupling: to_f64(p.coupling),
                    p_nu_given_mu: p.p_nu_given_mu.map(to_f64),
                    p_mu_given_nu: p.p_mu_given_nu.map(to_f64),
                })
                .collect(),
        })
        .collect()
}

/// Reads a series CSV, grouping consecutive rows by pair.
pub fn read_series_csv<R: Read>(reader: R) -> Result<Vec<SeriesTable>, ReportError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(SERIES_HEADER) {
        return Err(ReportError::BadRow { row: 1, reason: format!("expected header {}", SERIES_HEADER.join(",")) });
    }
    let mut tables: Vec<SeriesTable> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row_no = i + 2;
        let record = record?;
        let bad = |reason: String| ReportError::BadRow { row: row_no, reason };
        let value = |field: &str| -> Result<Option<Rational>, ReportError> {
            if field.is_empty() {
                return Ok(None);
            }
            let x: f64 = field.parse().map_err(|_| bad(format!("`{field}` is not a number")))?;
            if !(0.0..=1.0).contains(&x) {
                return Err(bad(format!("{x} outside [0, 1]")));
            }
            Ok(Some(recover_rational(x, MAX_RECOVERED_DENOMINATOR)))
        };
        let row = SeriesRow {
            mu: record[0].to_string(),
            nu: record[1].to_string(),
            window_end_date: record[2].parse().map_err(|_| bad(format!("bad date `{}`", &record[2])))?,
            coupling: value(&record[3])?.ok_or_else(|| bad("coupling is empty".into()))?,
            p_nu_given_mu: value(&record[4])?,
            p_mu_given_nu: value(&record[5])?,
        };
        match tables.last_mut() {
            Some(t) if t.mu == row.mu && t.nu == row.nu => t.rows.push(row),
            _ => tables.push(SeriesTable { mu: row.mu.clone(), nu: row.nu.clone(), rows: vec![row] }),
        }
    }
    Ok(tables)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatedSegment {
    #[serde(flatten)]
    pub segment: Segment,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSegments {
    pub mu: String,
    pub nu: String,
    pub points: usize,
    pub segments: Vec<DatedSegment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Segments the coupling track of each pair; a pair without windows gets
/// an `error` entry instead of aborting the whole run.
pub fn segment_tables(tables: &[PairPoints], params: SegmentParams) -> Vec<PairSegments> {
    tables
        .iter()
        .map(|(mu, nu, points)| {
            let values: Vec<f64> = points.iter().map(|p| p.1).collect();
            match segment_series(&values, params) {
                Ok(segs) => PairSegments {
                    mu: mu.clone(),
                    nu: nu.clone(),
                    points: values.len(),
                    segments: segs
                        .into_iter()
                        .map(|s| DatedSegment {
                            start_date: points[s.start_idx - 1].0,
                            end_date: points[s.end_idx - 1].0,
                            segment: s,
                        })
                        .collect(),
                    error: None,
                },
                Err(e) => PairSegments {
                    mu: mu.clone(),
                    nu: nu.clone(),
                    points: values.len(),
                    segments: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

pub fn series_points(series: &[PairSeries]) -> Vec<PairPoints> {
    series
        .iter()
        .map(|s| (s.mu.clone(), s.nu.clone(), s.points.iter().map(|p| (p.end_date, to_f64(p.coupling))).collect()))
        .collect()
}

pub fn table_points(tables: &[SeriesTable]) -> Vec<PairPoints> {
    tables
        .iter()
        .map(|t| (t.mu.clone(), t.nu.clone(), t.rows.iter().map(|r| (r.window_end_date, to_f64(r.coupling))).collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatePoint {
    pub window_end_date: NaiveDate,
    pub state: StateKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStateReport {
    pub mu: String,
    pub nu: String,
    pub threshold: f64,
    pub patience: usize,
    pub timeline: Vec<StatePoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cochange_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_coupled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<SeriesDiagnostics>,
}

impl PairStateReport {
    pub fn predicted(&self) -> PredictedStates {
        PredictedStates {
            mu: self.mu.clone(),
            nu: self.nu.clone(),
            timeline: self.timeline.iter().map(|p| (p.window_end_date, p.state)).collect(),
        }
    }
}

/// Runs the coupled/decoupled machine over every table.
pub fn table_states(tables: &[SeriesTable], t: Threshold, k: usize) -> Vec<PairStateReport> {
    tables
        .iter()
        .map(|tab| {
            let states = state_timeline(tab.coupling_values(), t, k);
            PairStateReport {
                mu: tab.mu.clone(),
                nu: tab.nu.clone(),
                threshold: to_f64(t.value()),
                patience: k,
                timeline: tab
                    .rows
                    .iter()
                    .zip(states)
                    .map(|(r, state)| StatePoint { window_end_date: r.window_end_date, state })
                    .collect(),
                cochange_count: None,
                baseline_coupled: None,
                diagnostics: None,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::PairDaySequence;
    use crate::coupling::{coupling_series, WindowConfig};

    #[test]
    fn csv_round_trip_is_exact() {
        let mu = [1, 2, 4, 6, 10];
        let nu = [1, 2, 3, 4, 5, 10];
        let flags: Vec<_> = (1..=10).map(|d| (mu.contains(&d), nu.contains(&d))).collect();
        let seq = PairDaySequence::from_flags("mu", "nu", &flags);
        let only_nu = PairDaySequence::from_flags("x", "y", &[(false, true); 4]);
        let series = vec![
            coupling_series(&seq, WindowConfig::new(3).unwrap()),
            coupling_series(&only_nu, WindowConfig::new(2).unwrap()),
        ];
        let mut buf = Vec::new();
        write_series_csv(&series, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("mu,nu,window_end_date,coupling,p_nu_given_mu,p_mu_given_nu\n"));
        assert!(text.contains("mu,nu,1970-01-04,0.666666666667,1,0.666666666667"));
        assert!(text.contains("x,y,1970-01-03,0,,0"));

        let tables = read_series_csv(&buf[..]).unwrap();
        assert_eq!(tables.len(), 2);
        assert_eq!(tables[0].coupling_values(), series[0].coupling_values());
        assert_eq!(tables[1].rows[0].p_nu_given_mu, None);
    }

    #[test]
    fn rejects_wrong_header_and_values() {
        assert!(read_series_csv("a,b\n".as_bytes()).is_err());
        let bad = "mu,nu,window_end_date,coupling,p_nu_given_mu,p_mu_given_nu\na,b,2023-01-01,1.5,,\n";
        assert!(matches!(read_series_csv(bad.as_bytes()), Err(ReportError::BadRow { row: 2, .. })));
    }

    #[test]
    fn empty_pair_segments_reported() {
        let segs = segment_tables(&[("a".into(), "b".into(), vec![])], SegmentParams::default());
        assert!(segs[0].error.is_some());
    }
}
