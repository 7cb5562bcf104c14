//! Sensitivity sweeps over commit filters, window sizes and thresholds.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{join, pearson, spearman, variance, AnalysisError};
use crate::activity::{build_calendar_with, relevant_days, Granularity};
use crate::coupling::{coupling_series, to_f64, PairSeries, Threshold, WindowConfig};
use crate::ingest::{filter_commits, CommitFilter, CommitRecord};
use crate::service_map::ServiceMap;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedFilter {
    pub name: String,
    pub filter: CommitFilter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub window_sizes: Vec<usize>,
    pub filters: Vec<NamedFilter>,
    pub thresholds: Vec<Threshold>,
    #[serde(default)]
    pub granularity: Granularity,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            window_sizes: vec![10, 30, 100],
            filters: vec![NamedFilter { name: "default".into(), filter: CommitFilter::default() }],
            thresholds: vec![Threshold::default()],
            granularity: Granularity::Day,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.window_sizes.is_empty() || self.filters.is_empty() || self.thresholds.is_empty() {
            return Err(AnalysisError::InvalidInput(
                "sweep needs at least one window size, filter and threshold".into(),
            ));
        }
        if self.window_sizes.contains(&0) {
            return Err(AnalysisError::InvalidInput("window sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub threshold: f64,
    /// Pairs with at least one window at or above the threshold.
    pub coupled_pair_fraction: Option<f64>,
    pub coupled_window_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub active_days: usize,
    pub pairs: usize,
    pub pairs_with_windows: usize,
    pub windows: usize,
    pub mean_coupling: Option<f64>,
    /// Mean over pairs (with at least two windows) of the coupling variance.
    pub mean_within_pair_variance: Option<f64>,
    pub thresholds: Vec<ThresholdSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub filter: String,
    pub window: usize,
    pub summary: CellSummary,
    pub diagnostics: Vec<String>,
    #[serde(skip)]
    pub series: Vec<PairSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    /// `pearson[i][j]` correlates cells `i` and `j`; `None` when undefined.
    pub pearson: Vec<Vec<Option<f64>>>,
    pub spearman: Vec<Vec<Option<f64>>>,
    /// Number of aligned window pairs behind each matrix entry.
    pub aligned_points: Vec<Vec<usize>>,
}

/// Runs every (filter, window) cell and correlates the cells pairwise.
///
/// Cells over the same filter share a calendar and align on window-end day
/// index. Cells over different filters align on window-end date; with
/// commit granularity only the last window of each date takes part.
/// Cell-level problems end up in [`SweepCell::diagnostics`].
pub fn run_sweep(commits: &[CommitRecord], map: &ServiceMap, spec: &SweepSpec) -> Result<SweepReport, AnalysisError> {
    spec.validate()?;
    let calendars: Vec<_> = spec
        .filters
        .iter()
        .map(|f| build_calendar_with(&filter_commits(commits, &f.filter), map, spec.granularity))
        .collect();

    let coords: Vec<(usize, usize)> =
        (0..spec.filters.len()).flat_map(|f| spec.window_sizes.iter().map(move |&n| (f, n))).collect();

    let cells: Vec<SweepCell> = coords
        .par_iter()
        .map(|&(fi, n)| {
            let cal = &calendars[fi];
            let w = WindowConfig::new(n).expect("validated");
            let mut diagnostics = Vec::new();
            if cal.is_empty() {
                diagnostics.push("no active days after filtering".to_string());
            }
            let series: Vec<PairSeries> = cal
                .service_pairs()
                .into_iter()
                .filter_map(|(a, b)| match relevant_days(cal, &a, &b) {
                    Ok(seq) => Some(coupling_series(&seq, w)),
                    Err(e) => {
                        diagnostics.push(format!("{a}/{b}: {e}"));
                        None
                    }
                })
                .collect();
            let short = series.iter().filter(|s| s.diagnostics.insufficient_days).count();
            if short > 0 {
                diagnostics.push(format!("{short} pair(s) have fewer than {n} relevant days"));
            }
            SweepCell {
                filter: spec.filters[fi].name.clone(),
                window: n,
                summary: summarize(cal.len(), &series, &spec.thresholds),
                diagnostics,
                series,
            }
        })
        .collect();

    let size = cells.len();
    let mut report = SweepReport {
        pearson: vec![vec![None; size]; size],
        spearman: vec![vec![None; size]; size],
        aligned_points: vec![vec![0; size]; size],
        cells,
    };
    // (i, j, pearson, spearman, aligned points)
    type Entry = (usize, usize, Option<f64>, Option<f64>, usize);
    let entries: Vec<Entry> = (0..size)
        .flat_map(|i| (i..size).map(move |j| (i, j)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(i, j)| {
            let same_calendar = coords[i].0 == coords[j].0;
            let (a, b) = pooled_alignment(&report.cells[i].series, &report.cells[j].series, same_calendar);
            let p = pearson(&a, &b).ok();
            let s = spearman(&a, &b).ok();
            (i, j, p, s, a.len())
        })
        .collect();
    for (i, j, p, s, count) in entries {
        for (x, y) in [(i, j), (j, i)] {
            report.pearson[x][y] = p;
            report.spearman[x][y] = s;
            report.aligned_points[x][y] = count;
        }
    }
    Ok(report)
}

fn summarize(active_days: usize, series: &[PairSeries], thresholds: &[Threshold]) -> CellSummary {
    let values: Vec<f64> = series.iter().flat_map(|s| s.coupling_f64()).collect();
    let windows = values.len();
    let pairs_with_windows = series.iter().filter(|s| !s.points.is_empty()).count();
    let mean_coupling = (windows > 0).then(|| values.iter().sum::<f64>() / windows as f64);
    let variances: Vec<f64> =
        series.iter().filter(|s| s.points.len() >= 2).filter_map(|s| variance(&s.coupling_f64())).collect();
    let mean_within_pair_variance =
        (!variances.is_empty()).then(|| variances.iter().sum::<f64>() / variances.len() as f64);
    let thresholds = thresholds
        .iter()
        .map(|t| {
            let above = |s: &PairSeries| s.points.iter().filter(|p| p.coupling >= t.value()).count();
            let coupled_pairs = series.iter().filter(|s| above(s) > 0).count();
            let coupled_windows: usize = series.iter().map(above).sum();
            ThresholdSummary {
                threshold: to_f64(t.value()),
                coupled_pair_fraction: (!series.is_empty()).then(|| coupled_pairs as f64 / series.len() as f64),
                coupled_window_fraction: (windows > 0).then(|| coupled_windows as f64 / windows as f64),
            }
        })
        .collect();
    CellSummary {
        active_days,
        pairs: series.len(),
        pairs_with_windows,
        windows,
        mean_coupling,
        mean_within_pair_variance,
        thresholds,
    }
}

fn pooled_alignment(left: &[PairSeries], right: &[PairSeries], same_calendar: bool) -> (Vec<f64>, Vec<f64>) {
    let right_by_pair: BTreeMap<(&str, &str), &PairSeries> =
        right.iter().map(|s| ((s.mu.as_str(), s.nu.as_str()), s)).collect();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for l in left {
        let Some(r) = right_by_pair.get(&(l.mu.as_str(), l.nu.as_str())) else { continue };
        let joined = if same_calendar { join(&by_index(l), &by_index(r)) } else { join(&by_date(l), &by_date(r)) };
        if let Ok(al) = joined {
            for (x, y) in al.pairs {
                a.push(x);
                b.push(y);
            }
        }
    }
    (a, b)
}

fn by_index(s: &PairSeries) -> BTreeMap<usize, f64> {
    s.points.iter().map(|p| (p.end_day_index, to_f64(p.coupling))).collect()
}

fn by_date(s: &PairSeries) -> BTreeMap<NaiveDate, f64> {
    s.points.iter().map(|p| (p.end_date, to_f64(p.coupling))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_commit_log_str;
    use crate::service_map::load_service_map;

    fn history() -> (Vec<CommitRecord>, ServiceMap) {
        let mut text = String::new();
        for day in 0..60u32 {
            let date = chrono::NaiveDate::from_ymd_opt(2023, 1, 1).unwrap() + chrono::Days::new(day.into());
            let mut files = Vec::new();
            if day % 2 == 0 {
                files.push("a/x");
            }
            if day % 3 == 0 {
                files.push("b/x");
            }
            if day % 5 == 0 {
                files.push("c/x");
            }
            if files.is_empty() {
                files.push("docs/readme");
            }
            text.push_str(&format!("\x01COMMIT\nc{day}|{date}T12:00:00Z|dev|work\n"));
            for f in files {
                text.push_str(f);
                text.push('\n');
            }
        }
        let commits = parse_commit_log_str(&text).unwrap().commits;
        let map = load_service_map("a/** => a\nb/** => b\nc/** => c\n").unwrap();
        (commits, map)
    }

    #[test]
    fn single_cell_self_correlation() {
        let (commits, map) = history();
        let spec = SweepSpec { window_sizes: vec![5], ..SweepSpec::default() };
        let r = run_sweep(&commits, &map, &spec).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert!((r.pearson[0][0].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.cells[0].summary.pairs, 3);
    }

    #[test]
    fn inert_filter_correlates_perfectly() {
        let (commits, map) = history();
        let inert = CommitFilter { max_files: Some(1000), ..CommitFilter::none() };
        let spec = SweepSpec {
            window_sizes: vec![5],
            filters: vec![
                NamedFilter { name: "none".into(), filter: CommitFilter::none() },
                NamedFilter { name: "inert".into(), filter: inert },
            ],
            ..SweepSpec::default()
        };
        let r = run_sweep(&commits, &map, &spec).unwrap();
        assert!((r.pearson[0][1].unwrap() - 1.0).abs() < 1e-12);
        assert!((r.spearman[1][0].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.cells[0].series, r.cells[1].series);
    }

    #[test]
    fn oversized_windows_are_diagnosed_not_fatal() {
        let (commits, map) = history();
        let spec = SweepSpec { window_sizes: vec![5, 1000], ..SweepSpec::default() };
        let r = run_sweep(&commits, &map, &spec).unwrap();
        assert_eq!(r.cells[1].summary.windows, 0);
        assert!(!r.cells[1].diagnostics.is_empty());
        assert_eq!(r.pearson[0][1], None);
        assert_eq!(r.aligned_points[0][1], 0);
    }

    #[test]
    fn empty_spec_rejected() {
        let (commits, map) = history();
        let spec = SweepSpec { window_sizes: vec![], ..SweepSpec::default() };
        assert!(run_sweep(&commits, &map, &spec).is_err());
    }

    #[test]
    fn deterministic_json() {
        let (commits, map) = history();
        let spec = SweepSpec { window_sizes: vec![3, 7, 12], ..SweepSpec::default() };
        let a = serde_json::to_string(&run_sweep(&commits, &map, &spec).unwrap()).unwrap();
        let b = serde_json::to_string(&run_sweep(&commits, &map, &spec).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
