//! Trend segmentation, correlation across configurations, parameter sweeps
//! and project grouping.

mod correlation;
mod grouping;
mod segment;
mod sweep;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::coupling::{to_f64, PairSeries};

pub use correlation::{average_ranks, pearson, spearman};
pub use grouping::{group_projects, BucketSummary, ProjectGroups, ProjectSummary, ServiceBuckets};
pub use segment::{segment_labels, segment_series, Segment, SegmentParams, TrendLabel, DEFAULT_EPSILON};
pub use sweep::{run_sweep, CellSummary, NamedFilter, SweepCell, SweepReport, SweepSpec, ThresholdSummary};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("series is empty")]
    EmptySeries,
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 points, got {0}")]
    TooShort(usize),
    #[error("correlation undefined: a series is constant")]
    ConstantSeries,
    #[error("series belong to different pairs ({0} vs {1})")]
    PairMismatch(String, String),
    #[error("series share no window end points")]
    NoOverlap,
    #[error("{0}")]
    InvalidInput(String),
}

/// Values of two series paired on common window ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub pairs: Vec<(f64, f64)>,
    /// Points present in only one of the two series.
    pub dropped: usize,
}

impl Alignment {
    pub fn left(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn right(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.1).collect()
    }
}

/// Pairs the coupling values of two series of the same service pair and
/// calendar by window-end day index.
pub fn align_series(s1: &PairSeries, s2: &PairSeries) -> Result<Alignment, AnalysisError> {
    let same_pair = (s1.mu == s2.mu && s1.nu == s2.nu) || (s1.mu == s2.nu && s1.nu == s2.mu);
    if !same_pair {
        return Err(AnalysisError::PairMismatch(format!("{}/{}", s1.mu, s1.nu), format!("{}/{}", s2.mu, s2.nu)));
    }
    let left: BTreeMap<usize, f64> = s1.points.iter().map(|p| (p.end_day_index, to_f64(p.coupling))).collect();
    let right: BTreeMap<usize, f64> = s2.points.iter().map(|p| (p.end_day_index, to_f64(p.coupling))).collect();
    join(&left, &right)
}

fn join<K: Ord>(left: &BTreeMap<K, f64>, right: &BTreeMap<K, f64>) -> Result<Alignment, AnalysisError> {
    let pairs: Vec<(f64, f64)> = left.iter().filter_map(|(k, a)| right.get(k).map(|b| (*a, *b))).collect();
    if pairs.is_empty() {
        return Err(AnalysisError::NoOverlap);
    }
    let dropped = left.len() + right.len() - 2 * pairs.len();
    Ok(Alignment { pairs, dropped })
}

/// Population variance; `None` for an empty slice.
pub fn variance(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Some(values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::PairDaySequence;
    use crate::coupling::{coupling_series, WindowConfig};

    fn seq(len: usize) -> PairDaySequence {
        let flags: Vec<_> = (0..len).map(|i| (i % 2 == 0, i % 3 == 0)).filter(|f| f.0 || f.1).collect();
        PairDaySequence::from_flags("a", "b", &flags)
    }

    #[test]
    fn identical_configs_align_fully() {
        let s = coupling_series(&seq(30), WindowConfig::new(4).unwrap());
        let a = align_series(&s, &s).unwrap();
        assert_eq!(a.dropped, 0);
        assert_eq!(a.pairs.len(), s.points.len());
        assert!(a.pairs.iter().all(|(x, y)| x == y));
    }

    #[test]
    fn different_windows_share_tail() {
        let s = PairDaySequence::from_flags("a", "b", &[(true, false); 10]);
        assert_eq!(s.len(), 10);
        let s3 = coupling_series(&s, WindowConfig::new(3).unwrap());
        let s5 = coupling_series(&s, WindowConfig::new(5).unwrap());
        let a = align_series(&s3, &s5).unwrap();
        assert_eq!(a.pairs.len(), 6);
        assert_eq!(a.dropped, 2);
    }

    #[test]
    fn alignment_errors() {
        let s = PairDaySequence::from_flags("a", "b", &[(true, true); 4]);
        let long = coupling_series(&s, WindowConfig::new(5).unwrap());
        let short = coupling_series(&s, WindowConfig::new(2).unwrap());
        assert_eq!(align_series(&short, &long), Err(AnalysisError::NoOverlap));
        let other =
            coupling_series(&PairDaySequence::from_flags("a", "c", &[(true, true); 4]), WindowConfig::new(2).unwrap());
        assert!(matches!(align_series(&short, &other), Err(AnalysisError::PairMismatch(..))));
    }

    #[test]
    fn variance_basics() {
        assert_eq!(variance(&[]), None);
        assert_eq!(variance(&[2.0, 2.0]), Some(0.0));
        assert_eq!(variance(&[1.0, 3.0]), Some(1.0));
    }
}
