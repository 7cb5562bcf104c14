//! Bottom-up piecewise-linear segmentation.
//!
//! The series is first cut into blocks of `min_len` points (the last block
//! absorbs the remainder). Adjacent segments are then merged greedily, always
//! taking the pair whose merged least-squares line has the smallest SSE,
//! until no merge stays within `max_sse`.

use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Slope deadband separating stable from trending segments.
pub const DEFAULT_EPSILON: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrendLabel {
    Growing,
    Stable,
    Decreasing,
}

impl TrendLabel {
    pub fn from_slope(slope: f64, epsilon: f64) -> Self {
        if slope > epsilon {
            TrendLabel::Growing
        } else if slope < -epsilon {
            TrendLabel::Decreasing
        } else {
            TrendLabel::Stable
        }
    }
}

/// Inclusive 1-based range of series positions with its fitted trend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_idx: usize,
    pub end_idx: usize,
    pub slope: f64,
    pub sse: f64,
    pub label: TrendLabel,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end_idx + 1 - self.start_idx
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    pub max_sse: f64,
    pub min_len: usize,
    pub epsilon: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams { max_sse: 0.05, min_len: 5, epsilon: DEFAULT_EPSILON }
    }
}

/// Prefix sums giving O(1) least-squares fits over any range.
struct LineFitter {
    sx: Vec<f64>,
    sy: Vec<f64>,
    sxx: Vec<f64>,
    sxy: Vec<f64>,
    syy: Vec<f64>,
}

impl LineFitter {
    fn new(values: &[f64]) -> Self {
        let len = values.len() + 1;
        let mut f = LineFitter {
            sx: Vec::with_capacity(len),
            sy: Vec::with_capacity(len),
            sxx: Vec::with_capacity(len),
            sxy: Vec::with_capacity(len),
            syy: Vec::with_capacity(len),
        };
        let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        f.push(sx, sy, sxx, sxy, syy);
        for (i, &y) in values.iter().enumerate() {
            let x = (i + 1) as f64;
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            syy += y * y;
            f.push(sx, sy, sxx, sxy, syy);
        }
        f
    }

    fn push(&mut self, sx: f64, sy: f64, sxx: f64, sxy: f64, syy: f64) {
        self.sx.push(sx);
        self.sy.push(sy);
        self.sxx.push(sxx);
        self.sxy.push(sxy);
        self.syy.push(syy);
    }

    /// (slope, sse) of the least-squares line over 1-based `start..=end`.
    fn fit(&self, start: usize, end: usize) -> (f64, f64) {
        let n = (end + 1 - start) as f64;
        let d = |v: &[f64]| v[end] - v[start - 1];
        let (sx, sy, sxx, sxy, syy) = (d(&self.sx), d(&self.sy), d(&self.sxx), d(&self.sxy), d(&self.syy));
        let cxx = sxx - sx * sx / n;
        let cxy = sxy - sx * sy / n;
        let cyy = syy - sy * sy / n;
        if cxx <= 0.0 {
            return (0.0, 0.0);
        }
        let slope = cxy / cxx;
        let sse = (cyy - slope * cxy).max(0.0);
        (slope, sse)
    }
}

pub fn segment_series(values: &[f64], params: SegmentParams) -> Result<Vec<Segment>, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptySeries);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::InvalidInput("series contains non-finite values".into()));
    }
    if params.min_len < 2 && values.len() > 1 {
        return Err(AnalysisError::InvalidInput("min_len must be at least 2".into()));
    }
    if params.max_sse.is_nan() || params.max_sse < 0.0 {
        return Err(AnalysisError::InvalidInput("max_sse must be non-negative".into()));
    }
    let fitter = LineFitter::new(values);
    let len = values.len();
    let block = params.min_len.max(1);

    let mut bounds: Vec<(usize, usize)> = Vec::new();
    let mut start = 1;
    while start <= len {
        let mut end = (start + block - 1).min(len);
        if len - end < block {
            end = len;
        }
        bounds.push((start, end));
        start = end + 1;
    }

    loop {
        let best = bounds
            .windows(2)
            .enumerate()
            .map(|(i, w)| (i, fitter.fit(w[0].0, w[1].1).1))
            .filter(|(_, sse)| *sse <= params.max_sse)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((i, _)) = best else { break };
        bounds[i].1 = bounds[i + 1].1;
        bounds.remove(i + 1);
    }

    Ok(bounds
        .into_iter()
        .map(|(start_idx, end_idx)| {
            let (slope, sse) = fitter.fit(start_idx, end_idx);
            Segment { start_idx, end_idx, slope, sse, label: TrendLabel::from_slope(slope, params.epsilon) }
        })
        .collect())
}

/// One label per series position, taken from the segment covering it.
pub fn segment_labels(segments: &[Segment]) -> Vec<TrendLabel> {
    segments.iter().flat_map(|s| std::iter::repeat_n(s.label, s.len())).collect()
}
