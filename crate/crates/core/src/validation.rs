//! Scoring metric output against human-labeled ground truth.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::PairDaySequence;
use crate::analysis::TrendLabel;
use crate::coupling::{PairSeries, Rational, StateKind};

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("ground truth has {} key(s) without a prediction: {}", .0.len(), format_keys(.0))]
    MissingPredictions(Vec<PairWindowKey>),
    #[error("duplicate ground-truth key {0}")]
    DuplicateKey(PairWindowKey),
    #[error("ground truth row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("no observations to evaluate")]
    Empty,
    #[error("label sequences cover different ranges ({0} vs {1} positions)")]
    RangeMismatch(usize, usize),
    #[error("{0}")]
    InvalidInput(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_keys(keys: &[PairWindowKey]) -> String {
    keys.iter().take(10).map(|k| k.to_string()).collect::<Vec<_>>().join(", ")
        + if keys.len() > 10 { ", ..." } else { "" }
}

/// Unordered pair plus window end date; `mu <= nu` always holds.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairWindowKey {
    pub mu: String,
    pub nu: String,
    pub window_end_date: NaiveDate,
}

impl PairWindowKey {
    pub fn new(a: &str, b: &str, window_end_date: NaiveDate) -> Self {
        let (mu, nu) = if a <= b { (a, b) } else { (b, a) };
        PairWindowKey { mu: mu.to_string(), nu: nu.to_string(), window_end_date }
    }
}

impl std::fmt::Display for PairWindowKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.mu, self.nu, self.window_end_date)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub labels: BTreeMap<PairWindowKey, bool>,
    pub provenance: String,
}

impl GroundTruth {
    pub fn insert(&mut self, key: PairWindowKey, coupled: bool) -> Result<(), ValidationError> {
        if self.labels.contains_key(&key) {
            return Err(ValidationError::DuplicateKey(key));
        }
        self.labels.insert(key, coupled);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Deserialize)]
struct TruthRow {
    mu: String,
    nu: String,
    window_end_date: String,
    coupled: String,
}

/// Reads `mu,nu,window_end_date,coupled` CSV with `true`/`false` labels.
pub fn read_ground_truth<R: Read>(reader: R, provenance: &str) -> Result<GroundTruth, ValidationError> {
    let mut truth = GroundTruth { provenance: provenance.to_string(), ..Default::default() };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    for (i, row) in rdr.deserialize::<TruthRow>().enumerate() {
        let row_no = i + 2;
        let row = row?;
        let bad = |reason: String| ValidationError::BadRow { row: row_no, reason };
        if row.mu.is_empty() || row.nu.is_empty() || row.mu == row.nu {
            return Err(bad("pair needs two distinct services".into()));
        }
        let date: NaiveDate =
            row.window_end_date.parse().map_err(|e| bad(format!("bad date `{}`: {e}", row.window_end_date)))?;
        let coupled = match row.coupled.to_ascii_lowercase().as_str() {
            "true" => true,
            "false" => false,
            other => return Err(bad(format!("label must be true/false, got `{other}`"))),
        };
        truth.insert(PairWindowKey::new(&row.mu, &row.nu, date), coupled)?;
    }
    Ok(truth)
}

/// Coupled/decoupled predictions of one pair, keyed by window end date.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedStates {
    pub mu: String,
    pub nu: String,
    pub timeline: Vec<(NaiveDate, StateKind)>,
}

impl PredictedStates {
    pub fn from_series(series: &PairSeries, states: &[StateKind]) -> Self {
        PredictedStates {
            mu: series.mu.clone(),
            nu: series.nu.clone(),
            timeline: series.points.iter().map(|p| p.end_date).zip(states.iter().copied()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Tallies predictions over exactly the labeled keys. When several windows
/// of a pair end on the same date the last one is used.
pub fn confusion(predicted: &[PredictedStates], truth: &GroundTruth) -> Result<Confusion, ValidationError> {
    let mut lookup: BTreeMap<PairWindowKey, StateKind> = BTreeMap::new();
    for p in predicted {
        for (date, state) in &p.timeline {
            lookup.insert(PairWindowKey::new(&p.mu, &p.nu, *date), *state);
        }
    }
    let missing: Vec<PairWindowKey> = truth.labels.keys().filter(|k| !lookup.contains_key(*k)).cloned().collect();
    if !missing.is_empty() {
        return Err(ValidationError::MissingPredictions(missing));
    }
    let mut c = Confusion::default();
    for (key, &actual) in &truth.labels {
        let predicted = lookup[key] == StateKind::Coupled;
        match (predicted, actual) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Precision, recall and F1; `None` wherever a denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

pub fn precision_recall_f1(c: &Confusion) -> Accuracy {
    let ratio = |num: u64, den: u64| (den > 0).then(|| Rational::new(num, den));
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    // harmonic mean of p and r, which reduces to 2tp / (2tp + fp + fn)
    let f1 = match (precision, recall) {
        (Some(_), Some(_)) => ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        _ => None,
    };
    let f = |r: Option<Rational>| r.map(crate::coupling::to_f64);
    Accuracy { precision: f(precision), recall: f(recall), f1: f(f1) }
}

/// One directional prediction paired with what actually happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationObservation {
    pub prediction: Rational,
    pub outcome: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBucket {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_prediction: Option<f64>,
    pub frequency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub buckets: Vec<CalibrationBucket>,
}

impl CalibrationTable {
    /// Bucket holding `p`: `[k/10, (k+1)/10)`, the last one closed at 1.
    pub fn bucket_for(&self, p: Rational) -> &CalibrationBucket {
        &self.buckets[decile(p)]
    }
}

fn decile(p: Rational) -> usize {
    ((*p.numer() * 10 / *p.denom()) as usize).min(9)
}

/// Buckets predictions into deciles and reports how often the predicted
/// event actually happened in each.
pub fn conditional_truth_check(observations: &[CalibrationObservation]) -> Result<CalibrationTable, ValidationError> {
    if observations.is_empty() {
        return Err(ValidationError::Empty);
    }
    let mut count = [0usize; 10];
    let mut hits = [0usize; 10];
    let mut sums = [0f64; 10];
    for o in observations {
        if o.prediction > Rational::from_integer(1) {
            return Err(ValidationError::InvalidInput(format!("prediction {} exceeds 1", o.prediction)));
        }
        let b = decile(o.prediction);
        count[b] += 1;
        hits[b] += usize::from(o.outcome);
        sums[b] += crate::coupling::to_f64(o.prediction);
    }
    let buckets = (0..10)
        .map(|b| CalibrationBucket {
            lower: b as f64 / 10.0,
            upper: (b + 1) as f64 / 10.0,
            count: count[b],
            mean_prediction: (count[b] > 0).then(|| sums[b] / count[b] as f64),
            frequency: (count[b] > 0).then(|| hits[b] as f64 / count[b] as f64),
        })
        .collect();
    Ok(CalibrationTable { buckets })
}

/// Pairs each window's P(nu | mu) with whether nu changed on the first
/// mu-update day after the window. Windows with an undefined prediction or
/// no later mu update are skipped.
pub fn next_update_outcomes(seq: &PairDaySequence, series: &PairSeries) -> Vec<CalibrationObservation> {
    let mut out = Vec::new();
    let mut cursor = 0;
    for p in &series.points {
        while cursor < seq.entries.len() && seq.entries[cursor].day_index <= p.end_day_index {
            cursor += 1;
        }
        let Some(prediction) = p.p_nu_given_mu else { continue };
        if let Some(next) = seq.entries[cursor..].iter().find(|e| e.mu_updated) {
            out.push(CalibrationObservation { prediction, outcome: next.nu_updated });
        }
    }
    out
}

/// Fraction of positions where the predicted trend equals the true one.
pub fn trend_agreement(predicted: &[TrendLabel], truth: &[TrendLabel]) -> Result<f64, ValidationError> {
    if predicted.len() != truth.len() {
        return Err(ValidationError::RangeMismatch(predicted.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(ValidationError::Empty);
    }
    let agree = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(agree as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Population {
    Finite(u64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConfidenceLevel {
    P90,
    P95,
    P99,
}

impl ConfidenceLevel {
    pub fn z(&self) -> f64 {
        match self {
            ConfidenceLevel::P90 => 1.645,
            ConfidenceLevel::P95 => 1.96,
            ConfidenceLevel::P99 => 2.576,
        }
    }
}

impl TryFrom<f64> for ConfidenceLevel {
    type Error = ValidationError;

    fn try_from(level: f64) -> Result<Self, Self::Error> {
        match level {
            l if (l - 0.90).abs() < 1e-9 => Ok(ConfidenceLevel::P90),
            l if (l - 0.95).abs() < 1e-9 => Ok(ConfidenceLevel::P95),
            l if (l - 0.99).abs() < 1e-9 => Ok(ConfidenceLevel::P99),
            l => Err(ValidationError::InvalidInput(format!("confidence must be 0.90, 0.95 or 0.99, got {l}"))),
        }
    }
}

/// Cochran sample size for a proportion (p = 0.5) with finite-population
/// correction, rounded up and never above the population.
pub fn sample_size(population: Population, confidence: ConfidenceLevel, margin: f64) -> Result<u64, ValidationError> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(ValidationError::InvalidInput(format!("margin must be in (0, 1), got {margin}")));
    }
    let z = confidence.z();
    let n0 = z * z * 0.25 / (margin * margin);
    let n = match population {
        Population::Infinite => n0,
        Population::Finite(0) => return Err(ValidationError::InvalidInput("population must be at least 1".into())),
        Population::Finite(size) => n0 / (1.0 + (n0 - 1.0) / size as f64),
    };
    // absorb representation error so that e.g. 9604.000000000002 stays 9604
    let rounded = (n - 1e-9).ceil().max(1.0) as u64;
    Ok(match population {
        Population::Finite(size) => rounded.min(size),
        Population::Infinite => rounded,
    })
}
