//! Sliding-window logical coupling between two services.
//!
//! Windows run over the pair's relevant-day sequence, advance by one entry,
//! and are only emitted when full. For a window of `n` entries with `co`
//! days on which both services changed, `mu_days` days touching `mu` and
//! `nu_days` touching `nu`:
//!
//! * coupling       = co / n
//! * P(nu | mu)     = co / mu_days   (undefined when mu_days = 0)
//! * P(mu | nu)     = co / nu_days   (undefined when nu_days = 0)
//!
//! All values are exact rationals.

use std::num::NonZeroUsize;

use chrono::NaiveDate;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::activity::PairDaySequence;

pub type Rational = Ratio<u64>;

/// Co-change count above which the historical baseline calls a pair coupled.
pub const BASELINE_LIMIT: u64 = 5;

pub const DEFAULT_WINDOW: usize = 30;
pub const DEFAULT_PATIENCE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub n: NonZeroUsize,
}

impl WindowConfig {
    pub fn new(n: usize) -> Option<Self> {
        NonZeroUsize::new(n).map(|n| WindowConfig { n })
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.n.get()
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig::new(DEFAULT_WINDOW).expect("non-zero")
    }
}

/// Metrics of one full window, stamped with its last relevant day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPoint {
    pub end_day_index: usize,
    pub end_date: NaiveDate,
    pub co_days: u64,
    pub mu_days: u64,
    pub nu_days: u64,
    pub coupling: Rational,
    pub p_nu_given_mu: Option<Rational>,
    pub p_mu_given_nu: Option<Rational>,
}

impl WindowPoint {
    fn from_counts(end_day_index: usize, end_date: NaiveDate, n: u64, co: u64, mu: u64, nu: u64) -> Self {
        WindowPoint {
            end_day_index,
            end_date,
            co_days: co,
            mu_days: mu,
            nu_days: nu,
            coupling: Rational::new(co, n),
            p_nu_given_mu: (mu > 0).then(|| Rational::new(co, mu)),
            p_mu_given_nu: (nu > 0).then(|| Rational::new(co, nu)),
        }
    }
}

/// Per-pair bookkeeping attached to every series.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesDiagnostics {
    pub relevant_days: usize,
    /// Set when the pair has fewer relevant days than the window length.
    pub insufficient_days: bool,
    pub undefined_nu_given_mu: usize,
    pub undefined_mu_given_nu: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSeries {
    pub mu: String,
    pub nu: String,
    pub n: usize,
    pub points: Vec<WindowPoint>,
    pub diagnostics: SeriesDiagnostics,
}

impl PairSeries {
    pub fn coupling_values(&self) -> Vec<Rational> {
        self.points.iter().map(|p| p.coupling).collect()
    }

    pub fn coupling_f64(&self) -> Vec<f64> {
        self.points.iter().map(|p| to_f64(p.coupling)).collect()
    }
}

/// Computes every full window over `seq`, sliding by one entry.
pub fn coupling_series(seq: &PairDaySequence, w: WindowConfig) -> PairSeries {
    let n = w.len();
    let entries = &seq.entries;
    let mut diagnostics =
        SeriesDiagnostics { relevant_days: entries.len(), insufficient_days: entries.len() < n, ..Default::default() };
    let mut points = Vec::with_capacity(entries.len().saturating_sub(n - 1));
    let (mut co, mut mu, mut nu) = (0u64, 0u64, 0u64);
    for (i, e) in entries.iter().enumerate() {
        co += u64::from(e.both());
        mu += u64::from(e.mu_updated);
        nu += u64::from(e.nu_updated);
        if i >= n {
            let out = &entries[i - n];
            co -= u64::from(out.both());
            mu -= u64::from(out.mu_updated);
            nu -= u64::from(out.nu_updated);
        }
        if i + 1 >= n {
            let p = WindowPoint::from_counts(e.day_index, e.date, n as u64, co, mu, nu);
            diagnostics.undefined_nu_given_mu += usize::from(p.p_nu_given_mu.is_none());
            diagnostics.undefined_mu_given_nu += usize::from(p.p_mu_given_nu.is_none());
            points.push(p);
        }
    }
    PairSeries { mu: seq.mu.clone(), nu: seq.nu.clone(), n, points, diagnostics }
}

/// The two directional tracks of a series, window by window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionalTracks {
    pub p_nu_given_mu: Vec<Option<Rational>>,
    pub p_mu_given_nu: Vec<Option<Rational>>,
}

pub fn conditional_series(seq: &PairDaySequence, w: WindowConfig) -> ConditionalTracks {
    let s = coupling_series(seq, w);
    ConditionalTracks {
        p_nu_given_mu: s.points.iter().map(|p| p.p_nu_given_mu).collect(),
        p_mu_given_nu: s.points.iter().map(|p| p.p_mu_given_nu).collect(),
    }
}

/// Number of relevant days on which both services changed.
pub fn historical_cochange(seq: &PairDaySequence) -> u64 {
    seq.entries.iter().filter(|e| e.both()).count() as u64
}

/// Prior-work rule: coupled iff co-changed strictly more than `limit` times.
pub fn baseline_coupled(count: u64, limit: u64) -> bool {
    count > limit
}

/// Coupling threshold in (0, 1], held as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Threshold(Rational);

impl Threshold {
    pub fn new(value: Rational) -> Result<Self, String> {
        if *value.numer() == 0 || value > Rational::from_integer(1) {
            return Err(format!("threshold must be in (0, 1], got {value}"));
        }
        Ok(Threshold(value))
    }

    pub fn value(&self) -> Rational {
        self.0
    }
}

impl TryFrom<f64> for Threshold {
    type Error = String;

    fn try_from(t: f64) -> Result<Self, Self::Error> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(format!("threshold must be in (0, 1], got {t}"));
        }
        Threshold::new(recover_rational(t, 1_000_000))
    }
}

impl From<Threshold> for f64 {
    fn from(t: Threshold) -> f64 {
        to_f64(t.0)
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold(Rational::new(1, 2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateKind {
    Coupled,
    Decoupled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingState {
    pub threshold: Threshold,
    pub patience: usize,
    pub timeline: Vec<(usize, StateKind)>,
}

/// Hysteresis over a value sequence: start decoupled, become coupled on any
/// value `>= t`, fall back only after `k` consecutive values below `t`.
pub fn state_timeline<I>(values: I, t: Threshold, k: usize) -> Vec<StateKind>
where
    I: IntoIterator<Item = Rational>,
{
    assert!(k >= 1, "patience must be at least 1");
    let mut state = StateKind::Decoupled;
    let mut below = 0usize;
    values
        .into_iter()
        .map(|v| {
            if v >= t.0 {
                state = StateKind::Coupled;
                below = 0;
            } else {
                below += 1;
                if state == StateKind::Coupled && below >= k {
                    state = StateKind::Decoupled;
                }
            }
            state
        })
        .collect()
}

pub fn coupling_state(series: &PairSeries, t: Threshold, k: usize) -> CouplingState {
    let states = state_timeline(series.points.iter().map(|p| p.coupling), t, k);
    CouplingState {
        threshold: t,
        patience: k,
        timeline: series.points.iter().map(|p| p.end_day_index).zip(states).collect(),
    }
}

pub fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Renders a value with 12 significant digits, trailing zeros trimmed.
pub fn format_decimal(r: Rational) -> String {
    format_f64(to_f64(r))
}

pub(crate) fn format_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Closest fraction to non-negative `x` with denominator at most `max_den`.
///
/// Decimals written by [`format_decimal`] come back exact as long as the
/// original denominator is at most 10^5: distinct fractions with such
/// denominators are at least 1e-10 apart, far more than the rounding error.
pub fn recover_rational(x: f64, max_den: u64) -> Rational {
    assert!(x >= 0.0 && x.is_finite(), "value must be finite and non-negative");
    let whole = x.floor();
    let mut frac = x - whole;
    // convergents h/k of the continued fraction expansion
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut best = Rational::new(whole as u64, 1);
    let mut a = 0u64;
    for _ in 0..64 {
        let h2 = a.saturating_mul(h1).saturating_add(h0);
        let k2 = a.saturating_mul(k1).saturating_add(k0);
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if k1 > 0 {
            best = Rational::new(whole as u64 * k1 + h1, k1);
        }
        if frac < 1e-15 {
            break;
        }
        let inv = 1.0 / frac;
        a = inv.floor() as u64;
        frac = inv - inv.floor();
    }
    best
}
