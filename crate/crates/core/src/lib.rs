//! Microservice logical coupling over git commit histories.
//!
//! The pipeline reads a commit history ([`ingest`]), attributes changed files
//! to services ([`service_map`]), lays the history out on active days
//! ([`activity`]) and computes, for every service pair, a sliding-window
//! coupling series with directional conditional probabilities
//! ([`coupling`]). [`analysis`] segments and correlates those series,
//! [`validation`] scores them against labeled ground truth and [`synth`]
//! produces seeded histories with planted coupling for experiments.
//!
//! ```
//! use mlc::activity::PairDaySequence;
//! use mlc::coupling::{coupling_series, Rational, WindowConfig};
//!
//! // mu changes on days 1, 2, 4; nu on days 1, 2, 3
//! let flags = [(true, true), (true, true), (false, true), (true, false)];
//! let seq = PairDaySequence::from_flags("mu", "nu", &flags);
//! let series = coupling_series(&seq, WindowConfig::new(3).unwrap());
//! assert_eq!(series.coupling_values(), vec![Rational::new(2, 3), Rational::new(1, 3)]);
//! ```

pub mod activity;
pub mod analysis;
pub mod coupling;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod service_map;
pub mod synth;
pub mod validation;

pub use activity::{build_calendar, relevant_days, ActivityCalendar, PairDaySequence};
pub use coupling::{
    conditional_series, coupling_series, coupling_state, PairSeries, Rational, Threshold, WindowConfig,
};
pub use ingest::{parse_commit_log, CommitFilter, CommitRecord};
pub use service_map::{load_service_map, ServiceMap};
