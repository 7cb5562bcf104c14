//! Active-day calendars and per-pair relevant-day sequences.
//!
//! Only days with at least one commit exist in a calendar; they are numbered
//! from 1. For a pair of services the relevant days are those on which at
//! least one of the two was updated.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::CommitRecord;
use crate::service_map::{resolve_service, ServiceMap};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ActivityError {
    #[error("a service cannot be paired with itself (`{0}`)")]
    SelfPair(String),
    #[error("unknown service `{0}`")]
    UnknownService(String),
    #[error("calendar is inconsistent: {0}")]
    Invalid(String),
}

/// Unit in which co-change is observed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// One unit per UTC calendar date with commits.
    #[default]
    Day,
    /// One unit per commit, ordered by timestamp. Dates may repeat.
    Commit,
}

/// Project-wide active units and the units each service was updated on.
///
/// The serialized form is `{"days": [...ISO dates], "updates": {service: [indices]}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityCalendar {
    pub days: Vec<NaiveDate>,
    pub updates: BTreeMap<String, BTreeSet<usize>>,
}

impl ActivityCalendar {
    /// Number of active units (A).
    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn date(&self, index: usize) -> Option<NaiveDate> {
        index.checked_sub(1).and_then(|i| self.days.get(i).copied())
    }

    pub fn services(&self) -> impl Iterator<Item = &str> {
        self.updates.keys().map(String::as_str)
    }

    /// All unordered service pairs `(a, b)` with `a < b`.
    pub fn service_pairs(&self) -> Vec<(String, String)> {
        let names: Vec<&String> = self.updates.keys().collect();
        let mut out = Vec::new();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                out.push(((*a).clone(), (*b).clone()));
            }
        }
        out
    }

    /// Checks index bounds and date ordering. `strict` demands strictly
    /// increasing dates, as in day granularity.
    pub fn validate(&self, strict: bool) -> Result<(), ActivityError> {
        for w in self.days.windows(2) {
            if w[1] < w[0] || (strict && w[1] == w[0]) {
                return Err(ActivityError::Invalid(format!("days out of order at {}", w[1])));
            }
        }
        for (svc, set) in &self.updates {
            if let Some(bad) = set.iter().find(|&&i| i == 0 || i > self.days.len()) {
                return Err(ActivityError::Invalid(format!(
                    "service `{svc}` has index {bad} outside 1..={}",
                    self.days.len()
                )));
            }
        }
        Ok(())
    }
}

/// Builds the calendar at day granularity.
pub fn build_calendar(commits: &[CommitRecord], map: &ServiceMap) -> ActivityCalendar {
    build_calendar_with(commits, map, Granularity::Day)
}

/// Builds the calendar. A service is updated on a unit iff some commit in
/// that unit changes a file resolving to it; units whose commits touch only
/// unmapped files are still active.
pub fn build_calendar_with(commits: &[CommitRecord], map: &ServiceMap, granularity: Granularity) -> ActivityCalendar {
    let mut updates: BTreeMap<String, BTreeSet<usize>> =
        map.services().iter().map(|s| (s.clone(), BTreeSet::new())).collect();

    let touched =
        |c: &CommitRecord| -> BTreeSet<&str> { c.files.iter().filter_map(|f| resolve_service(map, f)).collect() };

    let days = match granularity {
        Granularity::Day => {
            let mut by_day: BTreeMap<NaiveDate, BTreeSet<&str>> = BTreeMap::new();
            for c in commits {
                by_day.entry(c.utc_date()).or_default().extend(touched(c));
            }
            for (i, services) in by_day.values().enumerate() {
                for s in services {
                    updates.get_mut(*s).expect("map service").insert(i + 1);
                }
            }
            by_day.into_keys().collect()
        }
        Granularity::Commit => {
            let mut ordered: Vec<&CommitRecord> = commits.iter().collect();
            // stable: equal timestamps keep input order
            ordered.sort_by_key(|c| c.timestamp);
            for (i, c) in ordered.iter().enumerate() {
                for s in touched(c) {
                    updates.get_mut(s).expect("map service").insert(i + 1);
                }
            }
            ordered.iter().map(|c| c.utc_date()).collect()
        }
    };
    ActivityCalendar { days, updates }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayEntry {
    pub day_index: usize,
    pub date: NaiveDate,
    pub mu_updated: bool,
    pub nu_updated: bool,
}

impl DayEntry {
    pub fn both(&self) -> bool {
        self.mu_updated && self.nu_updated
    }
}

/// Relevant days of an ordered service pair `(mu, nu)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDaySequence {
    pub mu: String,
    pub nu: String,
    pub entries: Vec<DayEntry>,
}

impl PairDaySequence {
    /// Builds a sequence straight from update flags; entries where neither
    /// flag is set are dropped. Day indices are the 1-based positions in
    /// `flags` and dates are left at the Unix epoch plus the index.
    pub fn from_flags(mu: &str, nu: &str, flags: &[(bool, bool)]) -> Self {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");
        let entries = flags
            .iter()
            .enumerate()
            .filter(|(_, (m, n))| *m || *n)
            .map(|(i, &(m, n))| DayEntry {
                day_index: i + 1,
                date: epoch + chrono::Days::new(i as u64 + 1),
                mu_updated: m,
                nu_updated: n,
            })
            .collect();
        PairDaySequence { mu: mu.to_string(), nu: nu.to_string(), entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The same sequence seen from `(nu, mu)`.
    pub fn swapped(&self) -> Self {
        PairDaySequence {
            mu: self.nu.clone(),
            nu: self.mu.clone(),
            entries: self
                .entries
                .iter()
                .map(|e| DayEntry { mu_updated: e.nu_updated, nu_updated: e.mu_updated, ..*e })
                .collect(),
        }
    }
}

pub fn relevant_days(cal: &ActivityCalendar, mu: &str, nu: &str) -> Result<PairDaySequence, ActivityError> {
    if mu == nu {
        return Err(ActivityError::SelfPair(mu.to_string()));
    }
    let mu_days = cal.updates.get(mu).ok_or_else(|| ActivityError::UnknownService(mu.to_string()))?;
    let nu_days = cal.updates.get(nu).ok_or_else(|| ActivityError::UnknownService(nu.to_string()))?;
    let entries = mu_days
        .union(nu_days)
        .map(|&day_index| {
            let date = cal
                .date(day_index)
                .ok_or_else(|| ActivityError::Invalid(format!("day index {day_index} out of range")))?;
            Ok(DayEntry {
                day_index,
                date,
                mu_updated: mu_days.contains(&day_index),
                nu_updated: nu_days.contains(&day_index),
            })
        })
        .collect::<Result<Vec<_>, ActivityError>>()?;
    Ok(PairDaySequence { mu: mu.to_string(), nu: nu.to_string(), entries })
}

/// Relevant days keyed by calendar date instead of active-day index.
pub fn relevant_dates(
    cal: &ActivityCalendar,
    mu: &str,
    nu: &str,
) -> Result<Vec<(NaiveDate, bool, bool)>, ActivityError> {
    Ok(relevant_days(cal, mu, nu)?.entries.into_iter().map(|e| (e.date, e.mu_updated, e.nu_updated)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_commit_log_str;
    use crate::service_map::load_service_map;

    fn log(records: &[(&str, &[&str])]) -> Vec<CommitRecord> {
        let mut text = String::new();
        for (i, (ts, files)) in records.iter().enumerate() {
            text.push_str(&format!("\x01COMMIT\nc{i}|{ts}|dev|m\n"));
            for f in *files {
                text.push_str(f);
                text.push('\n');
            }
        }
        parse_commit_log_str(&text).unwrap().commits
    }

    fn map() -> ServiceMap {
        load_service_map("svc-a/** => a\nsvc-b/** => b\nsvc-c/** => c\n").unwrap()
    }

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn single_commit() {
        let cal = build_calendar(&log(&[("2023-05-03T10:00:00Z", &["svc-a/x"])]), &map());
        assert_eq!(cal.days, vec![d("2023-05-03")]);
        assert_eq!(cal.updates["a"], BTreeSet::from([1]));
        assert!(cal.updates["b"].is_empty());
    }

    #[test]
    fn unmapped_day_is_active() {
        let commits = log(&[
            ("2023-05-01T10:00:00Z", &["svc-a/x"]),
            ("2023-05-02T10:00:00Z", &["README.md"]),
            ("2023-05-05T10:00:00Z", &["svc-b/x"]),
        ]);
        let cal = build_calendar(&commits, &map());
        assert_eq!(cal.len(), 3);
        assert!(cal.updates.values().all(|s| !s.contains(&2)));
        cal.validate(true).unwrap();
    }

    #[test]
    fn empty_commits() {
        let cal = build_calendar(&[], &map());
        assert!(cal.is_empty());
        assert_eq!(cal.updates.len(), 3);
    }

    #[test]
    fn same_day_commits_merge() {
        let commits = log(&[("2023-05-01T08:00:00Z", &["svc-a/x"]), ("2023-05-01T18:00:00Z", &["svc-b/x"])]);
        let cal = build_calendar(&commits, &map());
        assert_eq!(cal.len(), 1);
        let seq = relevant_days(&cal, "a", "b").unwrap();
        assert!(seq.entries[0].both());

        let per_commit = build_calendar_with(&commits, &map(), Granularity::Commit);
        assert_eq!(per_commit.len(), 2);
        let seq = relevant_days(&per_commit, "a", "b").unwrap();
        assert!(seq.entries.iter().all(|e| !e.both()));
        per_commit.validate(false).unwrap();
    }

    #[test]
    fn relevant_day_errors() {
        let cal = build_calendar(&[], &map());
        assert_eq!(relevant_days(&cal, "a", "a"), Err(ActivityError::SelfPair("a".into())));
        assert_eq!(relevant_days(&cal, "a", "zz"), Err(ActivityError::UnknownService("zz".into())));
        assert!(relevant_days(&cal, "a", "b").unwrap().is_empty());
    }

    #[test]
    fn identical_singletons() {
        let cal = ActivityCalendar {
            days: (1..=5).map(|i| d("2023-01-01") + chrono::Days::new(i)).collect(),
            updates: BTreeMap::from([("a".to_string(), BTreeSet::from([5])), ("b".to_string(), BTreeSet::from([5]))]),
        };
        let seq = relevant_days(&cal, "a", "b").unwrap();
        assert_eq!(seq.entries.len(), 1);
        let e = seq.entries[0];
        assert_eq!((e.day_index, e.mu_updated, e.nu_updated), (5, true, true));
    }

    #[test]
    fn validate_rejects_out_of_range() {
        let cal = ActivityCalendar {
            days: vec![d("2023-01-01")],
            updates: BTreeMap::from([("a".to_string(), BTreeSet::from([2]))]),
        };
        assert!(cal.validate(true).is_err());
    }

    #[test]
    fn calendar_json_shape() {
        let cal = build_calendar(&log(&[("2023-05-03T10:00:00Z", &["svc-a/x"])]), &map());
        let json = serde_json::to_value(&cal).unwrap();
        assert_eq!(json["days"][0], "2023-05-03");
        assert_eq!(json["updates"]["a"][0], 1);
    }
}
