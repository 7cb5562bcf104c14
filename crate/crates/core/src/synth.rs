//! Seeded synthetic commit histories with planted coupling episodes.
//!
//! Every simulated day each service commits independently with its own
//! rate. While an episode `(mu, nu, start, end, p)` is active, each day on
//! which `mu` commits also changes `nu` in the same commit with probability
//! `p`. Days on which nothing commits produce no records, so they never
//! become active days.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{write_commit_log, Churn, CommitRecord};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid synthetic spec: {0}")]
pub struct SynthError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingEpisode {
    pub mu: String,
    pub nu: String,
    pub start_day: usize,
    pub end_day: usize,
    pub co_update_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub services: usize,
    pub days: usize,
    /// Daily commit probability of every service without an override.
    pub base_rate: f64,
    pub rate_overrides: BTreeMap<String, f64>,
    pub episodes: Vec<CouplingEpisode>,
    /// Distinct files per service that commits draw from.
    pub files_per_service: usize,
    pub max_files_per_commit: usize,
    pub max_lines_per_file: u64,
    pub start_date: NaiveDate,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            services: 4,
            days: 200,
            base_rate: 0.3,
            rate_overrides: BTreeMap::new(),
            episodes: Vec::new(),
            files_per_service: 8,
            max_files_per_commit: 3,
            max_lines_per_file: 40,
            start_date: NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid date"),
            seed: 0,
        }
    }
}

/// Name of the `i`-th synthetic service (0-based).
pub fn service_name(i: usize) -> String {
    format!("svc-{i:02}")
}

/// Mapping document matching the directory layout of generated histories.
pub fn synthetic_map_document(services: usize) -> String {
    (0..services).map(|i| format!("{0}/** => {0}\n", service_name(i))).collect()
}

impl SyntheticSpec {
    pub fn service_names(&self) -> Vec<String> {
        (0..self.services).map(service_name).collect()
    }

    pub fn rate_of(&self, service: &str) -> f64 {
        self.rate_overrides.get(service).copied().unwrap_or(self.base_rate)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: String| Err(SynthError(m));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.services == 0 {
            return err("at least one service is required".into());
        }
        if !prob(self.base_rate) {
            return err(format!("base_rate {} outside [0, 1]", self.base_rate));
        }
        let names = self.service_names();
        for (s, r) in &self.rate_overrides {
            if !names.contains(s) {
                return err(format!("rate override for unknown service `{s}`"));
            }
            if !prob(*r) {
                return err(format!("rate {r} for `{s}` outside [0, 1]"));
            }
        }
        for e in &self.episodes {
            if !names.contains(&e.mu) || !names.contains(&e.nu) || e.mu == e.nu {
                return err(format!("episode needs two distinct known services, got {}/{}", e.mu, e.nu));
            }
            if e.start_day < 1 || e.end_day > self.days || e.start_day > e.end_day {
                return err(format!("episode range {}..={} outside 1..={}", e.start_day, e.end_day, self.days));
            }
            if !prob(e.co_update_probability) {
                return err(format!("co_update_probability {} outside [0, 1]", e.co_update_probability));
            }
        }
        if self.files_per_service == 0 || self.max_files_per_commit == 0 {
            return err("file counts must be positive".into());
        }
        Ok(())
    }
}

const MESSAGES: &[&str] = &[
    "fix null check in handler",
    "add endpoint for order lookup",
    "refactor: split service layer",
    "improve query performance",
    "update configuration",
    "implement retry policy",
    "bug: wrong status code",
    "docs: clarify setup",
    "rename internal helpers",
];

/// Generates the commit records described by `spec`.
pub fn generate_commits(spec: &SyntheticSpec) -> Result<Vec<CommitRecord>, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let names = spec.service_names();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let rates: Vec<f64> = names.iter().map(|s| spec.rate_of(s)).collect();
    let mut commits = Vec::new();

    for day in 1..=spec.days {
        let base: Vec<bool> = rates.iter().map(|&r| rng.gen_bool(r)).collect();
        // extra services carried by each committing service's commit
        let mut riders: Vec<Vec<usize>> = vec![Vec::new(); names.len()];
        for e in spec.episodes.iter().filter(|e| (e.start_day..=e.end_day).contains(&day)) {
            let (mu, nu) = (index[e.mu.as_str()], index[e.nu.as_str()]);
            if base[mu] && rng.gen_bool(e.co_update_probability) && !riders[mu].contains(&nu) {
                riders[mu].push(nu);
            }
        }
        let date = spec.start_date + Days::new(day as u64 - 1);
        let committing = base.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i);
        for (seq, svc) in committing.enumerate() {
            let mut files = Vec::new();
            let mut churn = Churn::default();
            for s in std::iter::once(svc).chain(riders[svc].iter().copied()) {
                let count = rng.gen_range(1..=spec.max_files_per_commit);
                for _ in 0..count {
                    let f = format!("{}/src/File{}.java", names[s], rng.gen_range(0..spec.files_per_service));
                    if !files.contains(&f) {
                        files.push(f);
                    }
                    churn.added += rng.gen_range(0..=spec.max_lines_per_file);
                    churn.deleted += rng.gen_range(0..=spec.max_lines_per_file / 2);
                }
            }
            let second = 8 * 3600 + seq as i64 * 60 + rng.gen_range(0..60);
            let midnight = date.and_hms_opt(0, 0, 0).expect("valid time");
            let ts = Utc.from_utc_datetime(&(midnight + chrono::Duration::seconds(second.min(86_399)))).fixed_offset();
            commits.push(CommitRecord {
                id: format!("{:040x}", rng.gen::<u128>()),
                timestamp: ts,
                author: format!("dev{}", rng.gen_range(1..=5)),
                message: MESSAGES[rng.gen_range(0..MESSAGES.len())].to_string(),
                files,
                churn: Some(churn),
                is_merge: false,
            });
        }
    }
    Ok(commits)
}

/// Generates the history as export-format text.
pub fn generate_history(spec: &SyntheticSpec) -> Result<String, SynthError> {
    Ok(write_commit_log(&generate_commits(spec)?))
}
