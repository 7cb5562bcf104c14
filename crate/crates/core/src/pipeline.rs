//! End-to-end runs driven by a project manifest.
//!
//! ```toml
//! commits_file = "commits.log"   # or: repo_path = "../some-repo"
//! map_file = "map.txt"           # or: autodetect = true (optionally tree_file)
//! out_dir = "out"
//!
//! [config]
//! window = 30
//! threshold = 0.5
//! patience = 5
//! sweep_windows = [10, 30, 100]  # optional
//! ```
//!
//! Relative paths resolve against the manifest's directory. A run writes
//! `map.txt`, `calendar.json`, `series.csv`, `states.json`, `segments.json`,
//! `sweep.json` (when requested) and `run.json` into the output directory.
//! Stage failures are collected instead of aborting, and everything produced
//! before a failure stays on disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::activity::{build_calendar_with, relevant_days, ActivityCalendar, Granularity};
use crate::analysis::{run_sweep, NamedFilter, SegmentParams, SweepSpec};
use crate::coupling::{
    baseline_coupled, coupling_series, coupling_state, historical_cochange, to_f64, PairSeries, Threshold,
    WindowConfig, BASELINE_LIMIT, DEFAULT_PATIENCE, DEFAULT_WINDOW,
};
use crate::ingest::{export_git_log, filter_commits, list_git_tree, parse_commit_log, CommitFilter, CommitRecord};
use crate::report::{segment_tables, series_points, write_series_csv, PairStateReport, StatePoint};
use crate::service_map::{autodetect_services, load_service_map, ServiceMap};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read manifest {path}: {cause}")]
    Manifest { path: PathBuf, cause: String },
    #[error("invalid manifest: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub window: usize,
    pub threshold: Threshold,
    pub patience: usize,
    pub granularity: Granularity,
    pub filter: CommitFilter,
    pub segmentation: SegmentParams,
    /// Window sizes for an optional sensitivity sweep.
    pub sweep_windows: Option<Vec<usize>>,
    pub sweep_thresholds: Option<Vec<Threshold>>,
    /// Restrict the run to these pairs; all unordered pairs when absent.
    pub pairs: Option<Vec<(String, String)>>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            window: DEFAULT_WINDOW,
            threshold: Threshold::default(),
            patience: DEFAULT_PATIENCE,
            granularity: Granularity::Day,
            filter: CommitFilter::default(),
            segmentation: SegmentParams::default(),
            sweep_windows: None,
            sweep_thresholds: None,
            pairs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectManifest {
    pub repo_path: Option<PathBuf>,
    pub commits_file: Option<PathBuf>,
    pub map_file: Option<PathBuf>,
    #[serde(default)]
    pub autodetect: bool,
    /// Tree listing for autodetection; defaults to `git ls-files` for a
    /// repository, or to every path seen in the history.
    pub tree_file: Option<PathBuf>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub config: AnalysisConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("mlc-out")
}

impl ProjectManifest {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Manifest { path: path.to_path_buf(), cause: e.to_string() })?;
        let mut m: ProjectManifest = toml::from_str(&text)
            .map_err(|e| PipelineError::Manifest { path: path.to_path_buf(), cause: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut m.repo_path, &mut m.commits_file, &mut m.map_file, &mut m.tree_file].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if m.out_dir.is_relative() {
            m.out_dir = base.join(&m.out_dir);
        }
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.repo_path.is_some() == self.commits_file.is_some() {
            return Err(PipelineError::Invalid("set exactly one of repo_path and commits_file".into()));
        }
        if self.map_file.is_some() == self.autodetect {
            return Err(PipelineError::Invalid("set exactly one of map_file and autodetect = true".into()));
        }
        let c = &self.config;
        if c.window == 0 || c.patience == 0 {
            return Err(PipelineError::Invalid("window and patience must be at least 1".into()));
        }
        c.filter.validate().map_err(PipelineError::Invalid)?;
        if c.sweep_windows.as_ref().is_some_and(|w| w.is_empty() || w.contains(&0)) {
            return Err(PipelineError::Invalid("sweep_windows must be non-empty and positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub cause: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub config: AnalysisConfig,
    pub inputs: Vec<InputDigest>,
    pub commits_parsed: usize,
    pub commits_skipped_non_utf8: usize,
    pub commits_after_filter: usize,
    pub active_days: usize,
    pub pairs: usize,
    pub outputs: Vec<String>,
    pub diagnostics: Vec<String>,
    pub stage_errors: Vec<StageError>,
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub out_dir: PathBuf,
    pub metadata: RunMetadata,
    pub calendar: Option<ActivityCalendar>,
    pub series: Vec<PairSeries>,
}

impl ReportBundle {
    pub fn succeeded(&self) -> bool {
        self.metadata.stage_errors.is_empty()
    }
}

struct Run {
    out_dir: PathBuf,
    meta: RunMetadata,
}

impl Run {
    fn fail(&mut self, stage: &str, cause: impl ToString) {
        self.meta.stage_errors.push(StageError { stage: stage.to_string(), cause: cause.to_string() });
    }

    fn write(&mut self, stage: &str, name: &str, bytes: &[u8]) {
        match fs::write(self.out_dir.join(name), bytes) {
            Ok(()) => self.meta.outputs.push(name.to_string()),
            Err(e) => self.fail(stage, format!("writing {name}: {e}")),
        }
    }

    fn write_json<T: Serialize>(&mut self, stage: &str, name: &str, value: &T) {
        match serde_json::to_vec_pretty(value) {
            Ok(mut bytes) => {
                bytes.push(b'\n');
                self.write(stage, name, &bytes)
            }
            Err(e) => self.fail(stage, e),
        }
    }

    fn digest(&mut self, path: &Path, bytes: &[u8]) {
        self.meta
            .inputs
            .push(InputDigest { path: path.display().to_string(), sha256: format!("{:x}", Sha256::digest(bytes)) });
    }
}

/// Runs ingest → map → calendar → couple → states/segments → sweep.
pub fn run_pipeline(manifest: &ProjectManifest) -> Result<ReportBundle, PipelineError> {
    manifest.validate()?;
    let config = &manifest.config;
    let mut run = Run {
        out_dir: manifest.out_dir.clone(),
        meta: RunMetadata {
            tool: "mlc".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            inputs: Vec::new(),
            commits_parsed: 0,
            commits_skipped_non_utf8: 0,
            commits_after_filter: 0,
            active_days: 0,
            pairs: 0,
            outputs: Vec::new(),
            diagnostics: Vec::new(),
            stage_errors: Vec::new(),
        },
    };
    if let Err(e) = fs::create_dir_all(&run.out_dir) {
        run.fail("setup", format!("creating {}: {e}", run.out_dir.display()));
        return Ok(finish(run, None, Vec::new()));
    }

    let commits = ingest_stage(manifest, &mut run);
    let map = commits.as_ref().and_then(|c| map_stage(manifest, c, &mut run));
    let (Some(commits), Some(map)) = (commits, map) else {
        return Ok(finish(run, None, Vec::new()));
    };

    let filtered = filter_commits(&commits, &config.filter);
    run.meta.commits_after_filter = filtered.len();
    let calendar = build_calendar_with(&filtered, &map, config.granularity);
    run.meta.active_days = calendar.len();
    if calendar.is_empty() {
        run.meta.diagnostics.push("no active days (A = 0)".into());
    }
    run.write_json("calendar", "calendar.json", &calendar);

    let series = couple_stage(config, &calendar, &mut run);
    segment_stage(config, &series, &mut run);

    if let Some(windows) = &config.sweep_windows {
        let spec = SweepSpec {
            window_sizes: windows.clone(),
            filters: vec![NamedFilter { name: "config".into(), filter: config.filter.clone() }],
            thresholds: config.sweep_thresholds.clone().unwrap_or_else(|| vec![config.threshold]),
            granularity: config.granularity,
        };
        match run_sweep(&commits, &map, &spec) {
            Ok(report) => run.write_json("sweep", "sweep.json", &report),
            Err(e) => run.fail("sweep", e),
        }
    }
    Ok(finish(run, Some(calendar), series))
}

fn ingest_stage(manifest: &ProjectManifest, run: &mut Run) -> Option<Vec<CommitRecord>> {
    let bytes = if let Some(repo) = &manifest.repo_path {
        match export_git_log(repo) {
            Ok(text) => {
                run.write("ingest", "commits.log", text.as_bytes());
                text.into_bytes()
            }
            Err(e) => {
                run.fail("ingest", e);
                return None;
            }
        }
    } else {
        let path = manifest.commits_file.as_ref().expect("validated");
        match fs::read(path) {
            Ok(b) => {
                run.digest(path, &b);
                b
            }
            Err(e) => {
                run.fail("ingest", format!("reading {}: {e}", path.display()));
                return None;
            }
        }
    };
    match parse_commit_log(&bytes[..]) {
        Ok(log) => {
            run.meta.commits_parsed = log.commits.len();
            run.meta.commits_skipped_non_utf8 = log.skipped_non_utf8;
            if log.skipped_non_utf8 > 0 {
                run.meta.diagnostics.push(format!("{} commit(s) skipped for non-UTF-8 paths", log.skipped_non_utf8));
            }
            Some(log.commits)
        }
        Err(e) => {
            run.fail("ingest", e);
            None
        }
    }
}

fn map_stage(manifest: &ProjectManifest, commits: &[CommitRecord], run: &mut Run) -> Option<ServiceMap> {
    let result = if let Some(path) = &manifest.map_file {
        match fs::read_to_string(path) {
            Ok(doc) => {
                run.digest(path, doc.as_bytes());
                load_service_map(&doc).map_err(|e| e.to_string())
            }
            Err(e) => Err(format!("reading {}: {e}", path.display())),
        }
    } else {
        let tree: Result<Vec<String>, String> = if let Some(tree_file) = &manifest.tree_file {
            fs::read_to_string(tree_file)
                .map(|t| {
                    run.digest(tree_file, t.as_bytes());
                    t.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect()
                })
                .map_err(|e| format!("reading {}: {e}", tree_file.display()))
        } else if let Some(repo) = &manifest.repo_path {
            list_git_tree(repo).map_err(|e| e.to_string())
        } else {
            let mut seen: Vec<String> = commits.iter().flat_map(|c| c.files.iter().cloned()).collect();
            seen.sort();
            seen.dedup();
            Ok(seen)
        };
        tree.and_then(|t| autodetect_services(&t).map(|m| m.with_sizes(&t)).map_err(|e| e.to_string()))
    };
    match result {
        Ok(map) => {
            run.write("map", "map.txt", map.to_document().as_bytes());
            if let Some(sizes) = map.sizes() {
                run.write_json("map", "service_sizes.json", sizes);
            }
            Some(map)
        }
        Err(e) => {
            run.fail("map", e);
            None
        }
    }
}

fn couple_stage(config: &AnalysisConfig, calendar: &ActivityCalendar, run: &mut Run) -> Vec<PairSeries> {
    let w = WindowConfig::new(config.window).expect("validated");
    let pairs = config.pairs.clone().unwrap_or_else(|| calendar.service_pairs());
    let mut series = Vec::new();
    let mut states = Vec::new();
    for (a, b) in pairs {
        let seq = match relevant_days(calendar, &a, &b) {
            Ok(seq) => seq,
            Err(e) => {
                run.fail("couple", format!("{a}/{b}: {e}"));
                continue;
            }
        };
        let s = coupling_series(&seq, w);
        if s.diagnostics.insufficient_days {
            run.meta.diagnostics.push(format!(
                "{a}/{b}: {} relevant day(s), fewer than the window of {}",
                s.diagnostics.relevant_days, config.window
            ));
        }
        let state = coupling_state(&s, config.threshold, config.patience);
        let cochange = historical_cochange(&seq);
        states.push(PairStateReport {
            mu: a.clone(),
            nu: b.clone(),
            threshold: to_f64(config.threshold.value()),
            patience: config.patience,
            timeline: s
                .points
                .iter()
                .zip(&state.timeline)
                .map(|(p, (_, st))| StatePoint { window_end_date: p.end_date, state: *st })
                .collect(),
            cochange_count: Some(cochange),
            baseline_coupled: Some(baseline_coupled(cochange, BASELINE_LIMIT)),
            diagnostics: Some(s.diagnostics),
        });
        series.push(s);
    }
    run.meta.pairs = series.len();
    let mut csv = Vec::new();
    match write_series_csv(&series, &mut csv) {
        Ok(()) => run.write("couple", "series.csv", &csv),
        Err(e) => run.fail("couple", e),
    }
    run.write_json("states", "states.json", &states);
    series
}

fn segment_stage(config: &AnalysisConfig, series: &[PairSeries], run: &mut Run) {
    let with_points: Vec<PairSeries> = series.iter().filter(|s| !s.points.is_empty()).cloned().collect();
    let segments = segment_tables(&series_points(&with_points), config.segmentation);
    run.write_json("analyze", "segments.json", &segments);
}

fn finish(mut run: Run, calendar: Option<ActivityCalendar>, series: Vec<PairSeries>) -> ReportBundle {
    run.meta.outputs.push("run.json".into());
    let written = serde_json::to_vec_pretty(&run.meta).map_err(|e| e.to_string()).and_then(|mut bytes| {
        bytes.push(b'\n');
        fs::write(run.out_dir.join("run.json"), bytes).map_err(|e| e.to_string())
    });
    // a failure writing run.json is only visible in the returned metadata
    if let Err(e) = written {
        run.meta.outputs.pop();
        run.fail("report", format!("writing run.json: {e}"));
    }
    ReportBundle { out_dir: run.out_dir, metadata: run.meta, calendar, series }
}

/// Reads every regular file of a bundle directory, keyed by file name.
pub fn read_bundle(dir: &Path) -> std::io::Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            out.insert(entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path())?);
        }
    }
    Ok(out)
}
