use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mlc::activity::{build_calendar_with, relevant_days, ActivityCalendar, Granularity};
use mlc::analysis::{run_sweep, NamedFilter, SegmentParams, SweepSpec, DEFAULT_EPSILON};
use mlc::coupling::{coupling_series, Threshold, WindowConfig, DEFAULT_PATIENCE, DEFAULT_WINDOW};
use mlc::ingest::{export_git_log, filter_commits, parse_commit_log, CommitFilter, CommitRecord, CommitScope};
use mlc::pipeline::{run_pipeline, ProjectManifest};
use mlc::report::{read_series_csv, segment_tables, series_json, table_points, table_states, write_series_csv};
use mlc::service_map::{autodetect_services, load_service_map, ServiceMap};
use mlc::synth::{generate_history, SyntheticSpec};
use mlc::validation::{
    confusion, precision_recall_f1, read_ground_truth, sample_size, ConfidenceLevel, Population, PredictedStates,
};

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "mlc", version, about = "Microservice logical coupling over git histories")]
struct Cli {
    /// Seed for commands that draw random numbers
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for outputs written without an explicit -o
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Day,
    Commit,
}

impl From<GranularityArg> for Granularity {
    fn from(g: GranularityArg) -> Self {
        match g {
            GranularityArg::Day => Granularity::Day,
            GranularityArg::Commit => Granularity::Commit,
        }
    }
}

#[derive(clap::Args, Clone)]
struct FilterArgs {
    #[arg(long)]
    include_merges: bool,
    #[arg(long)]
    include_bots: bool,
    #[arg(long)]
    max_files: Option<u64>,
    #[arg(long)]
    max_churn: Option<u64>,
    /// Commit scopes to drop (refactoring, bugfix, improvement, newfeature, other)
    #[arg(long = "exclude-scope", value_delimiter = ',')]
    exclude_scopes: Vec<CommitScope>,
    #[arg(long, value_enum, default_value_t = GranularityArg::Day)]
    granularity: GranularityArg,
}

impl FilterArgs {
    fn filter(&self) -> CliResult<CommitFilter> {
        let f = CommitFilter {
            exclude_merges: !self.include_merges,
            exclude_bots: !self.include_bots,
            max_files: self.max_files,
            max_churn: self.max_churn,
            excluded_scopes: self.exclude_scopes.iter().copied().collect(),
        };
        f.validate()?;
        Ok(f)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Export a local git repository into the commit log format
    Ingest {
        repo: PathBuf,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Emit a mapping document
    Map {
        /// Detect services from marker files in a tree listing
        #[arg(long)]
        auto: PathBuf,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Build the active-day calendar
    Calendar {
        commits: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Compute sliding-window coupling series from a calendar
    Couple {
        calendar: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        n: usize,
        /// Restrict to one pair, e.g. `--pairs a,b`
        #[arg(long, value_delimiter = ',')]
        pairs: Option<Vec<String>>,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Segment series and/or derive coupled/decoupled states
    Analyze {
        series: PathBuf,
        #[arg(long)]
        segment: bool,
        #[arg(long, default_value_t = 0.05)]
        max_sse: f64,
        #[arg(long, default_value_t = 5)]
        min_len: usize,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        /// Also emit coupled/decoupled timelines
        #[arg(long)]
        states: bool,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value_t = DEFAULT_PATIENCE)]
        patience: usize,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Sensitivity sweep over window sizes and thresholds
    Sweep {
        commits: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "10,30,100")]
        windows: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        thresholds: Vec<f64>,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Score coupled/decoupled predictions against ground truth
    Validate {
        series: PathBuf,
        truth: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value_t = DEFAULT_PATIENCE)]
        patience: usize,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Generate a synthetic history from a JSON spec
    Synth {
        spec: PathBuf,
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Run the whole pipeline from a TOML manifest
    Run { manifest: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("mlc: {e}");
            ExitCode::FAILURE
        }
    }
}

fn output_path(cli: &Cli, explicit: &Option<PathBuf>, default_name: &str) -> Option<PathBuf> {
    explicit.clone().or_else(|| cli.out_dir.as_ref().map(|d| d.join(default_name)))
}

fn emit(path: Option<PathBuf>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(p, bytes)?
        }
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn json<T: serde::Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn read_commits(path: &Path) -> CliResult<Vec<CommitRecord>> {
    let log = parse_commit_log(std::io::BufReader::new(fs::File::open(path)?))?;
    if log.skipped_non_utf8 > 0 {
        eprintln!("mlc: warning: skipped {} commit(s) with non-UTF-8 paths", log.skipped_non_utf8);
    }
    Ok(log.commits)
}

fn read_map(path: &Path) -> CliResult<ServiceMap> {
    Ok(load_service_map(&fs::read_to_string(path)?)?)
}

fn dispatch(cli: &Cli) -> CliResult<bool> {
    match &cli.command {
        Command::Ingest { repo, o } => {
            let text = export_git_log(repo)?;
            emit(output_path(cli, o, "commits.log"), text.as_bytes())?;
        }
        Command::Map { auto, o } => {
            let tree: Vec<String> = fs::read_to_string(auto)?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect();
            let map = autodetect_services(&tree)?;
            emit(output_path(cli, o, "map.txt"), map.to_document().as_bytes())?;
        }
        Command::Calendar { commits, map, filter, o } => {
            let commits = filter_commits(&read_commits(commits)?, &filter.filter()?);
            let cal = build_calendar_with(&commits, &read_map(map)?, filter.granularity.into());
            emit(output_path(cli, o, "calendar.json"), &json(&cal)?)?;
        }
        Command::Couple { calendar, n, pairs, o } => {
            let cal: ActivityCalendar = serde_json::from_slice(&fs::read(calendar)?)?;
            cal.validate(false)?;
            let w = WindowConfig::new(*n).ok_or("--n must be at least 1")?;
            let pairs = match pairs {
                Some(p) if p.len() == 2 => vec![(p[0].clone(), p[1].clone())],
                Some(_) => return Err("--pairs takes exactly two services, e.g. --pairs a,b".into()),
                None => cal.service_pairs(),
            };
            let mut series = Vec::new();
            for (a, b) in pairs {
                let s = coupling_series(&relevant_days(&cal, &a, &b)?, w);
                if s.diagnostics.insufficient_days {
                    eprintln!("mlc: {a}/{b}: {} relevant day(s) < n = {n}, no windows", s.diagnostics.relevant_days);
                }
                series.push(s);
            }
            let bytes = if cli.format == Format::Json {
                json(&series_json(&series))?
            } else {
                let mut buf = Vec::new();
                write_series_csv(&series, &mut buf)?;
                buf
            };
            let name = if cli.format == Format::Json { "series.json" } else { "series.csv" };
            emit(output_path(cli, o, name), &bytes)?;
        }
        Command::Analyze { series, segment, max_sse, min_len, epsilon, states, threshold, patience, o } => {
            if !segment && !states {
                return Err("nothing to do: pass --segment and/or --states".into());
            }
            let tables = read_series_csv(fs::File::open(series)?)?;
            let mut doc = serde_json::Map::new();
            if *segment {
                let params = SegmentParams { max_sse: *max_sse, min_len: *min_len, epsilon: *epsilon };
                let segs = segment_tables(&table_points(&tables), params);
                if !*states {
                    emit(output_path(cli, o, "segments.json"), &json(&segs)?)?;
                    return Ok(true);
                }
                doc.insert("segments".into(), serde_json::to_value(segs)?);
            }
            let t = Threshold::try_from(*threshold)?;
            if *patience == 0 {
                return Err("--patience must be at least 1".into());
            }
            let st = table_states(&tables, t, *patience);
            if !*segment {
                emit(output_path(cli, o, "states.json"), &json(&st)?)?;
                return Ok(true);
            }
            doc.insert("states".into(), serde_json::to_value(st)?);
            emit(output_path(cli, o, "analysis.json"), &json(&doc)?)?;
        }
        Command::Sweep { commits, map, windows, thresholds, filter, o } => {
            let spec = SweepSpec {
                window_sizes: windows.clone(),
                filters: vec![NamedFilter { name: "cli".into(), filter: filter.filter()? }],
                thresholds: thresholds.iter().map(|t| Threshold::try_from(*t)).collect::<Result<_, _>>()?,
                granularity: filter.granularity.into(),
            };
            let report = run_sweep(&read_commits(commits)?, &read_map(map)?, &spec)?;
            emit(output_path(cli, o, "sweep.json"), &json(&report)?)?;
        }
        Command::Validate { series, truth, threshold, patience, o } => {
            let tables = read_series_csv(fs::File::open(series)?)?;
            let truth = read_ground_truth(fs::File::open(truth)?, &truth.display().to_string())?;
            if *patience == 0 {
                return Err("--patience must be at least 1".into());
            }
            let states = table_states(&tables, Threshold::try_from(*threshold)?, *patience);
            let predicted: Vec<PredictedStates> = states.iter().map(|s| s.predicted()).collect();
            let c = confusion(&predicted, &truth)?;
            let windows: u64 = tables.iter().map(|t| t.rows.len() as u64).sum();
            let suggested = if windows > 0 {
                Some(sample_size(Population::Finite(windows), ConfidenceLevel::P95, 0.01)?)
            } else {
                None
            };
            let report = serde_json::json!({
                "provenance": truth.provenance,
                "labels": truth.len(),
                "threshold": threshold,
                "patience": patience,
                "confusion": c,
                "accuracy": precision_recall_f1(&c),
                "windows_in_series": windows,
                "suggested_sample_size_95_1pct": suggested,
            });
            emit(output_path(cli, o, "report.json"), &json(&report)?)?;
        }
        Command::Synth { spec, o } => {
            let mut spec: SyntheticSpec = serde_json::from_slice(&fs::read(spec)?)?;
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            emit(output_path(cli, o, "commits.log"), generate_history(&spec)?.as_bytes())?;
        }
        Command::Run { manifest } => {
            let mut m = ProjectManifest::load(manifest)?;
            if let Some(dir) = &cli.out_dir {
                m.out_dir = dir.clone();
            }
            let bundle = run_pipeline(&m)?;
            for e in &bundle.metadata.stage_errors {
                eprintln!("mlc: stage {}: {}", e.stage, e.cause);
            }
            println!("wrote {} file(s) to {}", bundle.metadata.outputs.len(), bundle.out_dir.display());
            return Ok(bundle.succeeded());
        }
    }
    Ok(true)
}
