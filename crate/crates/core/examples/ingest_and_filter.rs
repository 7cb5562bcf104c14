//! Parses an exported history, classifies commit intent and applies filters.
//!
//! `cargo run --example ingest_and_filter [path/to/git/repo]` exports the
//! given repository instead of reading the bundled fixture.

use mlc::ingest::{
    classify_commit_scope, commit_size, export_git_log, filter_commits, parse_commit_log_str, CommitFilter, CommitScope,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = match std::env::args().nth(1) {
        Some(repo) => export_git_log(std::path::Path::new(&repo))?,
        None => std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/mixed_scopes.log"))?,
    };
    let log = parse_commit_log_str(&text)?;
    println!("{} commits ({} skipped for non-UTF-8 paths)\n", log.commits.len(), log.skipped_non_utf8);

    for c in log.commits.iter().take(20) {
        let size = commit_size(c);
        let flags = match (c.is_merge, c.is_bot()) {
            (true, _) => " merge",
            (_, true) => " bot",
            _ => "",
        };
        println!(
            "{:.8} {} {:<12} files={:<2} churn={:<4}{flags} {}",
            c.id,
            c.utc_date(),
            format!("{:?}", classify_commit_scope(&c.message)),
            size.files_changed,
            size.lines_churned,
            c.message.lines().next().unwrap_or("")
        );
    }

    let filters = [
        ("defaults (no merges, no bots)", CommitFilter::default()),
        (
            "no refactorings",
            CommitFilter { excluded_scopes: [CommitScope::Refactoring].into(), ..CommitFilter::none() },
        ),
        ("at most 1 file", CommitFilter { max_files: Some(1), ..CommitFilter::none() }),
        ("at most 20 churned lines", CommitFilter { max_churn: Some(20), ..CommitFilter::none() }),
    ];
    println!();
    for (name, f) in filters {
        let kept = filter_commits(&log.commits, &f);
        println!("{name:<30} keeps {} of {}", kept.len(), log.commits.len());
    }
    Ok(())
}
