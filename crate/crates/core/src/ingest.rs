//! Commit history ingestion.
//!
//! Histories enter the library through a small line-oriented export format so
//! that nothing downstream depends on a version-control binary:
//!
//! ```text
//! \x01COMMIT
//! <id>|<rfc3339 timestamp>|<author>|<message>
//! M                              (optional merge marker)
//! <added>\t<deleted>\t<path>     (numstat line, `-` for binary counts)
//! <path>                         (bare path, no churn information)
//! ```
//!
//! Header fields escape `\`, `|`, newlines and carriage returns with a
//! backslash (`\\`, `\|`, `\n`, `\r`). [`export_git_log`] produces the format
//! from a local repository through the system `git` executable.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;
use std::process::Command;

use chrono::{DateTime, FixedOffset, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Line that opens every record of the export format.
pub const RECORD_SEPARATOR: &str = "\x01COMMIT";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("git exited with {status}: {stderr}")]
    Git { status: String, stderr: String },
}

/// Lines added and deleted by a commit, summed over its files.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Churn {
    pub added: u64,
    pub deleted: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub id: String,
    pub timestamp: DateTime<FixedOffset>,
    pub author: String,
    pub message: String,
    /// Repository-relative paths, de-duplicated, in first-seen order.
    pub files: Vec<String>,
    pub churn: Option<Churn>,
    pub is_merge: bool,
}

impl CommitRecord {
    /// Calendar date of the commit in UTC.
    pub fn utc_date(&self) -> NaiveDate {
        self.timestamp.with_timezone(&Utc).date_naive()
    }

    pub fn is_bot(&self) -> bool {
        self.author.trim_end().ends_with("[bot]")
    }
}

/// Result of parsing an export stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedLog {
    pub commits: Vec<CommitRecord>,
    /// Records dropped because one of their paths was not valid UTF-8.
    pub skipped_non_utf8: usize,
}

/// Parses a stream in the export format.
///
/// Records keep stream order. A record containing a non-UTF-8 path is
/// skipped and counted in [`ParsedLog::skipped_non_utf8`]; a malformed
/// header or numstat line is an error carrying its 1-based line number.
pub fn parse_commit_log<R: BufRead>(mut reader: R) -> Result<ParsedLog, IngestError> {
    let mut out = ParsedLog::default();
    let mut current: Option<PendingRecord> = None;
    let mut buf = Vec::new();
    let mut line_no = 0usize;

    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let mut raw: &[u8] = &buf;
        if let Some(stripped) = raw.strip_suffix(b"\n") {
            raw = stripped;
        }
        if let Some(stripped) = raw.strip_suffix(b"\r") {
            raw = stripped;
        }

        if raw == RECORD_SEPARATOR.as_bytes() {
            if let Some(rec) = current.take() {
                rec.finish(&mut out);
            }
            current = Some(PendingRecord::default());
            continue;
        }
        if raw.is_empty() {
            continue;
        }
        let Some(rec) = current.as_mut() else {
            return Err(malformed(line_no, "content before the first record separator"));
        };

        if rec.header.is_none() {
            let text = std::str::from_utf8(raw).map_err(|_| malformed(line_no, "header is not valid UTF-8"))?;
            rec.header = Some(parse_header(text, line_no)?);
            continue;
        }
        if raw == b"M" && rec.files.is_empty() && !rec.is_merge {
            rec.is_merge = true;
            continue;
        }
        rec.push_file_line(raw, line_no)?;
    }
    if let Some(rec) = current.take() {
        rec.finish(&mut out);
    }
    Ok(out)
}

/// Convenience wrapper over [`parse_commit_log`] for in-memory text.
pub fn parse_commit_log_str(text: &str) -> Result<ParsedLog, IngestError> {
    parse_commit_log(text.as_bytes())
}

/// Serializes commits back into the export format.
///
/// When a record carries churn, the whole amount is attributed to its first
/// file and the remaining files get `0\t0`, so re-parsing yields the same
/// aggregate counts.
pub fn write_commit_log(commits: &[CommitRecord]) -> String {
    let mut out = String::new();
    for c in commits {
        out.push_str(RECORD_SEPARATOR);
        out.push('\n');
        let _ = writeln!(
            out,
            "{}|{}|{}|{}",
            escape_field(&c.id),
            c.timestamp.to_rfc3339(),
            escape_field(&c.author),
            escape_field(&c.message)
        );
        if c.is_merge {
            out.push_str("M\n");
        }
        for (i, path) in c.files.iter().enumerate() {
            match c.churn {
                Some(churn) if i == 0 => {
                    let _ = writeln!(out, "{}\t{}\t{}", churn.added, churn.deleted, path);
                }
                Some(_) => {
                    let _ = writeln!(out, "0\t0\t{path}");
                }
                None => {
                    out.push_str(path);
                    out.push('\n');
                }
            }
        }
    }
    out
}

#[derive(Default)]
struct PendingRecord {
    header: Option<Header>,
    is_merge: bool,
    files: Vec<String>,
    seen: BTreeSet<String>,
    churn: Option<Churn>,
    non_utf8: bool,
}

struct Header {
    id: String,
    timestamp: DateTime<FixedOffset>,
    author: String,
    message: String,
}

impl PendingRecord {
    fn push_file_line(&mut self, raw: &[u8], line_no: usize) -> Result<(), IngestError> {
        let fields: Vec<&[u8]> = raw.splitn(3, |b| *b == b'\t').collect();
        let path_bytes = if fields.len() == 3 {
            let added = parse_count(fields[0], line_no)?;
            let deleted = parse_count(fields[1], line_no)?;
            let churn = self.churn.get_or_insert_with(Churn::default);
            churn.added += added;
            churn.deleted += deleted;
            fields[2]
        } else if fields.len() == 1 {
            raw
        } else {
            return Err(malformed(line_no, "expected `added<TAB>deleted<TAB>path` or a bare path"));
        };
        if path_bytes.is_empty() {
            return Err(malformed(line_no, "empty path"));
        }
        match std::str::from_utf8(path_bytes) {
            Ok(path) => {
                if self.seen.insert(path.to_string()) {
                    self.files.push(path.to_string());
                }
            }
            Err(_) => self.non_utf8 = true,
        }
        Ok(())
    }

    fn finish(self, out: &mut ParsedLog) {
        // A separator with no header is an empty record; nothing to emit.
        let Some(h) = self.header else { return };
        if self.non_utf8 {
            out.skipped_non_utf8 += 1;
            return;
        }
        out.commits.push(CommitRecord {
            id: h.id,
            timestamp: h.timestamp,
            author: h.author,
            message: h.message,
            files: self.files,
            churn: self.churn,
            is_merge: self.is_merge,
        });
    }
}

fn malformed(line: usize, reason: &str) -> IngestError {
    IngestError::Malformed { line, reason: reason.to_string() }
}

fn parse_count(field: &[u8], line_no: usize) -> Result<u64, IngestError> {
    if field == b"-" {
        return Ok(0);
    }
    std::str::from_utf8(field)
        .ok()
        .and_then(|s| s.parse::<u64>().ok())
        .ok_or_else(|| malformed(line_no, "numstat count is not a non-negative integer or `-`"))
}

fn parse_header(text: &str, line_no: usize) -> Result<Header, IngestError> {
    let fields = split_escaped(text);
    if fields.len() != 4 {
        return Err(malformed(line_no, &format!("header has {} `|`-separated fields, expected 4", fields.len())));
    }
    let mut it = fields.into_iter();
    let id = it.next().unwrap_or_default();
    let ts = it.next().unwrap_or_default();
    let author = it.next().unwrap_or_default();
    let message = it.next().unwrap_or_default();
    if id.is_empty() {
        return Err(malformed(line_no, "empty commit id"));
    }
    let timestamp = DateTime::parse_from_rfc3339(ts.trim())
        .map_err(|e| malformed(line_no, &format!("bad timestamp `{ts}`: {e}")))?;
    Ok(Header { id, timestamp, author, message })
}

fn split_escaped(text: &str) -> Vec<String> {
    let mut fields = vec![String::new()];
    let mut chars = text.chars();
    while let Some(ch) = chars.next() {
        let field = fields.last_mut().expect("non-empty");
        match ch {
            '\\' => match chars.next() {
                Some('n') => field.push('\n'),
                Some('r') => field.push('\r'),
                Some(other) => field.push(other),
                None => field.push('\\'),
            },
            '|' => fields.push(String::new()),
            _ => field.push(ch),
        }
    }
    fields
}

fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '|' => out.push_str("\\|"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(ch),
        }
    }
    out
}

/// Coarse intent of a commit, inferred from its message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CommitScope {
    Refactoring,
    BugFix,
    Improvement,
    NewFeature,
    Other,
}

impl CommitScope {
    pub const ALL: [CommitScope; 5] = [
        CommitScope::Refactoring,
        CommitScope::BugFix,
        CommitScope::Improvement,
        CommitScope::NewFeature,
        CommitScope::Other,
    ];
}

impl std::str::FromStr for CommitScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "refactoring" | "refactor" => Ok(CommitScope::Refactoring),
            "bugfix" | "fix" => Ok(CommitScope::BugFix),
            "improvement" => Ok(CommitScope::Improvement),
            "newfeature" | "feature" => Ok(CommitScope::NewFeature),
            "other" => Ok(CommitScope::Other),
            _ => Err(format!("unknown commit scope `{s}`")),
        }
    }
}

/// Ordered keyword table; the first class with a keyword contained in the
/// lowercased message wins. Note that `NewFeature` is checked before
/// `Improvement`.
const SCOPE_RULES: &[(CommitScope, &[&str])] = &[
    (CommitScope::Refactoring, &["refactor", "restructur", "rename", "cleanup", "clean up"]),
    (CommitScope::BugFix, &["fix", "bug", "hotfix", "patch", "defect"]),
    (CommitScope::NewFeature, &["feat", "add ", "introduc", "implement"]),
    (CommitScope::Improvement, &["improv", "perf", "optimiz", "enhanc", "upgrade", "update"]),
];

pub fn classify_commit_scope(message: &str) -> CommitScope {
    let lower = message.to_lowercase();
    SCOPE_RULES
        .iter()
        .find(|(_, keywords)| keywords.iter().any(|k| lower.contains(k)))
        .map(|(scope, _)| *scope)
        .unwrap_or(CommitScope::Other)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitSize {
    pub files_changed: u64,
    pub lines_churned: u64,
}

pub fn commit_size(c: &CommitRecord) -> CommitSize {
    let lines_churned = c.churn.map(|ch| ch.added + ch.deleted).unwrap_or(0);
    CommitSize { files_changed: c.files.len() as u64, lines_churned }
}

/// Criteria for dropping commits before any coupling is computed.
///
/// [`CommitFilter::default`] excludes merges and bot authors; use
/// [`CommitFilter::none`] for a filter that keeps everything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommitFilter {
    pub exclude_merges: bool,
    pub exclude_bots: bool,
    pub max_files: Option<u64>,
    pub max_churn: Option<u64>,
    pub excluded_scopes: BTreeSet<CommitScope>,
}

impl Default for CommitFilter {
    fn default() -> Self {
        CommitFilter {
            exclude_merges: true,
            exclude_bots: true,
            max_files: None,
            max_churn: None,
            excluded_scopes: BTreeSet::new(),
        }
    }
}

impl CommitFilter {
    pub fn none() -> Self {
        CommitFilter {
            exclude_merges: false,
            exclude_bots: false,
            max_files: None,
            max_churn: None,
            excluded_scopes: BTreeSet::new(),
        }
    }

    /// Checks the positivity constraints on the size limits.
    pub fn validate(&self) -> Result<(), String> {
        if self.max_files == Some(0) {
            return Err("max_files must be positive".into());
        }
        if self.max_churn == Some(0) {
            return Err("max_churn must be positive".into());
        }
        Ok(())
    }

    pub fn accepts(&self, c: &CommitRecord) -> bool {
        if self.exclude_merges && c.is_merge {
            return false;
        }
        if self.exclude_bots && c.is_bot() {
            return false;
        }
        let size = commit_size(c);
        if self.max_files.is_some_and(|max| size.files_changed > max) {
            return false;
        }
        if self.max_churn.is_some_and(|max| size.lines_churned > max) {
            return false;
        }
        if !self.excluded_scopes.is_empty() && self.excluded_scopes.contains(&classify_commit_scope(&c.message)) {
            return false;
        }
        true
    }
}

pub fn filter_commits(commits: &[CommitRecord], filter: &CommitFilter) -> Vec<CommitRecord> {
    commits.iter().filter(|c| filter.accepts(c)).cloned().collect()
}

const GIT_FIELD_SEP: char = '\x1f';
const GIT_HEADER_END: char = '\x1e';

/// Runs `git log` in `repo` and converts its output into the export format.
///
/// The invocation is roughly
/// `git -c core.quotepath=off log --no-renames --numstat --format=...`
/// with committer timestamps (`%cI`), author names and full messages.
pub fn export_git_log(repo: &Path) -> Result<String, IngestError> {
    let format = format!(
        "--format={RECORD_SEPARATOR}%n%H{GIT_FIELD_SEP}%cI{GIT_FIELD_SEP}%an{GIT_FIELD_SEP}%P{GIT_FIELD_SEP}%B{GIT_HEADER_END}"
    );
    let output = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(["-c", "core.quotepath=off", "log", "--no-renames", "--numstat", "--reverse"])
        .arg(format)
        .output()?;
    if !output.status.success() {
        return Err(IngestError::Git {
            status: output.status.to_string(),
            stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
        });
    }
    Ok(convert_git_output(&String::from_utf8_lossy(&output.stdout)))
}

/// Lists tracked files of `repo` at `HEAD`, one path per entry.
pub fn list_git_tree(repo: &Path) -> Result<Vec<String>, IngestError> {
    let output = Command::new("git").arg("-C").arg(repo).args(["-c", "core.quotepath=off", "ls-files"]).output()?;
    if !output.status.success() {
        return Err(IngestError::Git {
            status: output.status.to_string(),
            stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
        });
    }
    Ok(String::from_utf8_lossy(&output.stdout).lines().filter(|l| !l.is_empty()).map(str::to_string).collect())
}

fn convert_git_output(raw: &str) -> String {
    let mut commits = Vec::new();
    for chunk in raw.split(RECORD_SEPARATOR).skip(1) {
        let chunk = chunk.strip_prefix('\n').unwrap_or(chunk);
        let Some((header, rest)) = chunk.split_once(GIT_HEADER_END) else { continue };
        let fields: Vec<&str> = header.splitn(5, GIT_FIELD_SEP).collect();
        if fields.len() != 5 {
            continue;
        }
        let Ok(timestamp) = DateTime::parse_from_rfc3339(fields[1]) else { continue };
        let mut files = Vec::new();
        let mut churn = None;
        for line in rest.lines().filter(|l| !l.trim().is_empty()) {
            let parts: Vec<&str> = line.splitn(3, '\t').collect();
            if parts.len() != 3 {
                continue;
            }
            let c: &mut Churn = churn.get_or_insert_with(Churn::default);
            c.added += parts[0].parse::<u64>().unwrap_or(0);
            c.deleted += parts[1].parse::<u64>().unwrap_or(0);
            if !files.iter().any(|f| f == parts[2]) {
                files.push(parts[2].to_string());
            }
        }
        commits.push(CommitRecord {
            id: fields[0].to_string(),
            timestamp,
            author: fields[2].to_string(),
            message: fields[4].trim_end().to_string(),
            files,
            churn,
            is_merge: fields[3].split_whitespace().count() > 1,
        });
    }
    write_commit_log(&commits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(files: &[&str], churn: Option<(u64, u64)>) -> CommitRecord {
        CommitRecord {
            id: "c".into(),
            timestamp: DateTime::parse_from_rfc3339("2023-05-03T10:00:00+00:00").unwrap(),
            author: "ada".into(),
            message: "msg".into(),
            files: files.iter().map(|s| s.to_string()).collect(),
            churn: churn.map(|(added, deleted)| Churn { added, deleted }),
            is_merge: false,
        }
    }

    #[test]
    fn parses_single_record() {
        let text = "\x01COMMIT\nc0ffee|2023-05-03T10:00:00+00:00|ada|fix: npe\nsvc-a/x.java\n";
        let log = parse_commit_log_str(text).unwrap();
        assert_eq!(log.commits.len(), 1);
        let c = &log.commits[0];
        assert_eq!(c.id, "c0ffee");
        assert_eq!(c.message, "fix: npe");
        assert_eq!(c.author, "ada");
        assert_eq!(c.files, vec!["svc-a/x.java"]);
        assert_eq!(c.churn, None);
        assert!(!c.is_merge);
    }

    #[test]
    fn empty_stream_is_empty_list() {
        assert!(parse_commit_log_str("").unwrap().commits.is_empty());
    }

    #[test]
    fn numstat_churn_and_dedup() {
        let text = "\x01COMMIT\na|2023-05-03T10:00:00+02:00|ada|m\nM\n3\t1\tx\n-\t-\tbin.png\n2\t2\tx\n";
        let c = &parse_commit_log_str(text).unwrap().commits[0];
        assert!(c.is_merge);
        assert_eq!(c.files, vec!["x", "bin.png"]);
        assert_eq!(c.churn, Some(Churn { added: 5, deleted: 3 }));
    }

    #[test]
    fn escaped_pipes_and_newlines() {
        let text = "\x01COMMIT\na|2023-05-03T10:00:00Z|ada|fix a\\|b\\nsecond line\n";
        let c = &parse_commit_log_str(text).unwrap().commits[0];
        assert_eq!(c.message, "fix a|b\nsecond line");
    }

    #[test]
    fn malformed_header_reports_line() {
        let text = "\x01COMMIT\nonly|two\n";
        match parse_commit_log_str(text) {
            Err(IngestError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let text = "\x01COMMIT\na|2023-05-03T10:00:00Z|x|y\n\x01COMMIT\na|yesterday|x|y\n";
        match parse_commit_log_str(text) {
            Err(IngestError::Malformed { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_numstat_is_error() {
        let text = "\x01COMMIT\na|2023-05-03T10:00:00Z|x|y\nabc\t1\tpath\n";
        assert!(matches!(parse_commit_log_str(text), Err(IngestError::Malformed { line: 3, .. })));
    }

    #[test]
    fn non_utf8_path_skips_record() {
        let mut bytes = b"\x01COMMIT\na|2023-05-03T10:00:00Z|x|y\n1\t1\tok\n1\t1\tbad\xff\n".to_vec();
        bytes.extend_from_slice(b"\x01COMMIT\nb|2023-05-04T10:00:00Z|x|y\nfine\n");
        let log = parse_commit_log(&bytes[..]).unwrap();
        assert_eq!(log.skipped_non_utf8, 1);
        assert_eq!(log.commits.len(), 1);
        assert_eq!(log.commits[0].id, "b");
    }

    #[test]
    fn utc_date_crosses_midnight() {
        let text = "\x01COMMIT\na|2023-05-04T01:30:00+03:00|x|y\n";
        let c = &parse_commit_log_str(text).unwrap().commits[0];
        assert_eq!(c.utc_date(), NaiveDate::from_ymd_opt(2023, 5, 3).unwrap());
    }

    #[test]
    fn scope_table() {
        assert_eq!(classify_commit_scope("refactor: extract payment module"), CommitScope::Refactoring);
        assert_eq!(classify_commit_scope("fix crash on empty cart"), CommitScope::BugFix);
        assert_eq!(classify_commit_scope(""), CommitScope::Other);
        assert_eq!(classify_commit_scope("feat: add login"), CommitScope::NewFeature);
        assert_eq!(classify_commit_scope("Improve caching"), CommitScope::Improvement);
        assert_eq!(classify_commit_scope("update deps"), CommitScope::Improvement);
        // first rule wins: "Rename" beats "fix"
        assert_eq!(classify_commit_scope("Rename fixture helpers"), CommitScope::Refactoring);
        assert_eq!(classify_commit_scope("docs"), CommitScope::Other);
    }

    #[test]
    fn sizes() {
        let c = record(&["a", "b", "c"], Some((10, 5)));
        assert_eq!(commit_size(&c), CommitSize { files_changed: 3, lines_churned: 15 });
        let c = record(&[], None);
        assert_eq!(commit_size(&c), CommitSize { files_changed: 0, lines_churned: 0 });
    }

    #[test]
    fn filters() {
        let mut commits: Vec<_> = (0..5).map(|_| record(&["a"], None)).collect();
        commits[2].is_merge = true;
        let f = CommitFilter { exclude_merges: true, ..CommitFilter::none() };
        assert_eq!(filter_commits(&commits, &f).len(), 4);

        let big = record(&["a", "b", "c", "d", "e"], None);
        let f = CommitFilter { max_files: Some(4), ..CommitFilter::none() };
        assert!(!f.accepts(&big));

        let mut bot = record(&["a"], None);
        bot.author = "dependabot[bot]".into();
        assert!(!CommitFilter::default().accepts(&bot));
        assert!(CommitFilter::none().accepts(&bot));

        let churny = record(&["a"], Some((100, 1)));
        let f = CommitFilter { max_churn: Some(100), ..CommitFilter::none() };
        assert!(!f.accepts(&churny));
    }

    #[test]
    fn filter_validation() {
        let f = CommitFilter { max_files: Some(0), ..CommitFilter::none() };
        assert!(f.validate().is_err());
        assert!(CommitFilter::default().validate().is_ok());
    }

    #[test]
    fn git_output_conversion() {
        let raw = format!(
            "{RECORD_SEPARATOR}\nabc\x1f2023-05-03T10:00:00+02:00\x1fada\x1fp1 p2\x1fMerge x|y\n\nbody\n\x1e\n\n\
             {RECORD_SEPARATOR}\ndef\x1f2023-05-04T10:00:00+00:00\x1fbob\x1fabc\x1ffix\n\x1e\n\n4\t0\tsvc/a.rs\n-\t-\timg.png\n"
        );
        let log = parse_commit_log_str(&convert_git_output(&raw)).unwrap();
        assert_eq!(log.commits.len(), 2);
        assert!(log.commits[0].is_merge);
        assert_eq!(log.commits[0].message, "Merge x|y\n\nbody");
        assert_eq!(log.commits[1].files, vec!["svc/a.rs", "img.png"]);
        assert_eq!(log.commits[1].churn, Some(Churn { added: 4, deleted: 0 }));
    }
}
