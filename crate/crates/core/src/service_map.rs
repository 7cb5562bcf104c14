//! File-path to microservice resolution.
//!
//! A mapping document holds one rule per line, `pattern => service_id`,
//! evaluated top to bottom; the first matching glob wins. `*` stays within a
//! path component and `**` crosses directories. Lines starting with `#` are
//! comments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use globset::{GlobBuilder, GlobMatcher};
use thiserror::Error;

/// Bucket used by [`service_size`] for paths no rule claims.
pub const UNMAPPED: &str = "__unmapped__";

/// File names that mark a directory as a deployable service.
pub const SERVICE_MARKERS: &[&str] =
    &["Dockerfile", "pom.xml", "build.gradle", "package.json", "go.mod", "Cargo.toml", "requirements.txt"];

const MAX_SERVICE_DEPTH: usize = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    #[error("line {line}: service `{service}` is declared more than once")]
    DuplicateService { line: usize, service: String },
    #[error("line {line}: invalid pattern `{pattern}`: {reason}")]
    Pattern { line: usize, pattern: String, reason: String },
    #[error("line {line}: expected `pattern => service_id`")]
    Syntax { line: usize },
    #[error("mapping document contains no rules")]
    Empty,
    #[error("no service marker files ({}) found at depth <= 2; write a mapping document by hand", SERVICE_MARKERS.join(", "))]
    NothingDetected,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub pattern: String,
    pub service: String,
    matcher: GlobMatcher,
}

impl PartialEq for Rule {
    fn eq(&self, other: &Self) -> bool {
        self.pattern == other.pattern && self.service == other.service
    }
}

impl Eq for Rule {}

/// Ordered path rules plus the set of services they name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceMap {
    rules: Vec<Rule>,
    services: BTreeSet<String>,
    sizes: Option<BTreeMap<String, usize>>,
}

impl ServiceMap {
    /// Builds a map from `(pattern, service)` pairs in priority order.
    pub fn from_rules<I, P, S>(rules: I) -> Result<Self, MapError>
    where
        I: IntoIterator<Item = (P, S)>,
        P: Into<String>,
        S: Into<String>,
    {
        let mut map = ServiceMap { rules: Vec::new(), services: BTreeSet::new(), sizes: None };
        for (i, (pattern, service)) in rules.into_iter().enumerate() {
            map.push_rule(pattern.into(), service.into(), i + 1)?;
        }
        if map.rules.is_empty() {
            return Err(MapError::Empty);
        }
        Ok(map)
    }

    fn push_rule(&mut self, pattern: String, service: String, line: usize) -> Result<(), MapError> {
        if service.is_empty() || service.chars().any(char::is_whitespace) {
            return Err(MapError::Syntax { line });
        }
        if !self.services.insert(service.clone()) {
            return Err(MapError::DuplicateService { line, service });
        }
        let matcher = GlobBuilder::new(&pattern)
            .literal_separator(true)
            .build()
            .map_err(|e| MapError::Pattern { line, pattern: pattern.clone(), reason: e.kind().to_string() })?
            .compile_matcher();
        self.rules.push(Rule { pattern, service, matcher });
        Ok(())
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn services(&self) -> &BTreeSet<String> {
        &self.services
    }

    /// File counts per service, when attached with [`ServiceMap::with_sizes`].
    pub fn sizes(&self) -> Option<&BTreeMap<String, usize>> {
        self.sizes.as_ref()
    }

    /// Attaches per-service file counts measured on `tree`.
    pub fn with_sizes<S: AsRef<str>>(mut self, tree: &[S]) -> Self {
        self.sizes = Some(service_size(&self, tree));
        self
    }

    /// Renders the map back into the mapping document grammar.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            let _ = writeln!(out, "{} => {}", r.pattern, r.service);
        }
        out
    }
}

/// Parses a mapping document.
pub fn load_service_map(document: &str) -> Result<ServiceMap, MapError> {
    let mut map = ServiceMap { rules: Vec::new(), services: BTreeSet::new(), sizes: None };
    for (i, raw) in document.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (pattern, service) = line.split_once("=>").ok_or(MapError::Syntax { line: i + 1 })?;
        let (pattern, service) = (pattern.trim(), service.trim());
        if pattern.is_empty() {
            return Err(MapError::Syntax { line: i + 1 });
        }
        map.push_rule(pattern.to_string(), service.to_string(), i + 1)?;
    }
    if map.rules.is_empty() {
        return Err(MapError::Empty);
    }
    Ok(map)
}

/// Service owning `path`, or `None` when no rule matches.
pub fn resolve_service<'m>(map: &'m ServiceMap, path: &str) -> Option<&'m str> {
    let path = path.strip_prefix("./").unwrap_or(path);
    map.rules.iter().find(|r| r.matcher.is_match(path)).map(|r| r.service.as_str())
}

/// Derives one `<dir>/** => <dir>` rule for every directory at depth 1 or 2
/// holding a marker file. A marked directory nested inside another marked
/// directory is treated as part of the outer service.
pub fn autodetect_services<S: AsRef<str>>(tree: &[S]) -> Result<ServiceMap, MapError> {
    let mut dirs = BTreeSet::new();
    for path in tree {
        let path = path.as_ref().trim().trim_start_matches("./");
        let Some((dir, file)) = path.rsplit_once('/') else { continue };
        if !SERVICE_MARKERS.contains(&file) {
            continue;
        }
        let depth = dir.split('/').filter(|c| !c.is_empty()).count();
        if (1..=MAX_SERVICE_DEPTH).contains(&depth) {
            dirs.insert(dir.to_string());
        }
    }
    let outer: Vec<&String> = dirs
        .iter()
        .filter(|d| !dirs.iter().any(|o| o != *d && d.starts_with(o.as_str()) && d.as_bytes()[o.len()] == b'/'))
        .collect();
    if outer.is_empty() {
        return Err(MapError::NothingDetected);
    }
    ServiceMap::from_rules(outer.into_iter().map(|d| (format!("{d}/**"), d.clone())))
}

/// Number of `tree` paths resolving to each service, with unmatched paths
/// under [`UNMAPPED`]. Every service of the map appears, possibly with 0.
pub fn service_size<S: AsRef<str>>(map: &ServiceMap, tree: &[S]) -> BTreeMap<String, usize> {
    let mut sizes: BTreeMap<String, usize> = map.services.iter().map(|s| (s.clone(), 0)).collect();
    sizes.insert(UNMAPPED.to_string(), 0);
    for path in tree {
        let key = resolve_service(map, path.as_ref()).unwrap_or(UNMAPPED);
        *sizes.get_mut(key).expect("key seeded above") += 1;
    }
    sizes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_two_rules() {
        let m = load_service_map("services/a/** => a\nservices/b/** => b\n").unwrap();
        assert_eq!(m.services().len(), 2);
        assert_eq!(m.rules()[0].service, "a");
    }

    #[test]
    fn duplicate_id_rejected() {
        let err = load_service_map("x/** => a\n# c\ny/** => a\n").unwrap_err();
        assert_eq!(err, MapError::DuplicateService { line: 3, service: "a".into() });
    }

    #[test]
    fn bad_pattern_and_empty() {
        assert!(matches!(load_service_map("src/[a/** => a"), Err(MapError::Pattern { line: 1, .. })));
        assert_eq!(load_service_map("# nothing\n\n"), Err(MapError::Empty));
        assert_eq!(load_service_map("no arrow"), Err(MapError::Syntax { line: 1 }));
    }

    #[test]
    fn resolution() {
        let m = load_service_map("services/a/api/** => a-api\nservices/a/** => a\n").unwrap();
        assert_eq!(resolve_service(&m, "services/a/src/Main.java"), Some("a"));
        assert_eq!(resolve_service(&m, "services/a/api/x"), Some("a-api"));
        assert_eq!(resolve_service(&m, "README.md"), None);
        assert_eq!(resolve_service(&m, "services/ab/x"), None);
    }

    #[test]
    fn single_star_stays_in_component() {
        let m = load_service_map("svc/*.yml => cfg\n").unwrap();
        assert_eq!(resolve_service(&m, "svc/app.yml"), Some("cfg"));
        assert_eq!(resolve_service(&m, "svc/deep/app.yml"), None);
    }

    #[test]
    fn autodetect_two_services() {
        let tree = ["svc-a/Dockerfile", "svc-a/src/main.go", "svc-b/Dockerfile", "README.md"];
        let m = autodetect_services(&tree).unwrap();
        assert_eq!(m.to_document(), "svc-a/** => svc-a\nsvc-b/** => svc-b\n");
    }

    #[test]
    fn autodetect_nothing() {
        assert_eq!(autodetect_services(&["README.md", "src/main.rs"]), Err(MapError::NothingDetected));
        // root-level and too-deep markers do not count
        assert_eq!(autodetect_services(&["Dockerfile", "a/b/c/pom.xml"]), Err(MapError::NothingDetected));
    }

    #[test]
    fn autodetect_nested_folds_into_outer() {
        let tree = ["orders/pom.xml", "orders/core/pom.xml", "services/pay/go.mod"];
        let m = autodetect_services(&tree).unwrap();
        let ids: Vec<_> = m.services().iter().cloned().collect();
        assert_eq!(ids, vec!["orders", "services/pay"]);
    }

    #[test]
    fn sizes_with_unmapped() {
        let m = load_service_map("svc-a/** => a\n").unwrap();
        let sizes = service_size(&m, &["svc-a/1", "svc-a/2", "svc-a/3", "docs/x"]);
        assert_eq!(sizes["a"], 3);
        assert_eq!(sizes[UNMAPPED], 1);
        let empty: [&str; 0] = [];
        let sizes = service_size(&m, &empty);
        assert!(sizes.values().all(|v| *v == 0));
        assert_eq!(sizes.len(), 2);
    }

    #[test]
    fn document_round_trip() {
        let doc = "services/a/api/** => a-api\nservices/a/** => a\n";
        assert_eq!(load_service_map(doc).unwrap().to_document(), doc);
    }
}
