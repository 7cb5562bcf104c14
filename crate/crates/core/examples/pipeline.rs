//! Runs the whole pipeline from a project manifest and lists the bundle.
//!
//! Defaults to the bundled three-service fixture; pass a manifest path to run
//! your own project. Output goes to a fresh directory under the system temp dir.

use std::path::PathBuf;

use mlc::pipeline::{run_pipeline, ProjectManifest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manifest = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/three_services.toml")));
    let mut m = ProjectManifest::load(&manifest)?;
    m.out_dir = std::env::temp_dir().join(format!("mlc-example-{}", std::process::id()));

    let bundle = run_pipeline(&m)?;
    let meta = &bundle.metadata;
    println!(
        "{} commits parsed, {} kept, {} active days, {} pairs",
        meta.commits_parsed, meta.commits_after_filter, meta.active_days, meta.pairs
    );
    for d in &meta.diagnostics {
        println!("note: {d}");
    }
    for e in &meta.stage_errors {
        println!("stage {} failed: {}", e.stage, e.cause);
    }
    println!("\n{}:", bundle.out_dir.display());
    for name in &meta.outputs {
        println!("  {name}");
    }
    println!("\nseries.csv:\n{}", std::fs::read_to_string(bundle.out_dir.join("series.csv"))?);
    Ok(())
}
