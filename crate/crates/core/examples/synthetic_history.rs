//! Generates a seeded synthetic history in the export format.
//!
//! `cargo run --example synthetic_history -- out.log` writes the history to
//! a file that the `mlc` binary can consume together with the printed map.

use std::collections::BTreeMap;

use mlc::ingest::commit_size;
use mlc::synth::{
    generate_commits, generate_history, service_name, synthetic_map_document, CouplingEpisode, SyntheticSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticSpec {
        services: 4,
        days: 120,
        base_rate: 0.25,
        rate_overrides: [(service_name(3), 0.05)].into(),
        episodes: vec![CouplingEpisode {
            mu: service_name(0),
            nu: service_name(1),
            start_day: 30,
            end_day: 90,
            co_update_probability: 0.9,
        }],
        seed: 1,
        ..Default::default()
    };
    let commits = generate_commits(&spec)?;
    let mut per_service: BTreeMap<String, usize> = BTreeMap::new();
    for c in &commits {
        let mut touched: Vec<&str> = c.files.iter().filter_map(|f| f.split('/').next()).collect();
        touched.dedup();
        for s in touched {
            *per_service.entry(s.to_string()).or_default() += 1;
        }
    }
    let churn: u64 = commits.iter().map(|c| commit_size(c).lines_churned).sum();
    println!("{} commits over {} days, {churn} churned lines", commits.len(), spec.days);
    for (s, n) in &per_service {
        println!("  {s}: touched by {n} commits");
    }
    println!("\nmap:\n{}", synthetic_map_document(spec.services));

    let text = generate_history(&spec)?;
    assert_eq!(text, generate_history(&spec)?, "same seed, same bytes");
    match std::env::args().nth(1) {
        Some(path) => {
            std::fs::write(&path, &text)?;
            println!("wrote {path}");
        }
        None => println!("first record:\n{}", text.split_inclusive('\n').take(5).collect::<String>()),
    }
    Ok(())
}
