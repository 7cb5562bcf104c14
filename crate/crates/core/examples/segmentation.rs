//! Splits a coupling series into growing, stable and decreasing periods.
//!
//! A pair is coupled only between days 150 and 350 of a 500-day history;
//! segmentation of its n = 30 series should recover the rise and the fall.

use mlc::activity::{build_calendar, relevant_days};
use mlc::analysis::{segment_series, SegmentParams};
use mlc::coupling::{coupling_series, WindowConfig};
use mlc::service_map::load_service_map;
use mlc::synth::{generate_commits, service_name, synthetic_map_document, CouplingEpisode, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SyntheticSpec {
        services: 2,
        days: 500,
        base_rate: 0.4,
        episodes: vec![CouplingEpisode {
            mu: service_name(0),
            nu: service_name(1),
            start_day: 150,
            end_day: 350,
            co_update_probability: 0.95,
        }],
        seed: 3,
        ..Default::default()
    };
    let map = load_service_map(&synthetic_map_document(2))?;
    let cal = build_calendar(&generate_commits(&spec)?, &map);
    let seq = relevant_days(&cal, &service_name(0), &service_name(1))?;
    let series = coupling_series(&seq, WindowConfig::new(30).unwrap());
    let values = series.coupling_f64();

    let params = SegmentParams { max_sse: 0.15, min_len: 10, ..Default::default() };
    let segments = segment_series(&values, params)?;
    println!("{} windows, {} segments\n", values.len(), segments.len());
    println!("{:<23} {:>10} {:>9} {:>8}  trend", "window ends", "points", "slope", "sse");
    for s in &segments {
        let from = series.points[s.start_idx - 1].end_date;
        let to = series.points[s.end_idx - 1].end_date;
        println!("{from} .. {to} {:>10} {:>9.4} {:>8.4}  {:?}", s.len(), s.slope, s.sse, s.label);
    }
    Ok(())
}
