//! Directional coupling: a service that always drags another along.
//!
//! `svc-01` only ever changes inside `svc-00`'s commits (70% of them), so
//! P(svc-01 | svc-00) hovers near 0.7 while P(svc-00 | svc-01) stays at 1.
//! The calibration table checks the first reading against what happened
//! on the next `svc-00` update after each window.

use mlc::activity::{build_calendar, relevant_days};
use mlc::coupling::{coupling_series, to_f64, WindowConfig};
use mlc::service_map::load_service_map;
use mlc::synth::{generate_commits, service_name, synthetic_map_document, CouplingEpisode, SyntheticSpec};
use mlc::validation::{conditional_truth_check, next_update_outcomes};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (mu, nu) = (service_name(0), service_name(1));
    let spec = SyntheticSpec {
        services: 2,
        days: 4000,
        base_rate: 0.5,
        rate_overrides: [(nu.clone(), 0.0)].into(),
        episodes: vec![CouplingEpisode {
            mu: mu.clone(),
            nu: nu.clone(),
            start_day: 1,
            end_day: 4000,
            co_update_probability: 0.7,
        }],
        seed: 7,
        ..Default::default()
    };
    let map = load_service_map(&synthetic_map_document(2))?;
    let cal = build_calendar(&generate_commits(&spec)?, &map);
    let seq = relevant_days(&cal, &mu, &nu)?;
    let series = coupling_series(&seq, WindowConfig::new(20).unwrap());

    let mean = |f: &dyn Fn(&mlc::coupling::WindowPoint) -> Option<mlc::Rational>| {
        let v: Vec<f64> = series.points.iter().filter_map(f).map(to_f64).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    println!("{} windows of 20 relevant days", series.points.len());
    println!("mean coupling        {:.3}", mean(&|p| Some(p.coupling)));
    println!("mean P({nu} | {mu}) {:.3}", mean(&|p| p.p_nu_given_mu));
    println!("mean P({mu} | {nu}) {:.3}", mean(&|p| p.p_mu_given_nu));

    let table = conditional_truth_check(&next_update_outcomes(&seq, &series))?;
    println!("\n{:<12} {:>6} {:>10} {:>10}", "bucket", "count", "predicted", "observed");
    for b in table.buckets.iter().filter(|b| b.count > 0) {
        println!(
            "[{:.1}, {:.1}) {:>6} {:>10.3} {:>10.3}",
            b.lower,
            b.upper,
            b.count,
            b.mean_prediction.unwrap_or(f64::NAN),
            b.frequency.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
