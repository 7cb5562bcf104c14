use mlc::activity::{build_calendar, relevant_days};
use mlc::coupling::{coupling_series, Rational, WindowConfig};
use mlc::service_map::load_service_map;
use mlc::synth::{
    generate_commits, generate_history, service_name, synthetic_map_document, CouplingEpisode, SyntheticSpec,
};
use mlc::validation::{conditional_truth_check, next_update_outcomes};

fn episode(p: f64, days: usize) -> CouplingEpisode {
    CouplingEpisode { mu: service_name(0), nu: service_name(1), start_day: 1, end_day: days, co_update_probability: p }
}

fn two_services(days: usize, mu_rate: f64, nu_rate: f64, p: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        services: 2,
        days,
        base_rate: mu_rate,
        rate_overrides: [(service_name(1), nu_rate)].into(),
        episodes: if p > 0.0 { vec![episode(p, days)] } else { Vec::new() },
        seed,
        ..Default::default()
    }
}

fn pair_sequence(spec: &SyntheticSpec) -> mlc::activity::PairDaySequence {
    let map = load_service_map(&synthetic_map_document(spec.services)).unwrap();
    let cal = build_calendar(&generate_commits(spec).unwrap(), &map);
    relevant_days(&cal, &service_name(0), &service_name(1)).unwrap()
}

#[test]
fn certain_co_update_gives_full_coupling() {
    // nu never commits alone, so every relevant day is a shared one
    let seq = pair_sequence(&two_services(300, 0.4, 0.0, 1.0, 5));
    let s = coupling_series(&seq, WindowConfig::new(10).unwrap());
    assert!(s.points.len() > 50);
    assert!(s.points.iter().all(|p| p.coupling == Rational::from_integer(1)));
}

#[test]
fn independent_services_match_binomial_bounds() {
    let (rm, rn) = (0.4, 0.3);
    let days = 3000;
    let seq = pair_sequence(&two_services(days, rm, rn, 0.0, 99));
    let n = 10;
    let s = coupling_series(&seq, WindowConfig::new(n).unwrap());
    assert!(s.points.len() >= 500, "{} windows", s.points.len());

    // per calendar day, both services update with the product of their rates
    let co = seq.entries.iter().filter(|e| e.both()).count() as f64;
    let product = rm * rn;
    let sigma = (product * (1.0 - product) / days as f64).sqrt();
    assert!((co / days as f64 - product).abs() <= 3.0 * sigma, "{} vs {product}", co / days as f64);

    // a window counts relevant days, so its expectation is conditioned on relevance
    let q = product / (rm + rn - product);
    let blocks: Vec<f64> = s.points.iter().step_by(n).map(|p| p.co_days as f64).collect();
    let trials = (blocks.len() * n) as f64;
    let mean = blocks.iter().sum::<f64>() / trials;
    let sigma = (q * (1.0 - q) / trials).sqrt();
    assert!((mean - q).abs() <= 3.0 * sigma, "{mean} vs {q} (sigma {sigma})");
}

#[test]
fn planted_conditional_rate_is_calibrated() {
    let seq = pair_sequence(&two_services(8000, 0.5, 0.0, 0.7, 17));
    let s = coupling_series(&seq, WindowConfig::new(20).unwrap());
    let obs = next_update_outcomes(&seq, &s);
    let table = conditional_truth_check(&obs).unwrap();
    let bucket = table.bucket_for(Rational::new(7, 10));
    assert!(bucket.count >= 1000, "{} observations", bucket.count);
    let f = bucket.frequency.unwrap();
    assert!((f - 0.7).abs() <= 0.05, "frequency {f}");
}

#[test]
fn seeds_separate_histories() {
    let a = SyntheticSpec { seed: 1, ..Default::default() };
    let b = SyntheticSpec { seed: 2, ..Default::default() };
    assert_eq!(generate_history(&a).unwrap(), generate_history(&a.clone()).unwrap());
    assert_ne!(generate_history(&a).unwrap(), generate_history(&b).unwrap());
}
