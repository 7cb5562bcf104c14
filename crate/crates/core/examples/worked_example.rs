//! The three-service history from the method description, end to end:
//! relevant days, sliding windows, conditionals, states and the baseline.

use mlc::coupling::{
    baseline_coupled, coupling_series, format_decimal, historical_cochange, state_timeline, Threshold, WindowConfig,
    BASELINE_LIMIT,
};
use mlc::PairDaySequence;

fn main() {
    let mu = [1, 2, 4, 6, 10];
    let nu = [1, 2, 3, 4, 5, 10];
    let rho = [7, 8, 9];
    println!("mu  updated on {mu:?}\nnu  updated on {nu:?}\nrho updated on {rho:?}\n");

    let flags: Vec<(bool, bool)> = (1..=10).map(|d| (mu.contains(&d), nu.contains(&d))).collect();
    let seq = PairDaySequence::from_flags("mu", "nu", &flags);
    let days: Vec<usize> = seq.entries.iter().map(|e| e.day_index).collect();
    println!("relevant days for (mu, nu): {days:?}");

    let series = coupling_series(&seq, WindowConfig::new(3).unwrap());
    println!("\n{:>8} {:>9} {:>9} {:>9}", "ends on", "coupling", "P(nu|mu)", "P(mu|nu)");
    let show = |p: Option<mlc::Rational>| p.map_or("-".to_string(), |r| r.to_string());
    for p in &series.points {
        println!(
            "{:>8} {:>9} {:>9} {:>9}",
            p.end_day_index,
            p.coupling.to_string(),
            show(p.p_nu_given_mu),
            show(p.p_mu_given_nu)
        );
    }
    let decimals: Vec<String> = series.points.iter().map(|p| format_decimal(p.coupling)).collect();
    println!("as written to series.csv: {}", decimals.join(", "));

    let states = state_timeline(series.coupling_values(), Threshold::default(), 2);
    println!("\nstates at t = 0.5, patience 2: {states:?}");

    let co = historical_cochange(&seq);
    println!(
        "whole-history co-changes: {co}; baseline (> {BASELINE_LIMIT}) says coupled = {}",
        baseline_coupled(co, BASELINE_LIMIT)
    );
}
