//! Scores predicted coupling states against a hand-labelled ground truth.

use std::fs::File;

use mlc::coupling::Threshold;
use mlc::report::{read_series_csv, table_states};
use mlc::validation::{
    confusion, precision_recall_f1, read_ground_truth, sample_size, ConfidenceLevel, Population, PredictedStates,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");
    let tables = read_series_csv(File::open(format!("{dir}/series20.csv"))?)?;
    let truth = read_ground_truth(File::open(format!("{dir}/truth20.csv"))?, "truth20.csv")?;

    for patience in [1, 2, 3] {
        let predicted: Vec<PredictedStates> =
            table_states(&tables, Threshold::default(), patience).iter().map(|s| s.predicted()).collect();
        let c = confusion(&predicted, &truth)?;
        let a = precision_recall_f1(&c);
        let f = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.3}"));
        println!(
            "patience {patience}: tp={} fp={} fn={} tn={}  precision={} recall={} f1={}",
            c.tp,
            c.fp,
            c.fn_,
            c.tn,
            f(a.precision),
            f(a.recall),
            f(a.f1)
        );
    }

    println!("\nwindows to label for a 95% confidence level and a 1% margin:");
    for pop in [Population::Finite(100), Population::Finite(1000), Population::Finite(50_000), Population::Infinite] {
        println!("  {pop:?}: {}", sample_size(pop, ConfidenceLevel::P95, 0.01)?);
    }
    Ok(())
}
