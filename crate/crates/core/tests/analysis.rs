use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use mlc::activity::{build_calendar, relevant_days};
use mlc::analysis::{
    align_series, run_sweep, segment_labels, segment_series, NamedFilter, SegmentParams, SweepSpec, TrendLabel,
};
use mlc::coupling::{coupling_series, Threshold, WindowConfig};
use mlc::ingest::{parse_commit_log_str, CommitFilter, CommitRecord};
use mlc::service_map::load_service_map;
use mlc::synth::{generate_commits, service_name, synthetic_map_document, CouplingEpisode, SyntheticSpec};
use mlc::validation::trend_agreement;

fn textbook_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Per (pair, window end date) coupling values, recomputed from raw commits.
fn standalone_cell(commits: &[CommitRecord], n: usize) -> BTreeMap<(String, String), BTreeMap<NaiveDate, f64>> {
    let mut by_day: BTreeMap<NaiveDate, BTreeSet<String>> = BTreeMap::new();
    for c in commits {
        let day = c.timestamp.naive_utc().date();
        let touched = by_day.entry(day).or_default();
        for f in &c.files {
            touched.insert(f.split('/').next().unwrap().to_string());
        }
    }
    let services: BTreeSet<String> = by_day.values().flatten().cloned().collect();
    let mut out = BTreeMap::new();
    for a in &services {
        for b in services.range::<String, _>((std::ops::Bound::Excluded(a), std::ops::Bound::Unbounded)) {
            let days: Vec<(NaiveDate, bool, bool)> =
                by_day.iter().map(|(d, s)| (*d, s.contains(a), s.contains(b))).filter(|(_, x, y)| *x || *y).collect();
            let mut points = BTreeMap::new();
            for i in n..=days.len() {
                let w = &days[i - n..i];
                let co = w.iter().filter(|(_, x, y)| *x && *y).count();
                points.insert(w[n - 1].0, co as f64 / n as f64);
            }
            out.insert((a.clone(), b.clone()), points);
        }
    }
    out
}

#[test]
fn sweep_matrix_matches_standalone_recomputation() {
    let spec = SyntheticSpec {
        services: 3,
        days: 200,
        base_rate: 0.35,
        episodes: vec![CouplingEpisode {
            mu: service_name(0),
            nu: service_name(1),
            start_day: 60,
            end_day: 140,
            co_update_probability: 0.8,
        }],
        seed: 11,
        ..Default::default()
    };
    let commits = generate_commits(&spec).unwrap();
    let map = load_service_map(&synthetic_map_document(3)).unwrap();
    let windows = [5usize, 10, 30];
    let sweep = SweepSpec {
        window_sizes: windows.to_vec(),
        filters: vec![NamedFilter { name: "all".into(), filter: CommitFilter::none() }],
        thresholds: vec![Threshold::default()],
        ..Default::default()
    };
    let report = run_sweep(&commits, &map, &sweep).unwrap();
    let cells: Vec<_> = windows.iter().map(|&n| standalone_cell(&commits, n)).collect();

    for (i, cell) in cells.iter().enumerate() {
        let values: Vec<f64> = cell.values().flat_map(|m| m.values().copied()).collect();
        assert_eq!(report.cells[i].summary.windows, values.len());
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((report.cells[i].summary.mean_coupling.unwrap() - mean).abs() < 1e-12);
    }
    for i in 0..windows.len() {
        for j in 0..windows.len() {
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for (pair, left) in &cells[i] {
                for (d, v) in left {
                    if let Some(w) = cells[j][pair].get(d) {
                        x.push(*v);
                        y.push(*w);
                    }
                }
            }
            assert_eq!(report.aligned_points[i][j], x.len(), "cell {i},{j}");
            let expected = textbook_pearson(&x, &y);
            let got = report.pearson[i][j].unwrap();
            assert!((got - expected).abs() < 1e-9, "cell {i},{j}: {got} vs {expected}");
        }
    }
}

#[test]
fn alignment_matches_hand_join() {
    let text =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/three_services.log")).unwrap();
    let map = load_service_map(
        &std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/three_services.map")).unwrap(),
    )
    .unwrap();
    let cal = build_calendar(&parse_commit_log_str(&text).unwrap().commits, &map);
    let seq = relevant_days(&cal, "mu", "nu").unwrap();
    let s3 = coupling_series(&seq, WindowConfig::new(3).unwrap());
    let s2 = coupling_series(&seq, WindowConfig::new(2).unwrap());
    let al = align_series(&s3, &s2).unwrap();
    // n=3 ends on days 3,4,5,6,10; n=2 additionally on day 2
    let third = 1.0 / 3.0;
    let expected = [(2.0 / 3.0, 0.5), (2.0 / 3.0, 0.5), (third, 0.5), (third, 0.0), (third, 0.5)];
    assert_eq!(al.pairs.len(), expected.len());
    for (got, want) in al.pairs.iter().zip(expected) {
        assert!((got.0 - want.0).abs() < 1e-15 && (got.1 - want.1).abs() < 1e-15, "{got:?} vs {want:?}");
    }
    assert_eq!(al.dropped, 1);
}

fn line_sse(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let xs: Vec<f64> = (0..v.len()).map(|i| i as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = v.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(v).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    xs.iter().zip(v).map(|(x, y)| (y - (my + slope * (x - mx))).powi(2)).sum()
}

/// Exhaustive search for the best single breakpoint (end of the first part).
fn best_split(v: &[f64], min_len: usize) -> usize {
    (min_len..=v.len() - min_len)
        .min_by(|&a, &b| {
            let ea = line_sse(&v[..a]) + line_sse(&v[a..]);
            let eb = line_sse(&v[..b]) + line_sse(&v[b..]);
            ea.total_cmp(&eb)
        })
        .unwrap()
}

fn ramps(noise: f64) -> Vec<f64> {
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut jitter = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        ((state % 1000) as f64 / 1000.0 - 0.5) * 2.0 * noise
    };
    let up = (1..=20).map(|i| 0.1 + 0.03 * i as f64);
    let down = (1..=20).map(|i| 0.7 - 0.03 * i as f64);
    up.chain(down).map(|v| v + jitter()).collect()
}

#[test]
fn ramp_breakpoint_matches_exhaustive_split() {
    for noise in [0.0, 0.004] {
        let v = ramps(noise);
        let params = SegmentParams::default();
        let segs = segment_series(&v, params).unwrap();
        let labels: Vec<TrendLabel> = segs.iter().map(|s| s.label).collect();
        assert_eq!(labels, vec![TrendLabel::Growing, TrendLabel::Decreasing], "noise {noise}");
        let oracle = best_split(&v, params.min_len);
        assert!(oracle.abs_diff(20) <= 2, "oracle split {oracle}");
        assert!(segs[0].end_idx.abs_diff(oracle) <= 2, "split {} vs {oracle}", segs[0].end_idx);
    }
}

#[test]
fn planted_ramp_trend_agreement() {
    let v = ramps(0.004);
    let segs = segment_series(&v, SegmentParams::default()).unwrap();
    let predicted = segment_labels(&segs);
    let truth: Vec<TrendLabel> =
        (0..40).map(|i| if i < 20 { TrendLabel::Growing } else { TrendLabel::Decreasing }).collect();
    assert!(trend_agreement(&predicted, &truth).unwrap() >= 0.9);
}
