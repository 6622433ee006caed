use pseudoprecip::eval::{
    emit_report, extreme_day_count, mean_periodogram, qq_data, temporal_psd_cells, EvalReport, PSD_SEGMENT,
};
use pseudoprecip::grid::{FieldKind, Geometry, GridSeries};
use pseudoprecip::spectral::GibbsReport;
use pseudoprecip::synth::{synth_tp_vimd, SynthConfig};

/// One-sided AR(1) spectral density (unit innovation variance) at `f`
/// cycles/day with 8 samples per day.
fn ar1_density(phi: f64, f: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * f / 8.0;
    2.0 / 8.0 / (1.0 - 2.0 * phi * w.cos() + phi * phi)
}

#[test]
fn ar1_psd_matches_closed_form() {
    let phi = 0.8;
    // with full coupling VIMD is exactly the negated latent AR(1) field
    let cfg = SynthConfig {
        nlat: 32,
        nlon: 32,
        nsteps: 1024,
        temporal_ar1: phi,
        tp_vimd_coupling: 1.0,
        seed: 5,
        ..SynthConfig::default()
    };
    let (_, vimd) = synth_tp_vimd(&cfg).unwrap();
    let cells: Vec<usize> = (0..4).flat_map(|i| (0..4).map(move |j| i * 8 * 32 + j * 8)).collect();
    let psd = temporal_psd_cells(&vimd, &cells, PSD_SEGMENT).unwrap();
    assert_eq!(psd.segments, 16 * 4);

    // band averages beat the periodogram noise
    let band = |lo: usize, hi: usize| psd.power[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
    let oracle = |lo: usize, hi: usize| (lo..hi).map(|k| ar1_density(phi, psd.freqs[k])).sum::<f64>() / (hi - lo) as f64;
    let (low, high) = ((2, 10), (110, 128));
    let ratio = band(low.0, low.1) / band(high.0, high.1);
    let want = oracle(low.0, low.1) / oracle(high.0, high.1);
    assert!((ratio / want - 1.0).abs() <= 0.2, "ratio {ratio} vs {want}");

    let blocks: Vec<f64> = (0..8).map(|b| band(1 + 16 * b, 1 + 16 * (b + 1))).collect();
    assert!(blocks.windows(2).all(|w| w[0] > w[1]), "{blocks:?}");
}

#[test]
fn psd_integrates_to_segment_variance() {
    let x: Vec<f64> = (0..2048).map(|t| ((t * 7919 % 1013) as f64 / 1013.0 - 0.5) + (t as f64 * 0.3).sin()).collect();
    let psd = mean_periodogram(std::slice::from_ref(&x), 256).unwrap();
    let var = x
        .chunks_exact(256)
        .map(|s| {
            let m = s.iter().sum::<f64>() / 256.0;
            s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 256.0
        })
        .sum::<f64>()
        / 8.0;
    assert!((psd.total_power() - var).abs() <= 0.01 * var, "{} vs {var}", psd.total_power());
    assert_eq!(psd.freqs.len(), 129);
    assert_eq!(*psd.freqs.last().unwrap(), 4.0);
}

fn daily_series(values: Vec<Vec<f64>>) -> GridSeries {
    let geo = Geometry::regular(FieldKind::Tp, 1, 2, 50.0, 0.0, 0.25).unwrap();
    GridSeries::new(geo, 1_262_304_000, values).unwrap()
}

#[test]
fn extreme_days_match_hand_counts() {
    // cell 0: 24 mm on day 0, 20 mm on day 1; cell 1: dry then 40 mm on day 1
    let mut steps = Vec::new();
    for _ in 0..8 {
        steps.push(vec![3.0, 0.0]);
    }
    for _ in 0..8 {
        steps.push(vec![2.5, 5.0]);
    }
    let counts = extreme_day_count(&daily_series(steps), 20.0).unwrap();
    assert_eq!(counts.counts, vec![1, 1]);
    assert_eq!(counts.days, 2);
}

fn sample_report() -> EvalReport {
    let psd = mean_periodogram(&[(0..512).map(|t| (t as f64 * 0.7).sin() + 0.1 * t as f64 % 3.0).collect()], 256)
        .unwrap();
    let reference: Vec<f64> = (0..500).map(|i| (i as f64 / 37.0).exp() % 7.0).collect();
    let cand: Vec<f64> = reference.iter().map(|v| v * 1.1 + 0.01).collect();
    let probs: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    let mut steps = Vec::new();
    for t in 0..16 {
        steps.push(vec![t as f64 * 0.7, 3.1]);
    }
    EvalReport {
        psd: vec![("truth".into(), psd.clone()), ("route_b".into(), psd)],
        qq: vec![("route_b".into(), qq_data(&cand, &reference, &probs).unwrap())],
        extremes: vec![("truth".into(), extreme_day_count(&daily_series(steps), 20.0).unwrap())],
        gibbs: vec![
            (
                "route_a".into(),
                GibbsReport {
                    negative_cell_fraction: Some(0.03),
                    max_overshoot_ratio: 0.091,
                    dry_region_ringing_energy: 1e-3,
                },
            ),
            ("route_b".into(), GibbsReport { negative_cell_fraction: Some(0.0), ..GibbsReport::default() }),
        ],
        summary: vec![("ks".into(), 0.0123), ("mae".into(), 1.5e-3)],
    }
}

#[test]
fn report_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = emit_report(&sample_report(), a.path()).unwrap();
    let fb = emit_report(&sample_report(), b.path()).unwrap();
    assert_eq!(fa.len(), fb.len());
    assert!(fa.last().unwrap().ends_with("index.txt"));
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{x:?}");
    }
    assert!(fa.iter().any(|p| p.extension().is_some_and(|e| e == "svg")));
}

fn parse_csv(path: &std::path::Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn csv_values_round_trip() {
    let report = sample_report();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();

    let psd = &report.psd[0].1;
    let rows = parse_csv(&dir.path().join("psd_truth.csv"));
    assert_eq!(rows.len(), psd.freqs.len());
    for (row, (f, p)) in rows.iter().zip(psd.freqs.iter().zip(&psd.power)) {
        assert!((row[0].parse::<f64>().unwrap() - f).abs() <= 1e-12 * f.abs().max(1.0));
        assert!((row[1].parse::<f64>().unwrap() - p).abs() <= 1e-12 * p.abs().max(1.0));
    }
    let qq = &report.qq[0].1;
    for (row, (c, r)) in parse_csv(&dir.path().join("qq_route_b.csv")).iter().zip(qq.cand.iter().zip(&qq.reference)) {
        assert!((row[1].parse::<f64>().unwrap() - c).abs() <= 1e-12 * c.abs().max(1.0));
        assert!((row[2].parse::<f64>().unwrap() - r).abs() <= 1e-12 * r.abs().max(1.0));
    }
    let gibbs = parse_csv(&dir.path().join("gibbs.csv"));
    let find = |m: &str, route: &str| -> f64 {
        gibbs.iter().find(|r| r[0] == m && r[1] == route).unwrap()[2].parse().unwrap()
    };
    assert_eq!(find("max_overshoot_ratio", "route_a"), 0.091);
    assert_eq!(find("negative_cell_fraction", "route_b"), 0.0);
    let summary = parse_csv(&dir.path().join("summary.csv"));
    assert_eq!(summary[0], vec!["ks".to_string(), "0.0123".to_string()]);
}

#[test]
fn empty_report_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_report(&EvalReport::default(), dir.path()).is_err());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}
