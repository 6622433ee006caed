use proptest::prelude::*;
use pseudoprecip::blend::{empirical_quantiles, quantile_loss, QuantileSpec};
use pseudoprecip::grid::{crop, read_grid_series, write_grid_series, FieldKind, Geometry, GridSeries, Span};
use pseudoprecip::spectral::{lowpass, LowpassSpec};

fn series_strategy() -> impl Strategy<Value = GridSeries> {
    (1usize..6, 1usize..6, 1usize..4, any::<bool>())
        .prop_flat_map(|(nlat, nlon, nsteps, tp)| {
            let n = nlat * nlon;
            (
                Just((nlat, nlon, tp)),
                prop::collection::vec(prop::collection::vec(0.0f32..500.0, n), nsteps),
                prop::collection::vec(any::<bool>(), n),
            )
        })
        .prop_map(|((nlat, nlon, tp), steps, mask)| {
            let kind = if tp { FieldKind::Tp } else { FieldKind::Vimd };
            let lat = (0..nlat).map(|i| 60.0 - 0.25 * i as f64).collect();
            let lon = (0..nlon).map(|j| -5.0 + 0.25 * j as f64).collect();
            let geo = Geometry::with_mask(kind, lat, lon, mask).unwrap();
            let steps = steps.into_iter().map(|s| s.into_iter().map(f64::from).collect()).collect();
            GridSeries::new(geo, 1_262_304_000, steps).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ppg_round_trip_is_identity(series in series_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.ppg");
        write_grid_series(&series, &path).unwrap();
        let back = read_grid_series(&path).unwrap();
        prop_assert_eq!(back.geometry(), series.geometry());
        prop_assert_eq!(back.timestamps(), series.timestamps());
        for (a, b) in back.steps().iter().zip(series.steps()) {
            for (x, y) in a.iter().zip(b) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn nested_crops_compose(series in series_strategy(), a in 0usize..6, b in 0usize..6) {
        let lat = series.geometry().lat().to_vec();
        let lon = series.geometry().lon().to_vec();
        let (i, j) = (a % lat.len(), b % lon.len());
        let outer = crop(&series, Span::new(lat[0], lat[i]), Span::new(lon[0], lon[j])).unwrap();
        let inner_lat = Span::new(lat[i / 2], lat[i]);
        let inner_lon = Span::new(lon[j / 2], lon[j]);
        let twice = crop(&outer, inner_lat, inner_lon).unwrap();
        let once = crop(&series, inner_lat, inner_lon).unwrap();
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn empirical_quantiles_are_monotone(sample in prop::collection::vec(-1e3f64..1e3, 1..200)) {
        let probs: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
        let q = empirical_quantiles(&sample, &probs).unwrap();
        prop_assert!(q.windows(2).all(|w| w[0] <= w[1]));
        let lo = sample.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(q[0], lo);
        prop_assert_eq!(q[20], hi);
    }

    #[test]
    fn quantile_gradient_sums_match_translation(shift in -2.0f64..2.0, scale in 0.5f64..2.0) {
        let spec = QuantileSpec { n_bins: 64, p_min: 0.01, p_max: 0.99 };
        let table = spec.table().unwrap();
        let batch: Vec<f64> = (0..256).map(|i| scale * ((i * 37 % 256) as f64 / 64.0 - 2.0) + shift).collect();
        let (l, g) = quantile_loss(&batch, &table).unwrap();
        prop_assert!(l >= 0.0);
        let moved: Vec<f64> = batch.iter().map(|x| x + 1e-6).collect();
        let (l2, _) = quantile_loss(&moved, &table).unwrap();
        let sum: f64 = g.iter().sum();
        prop_assert!(((l2 - l) / 1e-6 - sum).abs() <= 1e-4 * sum.abs().max(1.0));
    }

    #[test]
    fn lowpass_keeps_constants(c in -50.0f64..50.0, cutoff in 0.05f64..1.0, pad in 0usize..4) {
        let (n, m) = (10, 12);
        let spec = LowpassSpec { cutoff, pad: 2 * pad, ..LowpassSpec::default() };
        let out = lowpass(&vec![c; n * m], n, m, spec).unwrap();
        prop_assert!(out.iter().all(|v| (v - c).abs() <= 1e-10 * c.abs().max(1.0)));
    }
}
