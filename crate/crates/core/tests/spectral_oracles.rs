use nalgebra::DMatrix;
use pseudoprecip::grid::{FieldKind, Geometry, GridSeries};
use pseudoprecip::spectral::{gibbs_metrics, lowpass, lowpass_series, make_pairs, LowpassSpec, Taper};
use pseudoprecip::synth::{gaussian_random_field, synth_tp_vimd, SynthConfig};

/// Keeps DFT bins `|k| <= kmax` of a periodic 1-D signal, by direct summation.
fn truncated_dft(x: &[f64], kmax: usize) -> Vec<f64> {
    let n = x.len();
    let tau = 2.0 * std::f64::consts::PI / n as f64;
    let coef: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (j, &v)| {
                let a = tau * (k * j % n) as f64;
                (re + v * a.cos(), im - v * a.sin())
            })
        })
        .collect();
    (0..n)
        .map(|j| {
            let mut s = 0.0;
            for (k, &(re, im)) in coef.iter().enumerate() {
                let signed = if k <= n / 2 { k } else { n - k };
                if signed <= kmax {
                    let a = tau * (k * j % n) as f64;
                    s += re * a.cos() - im * a.sin();
                }
            }
            s / n as f64
        })
        .collect()
}

#[test]
fn step_overshoot_matches_partial_fourier_sum() {
    let n = 512;
    let profile: Vec<f64> = (0..n).map(|j| f64::from(u8::from(j >= n / 2))).collect();
    let field: Vec<f64> = profile.iter().chain(&profile).copied().collect();
    let cutoff = 0.25;
    let out = lowpass(&field, 2, n, LowpassSpec::brick_wall(cutoff, 0)).unwrap();
    let overshoot = out.iter().copied().fold(f64::MIN, f64::max) - 1.0;

    let oracle = truncated_dft(&profile, (cutoff * (n / 2) as f64) as usize);
    let want = oracle.iter().copied().fold(f64::MIN, f64::max) - 1.0;
    assert!((overshoot - want).abs() < 1e-10, "{overshoot} vs {want}");
    assert!((0.080..=0.098).contains(&overshoot), "{overshoot}");

    // with reflection padding the interior step rings the same way
    let padded = lowpass(&field, 2, n, LowpassSpec::brick_wall(cutoff, 8)).unwrap();
    let overshoot = padded.iter().copied().fold(f64::MIN, f64::max) - 1.0;
    assert!((0.080..=0.098).contains(&overshoot), "{overshoot}");
}

/// Cosine basis that is even about both edges of an `n`-cell axis.
fn edge_even_basis(points: &[usize], n: usize, kmax: usize) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), kmax + 1, |r, k| {
        (std::f64::consts::PI * k as f64 * points[r] as f64 / (n - 1) as f64).cos()
    })
}

#[test]
fn pairs_of_band_limited_field_determine_it() {
    let (n, f) = (64, 4);
    // padding of (n - 2) / 2 makes the padded field exactly one period of its
    // even extension, so the filter sees a genuinely band-limited signal
    let pad = (n - 2) / 2;
    let period_half = (n + 2 * pad) / 2;
    // radial frequency limit inside the flat part of the taper
    let kmax = ((1.0 / f as f64) * 0.8 * period_half as f64).floor() as usize - 1;
    let all: Vec<usize> = (0..n).collect();
    let basis = edge_even_basis(&all, n, kmax);
    let amps = DMatrix::from_fn(kmax + 1, kmax + 1, |a, b| {
        if ((a * a + b * b) as f64).sqrt() <= kmax as f64 {
            ((a * 7 + b * 3) % 11) as f64 / 11.0 - 0.4
        } else {
            0.0
        }
    });
    let hr_field = &basis * &amps * basis.transpose();
    let values: Vec<f64> = (0..n * n).map(|c| hr_field[(c / n, c % n)]).collect();
    let geo = Geometry::regular(FieldKind::Pp, n, n, 60.0, 0.0, 0.25).unwrap();
    let hr = GridSeries::new(geo, 0, vec![values.clone()]).unwrap();
    let spec = LowpassSpec { cutoff: 1.0, taper: Taper::RaisedCosine { width: 0.2 }, pad };
    let pairs = make_pairs(&hr, f, spec).unwrap();

    let coarse: Vec<usize> = (0..n).step_by(f).collect();
    let b = edge_even_basis(&coarse, n, kmax);
    let m = n / f;
    let lr = DMatrix::from_fn(m, m, |i, j| pairs.lr.step(0)[i * m + j]);
    let pinv = b.clone().pseudo_inverse(1e-12).unwrap();
    let fitted = &pinv * lr * pinv.transpose();
    let back = &basis * fitted * basis.transpose();
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for c in 0..n * n {
        let err = (back[(c / n, c % n)] - values[c]).abs();
        assert!(err <= 1e-6 * scale, "cell {c}: {err}");
    }
}

fn random_field(n: usize, seed: u64) -> Vec<f64> {
    gaussian_random_field(n, n, 2.0, 8.0, seed).unwrap()
}

#[test]
fn lowpass_is_linear() {
    let n = 48;
    let (f, g) = (random_field(n, 1), random_field(n, 2));
    for spec in [LowpassSpec::default(), LowpassSpec::brick_wall(0.3, 5)] {
        let (a, b) = (1.7, -0.6);
        let mix: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let lhs = lowpass(&mix, n, n, spec).unwrap();
        let (lf, lg) = (lowpass(&f, n, n, spec).unwrap(), lowpass(&g, n, n, spec).unwrap());
        for i in 0..lhs.len() {
            assert!((lhs[i] - (a * lf[i] + b * lg[i])).abs() < 1e-10);
        }
    }
}

#[test]
fn brick_wall_is_idempotent() {
    let n = 48;
    let f = random_field(n, 3);
    for pad in [0, (n - 2) / 2] {
        let spec = LowpassSpec::brick_wall(0.35, pad);
        let once = lowpass(&f, n, n, spec).unwrap();
        let twice = lowpass(&once, n, n, spec).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-10, "pad {pad}");
        }
    }
}

#[test]
fn filtering_never_adds_energy() {
    let n = 64;
    for seed in 0..4 {
        let f = random_field(n, 10 + seed);
        let before: f64 = f.iter().map(|x| x * x).sum();
        for spec in [LowpassSpec::brick_wall(0.2, 0), LowpassSpec { pad: 0, ..LowpassSpec::default() }] {
            let after: f64 = lowpass(&f, n, n, spec).unwrap().iter().map(|x| x * x).sum();
            assert!(after <= before * (1.0 + 1e-10), "{after} > {before}");
        }
    }
}

#[test]
fn lowpass_preserves_mean_without_padding() {
    let n = 32;
    let f: Vec<f64> = random_field(n, 20).iter().map(|x| x + 3.0).collect();
    let out = lowpass(&f, n, n, LowpassSpec::brick_wall(0.1, 0)).unwrap();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!((mean(&f) - mean(&out)).abs() < 1e-12);
}

#[test]
fn brick_wall_tp_goes_negative() {
    let cfg = SynthConfig { nsteps: 8, ..SynthConfig::default() };
    let (tp, _) = synth_tp_vimd(&cfg).unwrap();
    let filtered = lowpass_series(&tp, LowpassSpec::brick_wall(0.25, 8)).unwrap();
    let mut frac = 0.0;
    for t in 0..tp.len() {
        let r = gibbs_metrics(&tp.grid(t), &filtered.grid(t)).unwrap();
        frac += r.negative_cell_fraction.unwrap() / tp.len() as f64;
    }
    assert!(frac >= 0.01, "{frac}");
}
