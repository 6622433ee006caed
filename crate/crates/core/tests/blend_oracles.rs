use pseudoprecip::blend::{
    empirical_quantiles, normal_cdf, normal_quantile, quantile_loss, reconstruction_loss, QuantileSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Φ from the Maclaurin series of erf near the centre and the Laplace
/// continued fraction of erfc in the tails.
fn phi_oracle(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    if z.abs() < 2.0 {
        let mut term = z;
        let mut sum = z;
        for n in 1..200 {
            term *= -z * z / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        let erf = 2.0 / std::f64::consts::PI.sqrt() * sum;
        return 0.5 * (1.0 + erf);
    }
    // erfc(y) = exp(-y^2)/sqrt(pi) * 1/(y + 1/2/(y + 1/(y + 3/2/(y + ...))))
    let y = z.abs();
    let mut frac = y;
    for k in (1..400).rev() {
        frac = y + (k as f64 / 2.0) / frac;
    }
    let erfc = (-y * y).exp() / std::f64::consts::PI.sqrt() / frac;
    if z > 0.0 {
        1.0 - 0.5 * erfc
    } else {
        0.5 * erfc
    }
}

fn bisect_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi_oracle(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn phi_oracle_sanity() {
    assert!((phi_oracle(0.0) - 0.5).abs() < 1e-16);
    // both branches agree where they meet, up to the series cancellation
    let a = phi_oracle(2.0 * std::f64::consts::SQRT_2 - 1e-12);
    let b = phi_oracle(2.0 * std::f64::consts::SQRT_2 + 1e-12);
    assert!((a - b).abs() < 5e-14, "{a} {b}");
}

#[test]
fn normal_quantile_matches_bisection() {
    let mut probs: Vec<f64> = (1..200).map(|i| i as f64 / 200.0).collect();
    probs.extend([1e-12, 1e-9, 1e-6, 1e-4, 1e-3, 0.999, 1.0 - 1e-6]);
    for p in probs {
        let want = bisect_quantile(p);
        let got = normal_quantile(p).unwrap();
        assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "p={p}: {got} vs {want}");
    }
}

#[test]
fn normal_quantile_reference_values() {
    // 30-digit reference evaluations, rounded to double
    let cases = [
        (0.975f64, 1.959_963_984_540_054f64),
        (1e-6, -4.753_424_308_822_899),
        (0.5, 0.0),
        (0.841_344_746_068_542_9, 1.0),
    ];
    for (p, want) in cases {
        let got = normal_quantile(p).unwrap();
        assert!((got - want).abs() < 1e-9, "p={p}: {got}");
    }
}

#[test]
fn normal_cdf_matches_oracle() {
    for i in -300..=300 {
        let x = i as f64 / 40.0;
        let (got, want) = (normal_cdf(x), phi_oracle(x));
        assert!((got - want).abs() <= 1e-13 * want, "x={x}: {got} vs {want}");
    }
}

fn normal_batch(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Half-width of the interval around `batch[i]` free of other elements.
fn isolation(batch: &[f64], i: usize) -> f64 {
    batch
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &x)| (x - batch[i]).abs())
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn quantile_loss_gradient_matches_finite_differences() {
    let table = QuantileSpec::default().table().unwrap();
    let batch = normal_batch(8192, 11);
    let (_, grad) = quantile_loss(&batch, &table).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 50 {
        let i = rng.random_range(0..batch.len());
        // the loss is smooth only while the ordering is unchanged
        let iso = isolation(&batch, i);
        if iso < 1e-5 {
            continue;
        }
        // quadratic in batch[i] while the ordering holds, so the widest step
        // that keeps it is exact and least exposed to roundoff
        let h = 0.5 * iso;
        let mut plus = batch.clone();
        plus[i] += h;
        let mut minus = batch.clone();
        minus[i] -= h;
        let fd = (quantile_loss(&plus, &table).unwrap().0 - quantile_loss(&minus, &table).unwrap().0) / (2.0 * h);
        let rel = (fd - grad[i]).abs() / grad[i].abs().max(1e-8);
        assert!(rel <= 1e-5, "i={i}: fd {fd} vs analytic {}", grad[i]);
        checked += 1;
    }
}

#[test]
fn quantile_loss_translation_derivative_is_gradient_sum() {
    let table = QuantileSpec::default().table().unwrap();
    let batch = normal_batch(8192, 12);
    let (_, grad) = quantile_loss(&batch, &table).unwrap();
    let sum: f64 = grad.iter().sum();
    for c in [0.0, 0.5, -1.3] {
        let shift = |d: f64| -> f64 {
            let moved: Vec<f64> = batch.iter().map(|x| x + c + d).collect();
            quantile_loss(&moved, &table).unwrap().0
        };
        let (_, g) = quantile_loss(&batch.iter().map(|x| x + c).collect::<Vec<_>>(), &table).unwrap();
        let s: f64 = g.iter().sum();
        let fd = (shift(1e-5) - shift(-1e-5)) / 2e-5;
        assert!((fd - s).abs() <= 1e-6 * s.abs().max(1e-3), "c={c}: {fd} vs {s}");
        if c == 0.0 {
            assert!((s - sum).abs() < 1e-15);
        }
    }
    // shifting every element by c moves every quantile by c
    let (l0, _) = quantile_loss(&table.targets, &table).unwrap();
    let moved: Vec<f64> = table.targets.iter().map(|x| x - 0.25).collect();
    let (l1, _) = quantile_loss(&moved, &table).unwrap();
    assert!(l0 < 1e-20 && (l1 - 0.0625).abs() < 1e-12);
}

#[test]
fn quantile_loss_is_permutation_invariant() {
    let table = QuantileSpec::default().table().unwrap();
    let batch = normal_batch(4096, 13);
    let reversed: Vec<f64> = batch.iter().rev().copied().collect();
    let (la, ga) = quantile_loss(&batch, &table).unwrap();
    let (lb, gb) = quantile_loss(&reversed, &table).unwrap();
    assert_eq!(la, lb);
    for (i, g) in ga.iter().enumerate() {
        assert_eq!(*g, gb[batch.len() - 1 - i]);
    }
}

#[test]
fn reconstruction_gradient_matches_finite_differences() {
    let pred = normal_batch(64, 14);
    let truth = normal_batch(64, 15);
    let (_, grad) = reconstruction_loss(&pred, &truth).unwrap();
    let h = 1e-5;
    for i in 0..pred.len() {
        let mut plus = pred.clone();
        plus[i] += h;
        let mut minus = pred.clone();
        minus[i] -= h;
        let fd = (reconstruction_loss(&plus, &truth).unwrap().0 - reconstruction_loss(&minus, &truth).unwrap().0)
            / (2.0 * h);
        assert!((fd - grad[i]).abs() <= 1e-9, "i={i}: {fd} vs {}", grad[i]);
    }
}

#[test]
fn empirical_quantiles_match_order_statistics() {
    let sample = normal_batch(1001, 16);
    let mut sorted = sample.clone();
    sorted.sort_by(f64::total_cmp);
    let probs: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let q = empirical_quantiles(&sample, &probs).unwrap();
    for (k, v) in q.iter().enumerate() {
        assert_eq!(*v, sorted[k * 100]);
    }
}
