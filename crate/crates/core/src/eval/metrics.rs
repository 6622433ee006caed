use serde::{Deserialize, Serialize};

use crate::blend::empirical_quantiles;
use crate::error::{Error, Result};
use crate::grid::{GridSeries, STEPS_PER_DAY};

/// Paired quantiles of a candidate and a reference sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QqData {
    pub probs: Vec<f64>,
    pub cand: Vec<f64>,
    pub reference: Vec<f64>,
}

impl QqData {
    /// Largest |q_cand - q_ref| over probabilities `<= p_max`.
    pub fn max_deviation(&self, p_max: f64) -> f64 {
        self.probs
            .iter()
            .zip(self.cand.iter().zip(&self.reference))
            .filter(|(&p, _)| p <= p_max)
            .map(|(_, (c, r))| (c - r).abs())
            .fold(0.0, f64::max)
    }

    /// Reference quantile at the largest probability `<= p`.
    pub fn reference_at(&self, p: f64) -> Option<f64> {
        self.probs.iter().zip(&self.reference).rfind(|(&q, _)| q <= p).map(|(_, &r)| r)
    }
}

pub fn qq_data(cand: &[f64], reference: &[f64], probs: &[f64]) -> Result<QqData> {
    if cand.is_empty() || reference.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(QqData {
        probs: probs.to_vec(),
        cand: empirical_quantiles(cand, probs)?,
        reference: empirical_quantiles(reference, probs)?,
    })
}

/// Per-cell number of days whose total strictly exceeds `threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremeCount {
    pub threshold: f64,
    pub days: usize,
    pub lat: Vec<f64>,
    pub lon: Vec<f64>,
    /// Row-major per cell; masked cells stay 0.
    pub counts: Vec<u32>,
}

impl ExtremeCount {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }
}

fn check_days(tp: &GridSeries) -> Result<usize> {
    let day = 86_400;
    if tp.t0().rem_euclid(day) != 0 {
        return Err(Error::MisalignedSeries(format!("series starts at {} s, not on a day boundary", tp.t0())));
    }
    if !tp.len().is_multiple_of(STEPS_PER_DAY) {
        return Err(Error::MisalignedSeries(format!(
            "{} steps is not a whole number of {STEPS_PER_DAY}-step days",
            tp.len()
        )));
    }
    Ok(tp.len() / STEPS_PER_DAY)
}

/// Daily totals, day-major: `out[d][cell]`.
pub fn daily_totals(tp: &GridSeries) -> Result<Vec<Vec<f64>>> {
    let days = check_days(tp)?;
    Ok((0..days)
        .map(|d| {
            let mut sum = vec![0.0; tp.ncells()];
            for s in &tp.steps()[d * STEPS_PER_DAY..(d + 1) * STEPS_PER_DAY] {
                for (a, &v) in sum.iter_mut().zip(s) {
                    *a += v;
                }
            }
            sum
        })
        .collect())
}

pub fn extreme_day_count(tp: &GridSeries, threshold: f64) -> Result<ExtremeCount> {
    let totals = daily_totals(tp)?;
    let geo = tp.geometry();
    let mut counts = vec![0u32; tp.ncells()];
    for day in &totals {
        for (c, &v) in day.iter().enumerate() {
            if geo.is_valid(c) && v > threshold {
                counts[c] += 1;
            }
        }
    }
    Ok(ExtremeCount { threshold, days: totals.len(), lat: geo.lat().to_vec(), lon: geo.lon().to_vec(), counts })
}

/// Empirical `p` quantile of all valid daily totals.
pub fn daily_percentile(tp: &GridSeries, p: f64) -> Result<f64> {
    let geo = tp.geometry();
    let all: Vec<f64> = daily_totals(tp)?
        .into_iter()
        .flat_map(|d| d.into_iter().enumerate().filter(|(c, _)| geo.is_valid(*c)).map(|(_, v)| v).collect::<Vec<_>>())
        .collect();
    Ok(empirical_quantiles(&all, &[p])?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FieldKind, Geometry};

    fn series(steps: Vec<f64>) -> GridSeries {
        let geo = Geometry::regular(FieldKind::Tp, 1, 1, 50.0, 0.0, 1.0).unwrap();
        GridSeries::new(geo, 0, steps.into_iter().map(|v| vec![v]).collect()).unwrap()
    }

    #[test]
    fn strict_threshold() {
        assert_eq!(extreme_day_count(&series(vec![0.0; 16]), 20.0).unwrap().counts, vec![0]);
        assert_eq!(extreme_day_count(&series(vec![3.0; 8]), 20.0).unwrap().counts, vec![1]);
        assert_eq!(extreme_day_count(&series(vec![2.5; 8]), 20.0).unwrap().counts, vec![0]);
    }

    #[test]
    fn misaligned() {
        assert!(matches!(extreme_day_count(&series(vec![0.0; 12]), 20.0), Err(Error::MisalignedSeries(_))));
        let s = series(vec![0.0; 8]).slice_steps(1..8).unwrap();
        assert!(matches!(extreme_day_count(&s, 20.0), Err(Error::MisalignedSeries(_))));
    }

    #[test]
    fn qq_diagonal_and_scaling() {
        let r = [0.3, -1.0, 2.0, 0.7, 5.0];
        let probs = [0.1, 0.5, 0.9];
        let q = qq_data(&r, &r, &probs).unwrap();
        assert_eq!(q.cand, q.reference);
        let twice: Vec<f64> = r.iter().map(|x| 2.0 * x).collect();
        let q = qq_data(&twice, &r, &probs).unwrap();
        for (c, r) in q.cand.iter().zip(&q.reference) {
            assert!((c - 2.0 * r).abs() < 1e-12);
        }
        assert!(matches!(qq_data(&[], &r, &probs), Err(Error::EmptySample)));
    }
}
