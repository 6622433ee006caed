//! Empirical quantiles and the quantile-matching loss.

use serde::{Deserialize, Serialize};

use super::normal::normal_quantile;
use crate::error::{Error, Result};
use crate::num::Real;

/// Probability grid of the quantile loss: `n_bins` levels uniformly spaced
/// on `[p_min, p_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantileSpec {
    pub n_bins: usize,
    pub p_min: f64,
    pub p_max: f64,
}

impl Default for QuantileSpec {
    fn default() -> Self {
        QuantileSpec { n_bins: 4000, p_min: 1e-6, p_max: 1.0 - 1e-6 }
    }
}

impl QuantileSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_bins < 2 {
            return Err(Error::InvalidConfig(format!("n_bins = {} (need at least 2)", self.n_bins)));
        }
        if !(self.p_min > 0.0 && self.p_min < self.p_max && self.p_max < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "probability span [{}, {}] must satisfy 0 < p_min < p_max < 1",
                self.p_min, self.p_max
            )));
        }
        Ok(())
    }

    pub fn probs(&self) -> Vec<f64> {
        let step = (self.p_max - self.p_min) / (self.n_bins - 1) as f64;
        (0..self.n_bins)
            .map(|i| if i + 1 == self.n_bins { self.p_max } else { self.p_min + i as f64 * step })
            .collect()
    }

    /// Probabilities together with the matching standard-normal quantiles.
    pub fn table(&self) -> Result<QuantileTable> {
        self.validate()?;
        let probs = self.probs();
        let targets = probs.iter().map(|&p| normal_quantile(p)).collect::<Result<Vec<f64>>>()?;
        Ok(QuantileTable { spec: *self, probs, targets })
    }
}

/// Precomputed loss targets for a [`QuantileSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileTable {
    pub spec: QuantileSpec,
    pub probs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl QuantileTable {
    pub fn n_bins(&self) -> usize {
        self.probs.len()
    }

    /// Smallest batch accepted by [`quantile_loss`].
    pub fn min_batch(&self) -> usize {
        self.n_bins().div_ceil(4)
    }

    /// Quantiles of `sample` with the sorted sample spread evenly over
    /// `[p_min, p_max]`, so a sample holding exactly the targets maps onto
    /// itself.
    pub fn sample_quantiles<T: Real>(&self, sample: &[T]) -> Result<Vec<T>> {
        let (lo, hi) = (self.spec.p_min, self.spec.p_max);
        let sorted = sorted_copy(sample)?;
        Ok(self.probs.iter().map(|&p| interpolate(&sorted, position(p, lo, hi, sorted.len())).0).collect())
    }
}

/// Index of the lower neighbour and interpolation weight of the upper one.
#[derive(Clone, Copy, Debug)]
struct Position {
    lo: usize,
    frac: f64,
}

fn position(p: f64, span_lo: f64, span_hi: f64, n: usize) -> Position {
    let h = ((p - span_lo) / (span_hi - span_lo)).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = (h.floor() as usize).min(n - 1);
    Position { lo, frac: h - lo as f64 }
}

/// Interpolated value and the weight actually placed on the upper neighbour.
fn interpolate<T: Real>(sorted: &[T], pos: Position) -> (T, f64) {
    let Position { lo, frac } = pos;
    if lo + 1 >= sorted.len() || frac == 0.0 || sorted[lo] == sorted[lo + 1] {
        return (sorted[lo], 0.0);
    }
    let w = T::lit(frac);
    (sorted[lo] + w * (sorted[lo + 1] - sorted[lo]), frac)
}

fn sorted_copy<T: Real>(sample: &[T]) -> Result<Vec<T>> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(v)
}

fn check_probs(probs: &[f64]) -> Result<()> {
    match probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(&p) => Err(Error::BadProb(p)),
        None => Ok(()),
    }
}

/// Sorted-sample linear interpolation at `h = p (n - 1)`.
pub fn empirical_quantiles<T: Real>(sample: &[T], probs: &[f64]) -> Result<Vec<T>> {
    check_probs(probs)?;
    let sorted = sorted_copy(sample)?;
    Ok(probs.iter().map(|&p| interpolate(&sorted, position(p, 0.0, 1.0, sorted.len())).0).collect())
}

/// Mean squared difference between the batch quantiles and the standard
/// normal targets, with its gradient with respect to each batch element.
///
/// Each bin's residual is routed to the two order statistics it interpolates;
/// at ties and at the ends of the sample the lower one takes the full weight.
pub fn quantile_loss<T: Real>(batch: &[T], table: &QuantileTable) -> Result<(T, Vec<T>)> {
    let n = batch.len();
    let bins = table.n_bins();
    if n < table.min_batch() || n < 2 {
        return Err(Error::BatchTooSmall { got: n, bins, need: table.min_batch().max(2) });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| batch[a].partial_cmp(&batch[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let sorted: Vec<T> = order.iter().map(|&i| batch[i]).collect();

    let (lo_p, hi_p) = (table.spec.p_min, table.spec.p_max);
    let scale = T::lit(2.0) / T::from_usize_lossy(bins);
    let mut loss = T::zero();
    let mut grad_sorted = vec![T::zero(); n];
    for (&p, &target) in table.probs.iter().zip(&table.targets) {
        let pos = position(p, lo_p, hi_p, n);
        let (q, frac) = interpolate(&sorted, pos);
        let r = q - T::lit(target);
        loss += r * r;
        let g = scale * r;
        if frac == 0.0 {
            grad_sorted[pos.lo] += g;
        } else {
            let w = T::lit(frac);
            grad_sorted[pos.lo] += g * (T::one() - w);
            grad_sorted[pos.lo + 1] += g * w;
        }
    }
    let mut grad = vec![T::zero(); n];
    for (k, &i) in order.iter().enumerate() {
        grad[i] = grad_sorted[k];
    }
    Ok((loss / T::from_usize_lossy(bins), grad))
}
