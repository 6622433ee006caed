use super::quantile::{quantile_loss, QuantileTable};
use crate::error::{Error, Result};
use crate::num::Real;

/// Mean squared error and its gradient with respect to `pred`.
pub fn reconstruction_loss<T: Real>(pred: &[T], truth: &[T]) -> Result<(T, Vec<T>)> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!("{} predictions for {} targets", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = T::from_usize_lossy(pred.len());
    let two_over_n = T::lit(2.0) / n;
    let mut loss = T::zero();
    let grad = pred
        .iter()
        .zip(truth)
        .map(|(&p, &t)| {
            let d = p - t;
            loss += d * d;
            two_over_n * d
        })
        .collect();
    Ok((loss / n, grad))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub quant: f64,
    pub rec: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { quant: 20.0, rec: 1.0 }
    }
}

impl LossWeights {
    pub fn combine(&self, l_quant: f64, l_rec: f64) -> f64 {
        self.quant * l_quant + self.rec * l_rec
    }
}

/// Component and weighted losses of one batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts {
    pub quant: f64,
    pub rec: f64,
    pub total: f64,
}

/// Gradients of the weighted total with respect to the encoder output (PP)
/// and the decoder output (TP').
pub struct LossGrads<T> {
    pub pp: Vec<T>,
    pub tp_pred: Vec<T>,
}

pub fn total_loss<T: Real>(
    pp: &[T],
    tp_pred: &[T],
    tp_true: &[T],
    table: &QuantileTable,
    weights: LossWeights,
) -> Result<(LossParts, LossGrads<T>)> {
    let (lq, mut gq) = quantile_loss(pp, table)?;
    let (lr, mut gr) = reconstruction_loss(tp_pred, tp_true)?;
    let (wq, wr) = (T::lit(weights.quant), T::lit(weights.rec));
    gq.iter_mut().for_each(|g| *g *= wq);
    gr.iter_mut().for_each(|g| *g *= wr);
    let (quant, rec) = (lq.to_f64_lossy(), lr.to_f64_lossy());
    Ok((LossParts { quant, rec, total: weights.combine(quant, rec) }, LossGrads { pp: gq, tp_pred: gr }))
}
