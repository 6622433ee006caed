//! TP-direct versus PP route on identical held-out steps.
//!
//! Route A: band-limit TP, fit the downscaler on TP pairs, downscale.
//! Route B: encode to PP, band-limit PP, fit on PP pairs, downscale, decode.

use serde::{Deserialize, Serialize};

use super::{apply_downscaler_onto, train_downscaler, DsModel, RidgeConfig};
use crate::blend::{decode, encode};
use crate::error::{Error, Result};
use crate::grid::{GridSeries, STEPS_PER_DAY};
use crate::netcore::PpModel;
use crate::num::Real;
use crate::spectral::{gibbs_metrics, make_pairs, GibbsReport, LowpassSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouteConfig {
    /// Leading share of steps used to fit the downscalers.
    pub train_fraction: f64,
    pub factor: usize,
    pub lowpass: LowpassSpec,
    pub ridge: RidgeConfig,
}

impl Default for RouteConfig {
    fn default() -> Self {
        RouteConfig { train_fraction: 0.75, factor: 4, lowpass: LowpassSpec::default(), ridge: RidgeConfig::default() }
    }
}

impl RouteConfig {
    /// First held-out step for a series of `len` steps, rounded to a whole
    /// day when that leaves both parts non-empty.
    pub fn split(&self, len: usize) -> Result<usize> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!("train_fraction {} outside (0, 1)", self.train_fraction)));
        }
        let raw = len as f64 * self.train_fraction;
        let days = (raw / STEPS_PER_DAY as f64).round() as usize * STEPS_PER_DAY;
        let split = if days > 0 && days < len { days } else { raw.round() as usize };
        if split == 0 || split >= len {
            return Err(Error::InsufficientData(format!("{len} steps cannot be split at {}", self.train_fraction)));
        }
        Ok(split)
    }
}

pub struct RouteComparison {
    /// Held-out HR TP.
    pub truth: GridSeries,
    /// Route A output; may be negative.
    pub route_a: GridSeries,
    /// Route B output; never negative.
    pub route_b: GridSeries,
    /// Index of the first held-out step in the input series.
    pub holdout_start: usize,
    pub gibbs_a: GibbsReport,
    pub gibbs_b: GibbsReport,
    pub model_a: DsModel,
    pub model_b: DsModel,
}

fn mean_gibbs(truth: &GridSeries, out: &GridSeries) -> Result<GibbsReport> {
    let reports = (0..truth.len()).map(|i| gibbs_metrics(&truth.grid(i), &out.grid(i))).collect::<Result<Vec<_>>>()?;
    Ok(GibbsReport::mean(&reports))
}

/// Fits one downscaler on the training steps of `hr` and applies it to the
/// band-limited held-out steps.
fn one_route(hr: &GridSeries, split: usize, cfg: &RouteConfig) -> Result<(DsModel, GridSeries)> {
    let train = make_pairs(&hr.slice_steps(0..split)?, cfg.factor, cfg.lowpass)?;
    let model = train_downscaler(&train, cfg.ridge)?;
    drop(train);
    let held = make_pairs(&hr.slice_steps(split..hr.len())?, cfg.factor, cfg.lowpass)?;
    let out = apply_downscaler_onto(&model, &held.lr, hr.geometry())?;
    Ok((model, out))
}

pub fn route_compare<T: Real>(
    tp: &GridSeries,
    vimd: &GridSeries,
    pp_model: &PpModel<T>,
    cfg: &RouteConfig,
) -> Result<RouteComparison> {
    let split = cfg.split(tp.len())?;
    let pp = encode(pp_model, tp, vimd)?;
    let truth = tp.slice_steps(split..tp.len())?;

    let (model_a, route_a) = one_route(tp, split, cfg)?;
    let (model_b, pp_hr) = one_route(&pp, split, cfg)?;
    drop(pp);
    let route_b = decode(pp_model, &pp_hr)?;

    let gibbs_a = mean_gibbs(&truth, &route_a)?;
    let gibbs_b = mean_gibbs(&truth, &route_b)?;
    Ok(RouteComparison { truth, route_a, route_b, holdout_start: split, gibbs_a, gibbs_b, model_a, model_b })
}
