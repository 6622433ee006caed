//! Joint training of the encoder/decoder pair.
//!
//! Every optimisation step draws a batch of (TP', VIMD') points, runs
//! `PP = encoder(TP', VIMD')` and `TP'_pred = decoder(PP)`, and back-propagates
//! `w_quant * L_quant(PP) + w_rec * L_rec(TP'_pred, TP')` through both
//! networks. The quantile gradient enters at the encoder output, next to the
//! reconstruction gradient coming back out of the decoder.
//!
//! The last `holdout_fraction` of the time steps is held out. After each
//! epoch the held-out points are scored and the best model by held-out total
//! loss is kept.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{reconstruction_loss, total_loss, LossWeights};
use super::normal::ks_statistic_normal;
use super::quantile::{empirical_quantiles, QuantileSpec, QuantileTable};
use crate::error::{Error, Result};
use crate::grid::{FieldKind, GridSeries};
use crate::netcore::{adam_step, init_mlp, Activation, AdamConfig, AdamState, Matrix, Mlp, Normalization, PpModel};
use crate::synth::stream_seed;

/// Fewest valid (TP, VIMD) point pairs accepted for training.
pub const MIN_POINTS: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub w_quant: f64,
    pub w_rec: f64,
    pub quantiles: QuantileSpec,
    pub batch_size: usize,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    /// Peak learning rate; decays to `lr_final` along a half cosine.
    pub lr: f64,
    pub lr_final: f64,
    /// Epochs over which `w_quant` ramps up linearly from zero.
    pub quant_warmup_epochs: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
    pub holdout_fraction: f64,
    /// Cap on held-out points scored per epoch (evenly strided).
    pub holdout_points: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            w_quant: 20.0,
            w_rec: 1.0,
            quantiles: QuantileSpec::default(),
            batch_size: 4096,
            epochs: 60,
            batches_per_epoch: 128,
            lr: 1e-2,
            lr_final: 1e-5,
            quant_warmup_epochs: 10,
            hidden: vec![64, 64],
            seed: 2010,
            holdout_fraction: 0.1,
            holdout_points: 65_536,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.quantiles.validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.w_quant >= 0.0 && self.w_rec >= 0.0) {
            return bad(format!("loss weights must be non-negative, got {} and {}", self.w_quant, self.w_rec));
        }
        if self.batch_size < 4096 {
            return bad(format!("batch_size {} is below 4096", self.batch_size));
        }
        if self.epochs == 0 || self.batches_per_epoch == 0 {
            return bad("epochs and batches_per_epoch must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr_final >= 0.0 && self.lr_final <= self.lr) {
            return bad(format!("learning rates {} -> {} are invalid", self.lr, self.lr_final));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return bad(format!("holdout_fraction {} outside (0, 1)", self.holdout_fraction));
        }
        if self.holdout_points < 2 {
            return bad("holdout_points must be at least 2".into());
        }
        if self.hidden.contains(&0) {
            return bad(format!("hidden widths {:?} contain zero", self.hidden));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("train config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn weights_at(&self, epoch: usize) -> LossWeights {
        let ramp = if self.quant_warmup_epochs == 0 {
            1.0
        } else {
            (epoch as f64 / self.quant_warmup_epochs as f64).min(1.0)
        };
        LossWeights { quant: self.w_quant * ramp, rec: self.w_rec }
    }

    fn lr_at(&self, step: usize, total: usize) -> f64 {
        let t = step as f64 / total.max(1) as f64;
        self.lr_final + 0.5 * (self.lr - self.lr_final) * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

/// Held-out scores of one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_quant: f64,
    pub l_rec: f64,
    pub l_total: f64,
    /// Mean absolute TP' error of the clamped decoder output.
    pub mae: f64,
    pub ks: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub const CSV_HEADER: &'static str = "epoch,l_quant,l_rec,l_total,mae,ks";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{},{},{}", r.epoch, r.l_quant, r.l_rec, r.l_total, r.mae, r.ks);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

/// Scores of the returned model on the held-out steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldoutSummary {
    pub points: usize,
    pub best_epoch: usize,
    pub l_quant: f64,
    pub mae: f64,
    pub ks: f64,
    /// Mean absolute error of decode(encode(TP)) in mm.
    pub raw_mae: f64,
    /// 99th percentile of held-out TP in mm.
    pub tp_p99: f64,
}

pub struct TrainOutcome {
    /// Best model by held-out total loss.
    pub model: PpModel<f64>,
    pub history: TrainHistory,
    pub summary: HoldoutSummary,
    /// Epoch at which a non-finite loss stopped training.
    pub diverged_at: Option<usize>,
}

/// Trains and fails with [`Error::NonFiniteLoss`] on divergence.
pub fn train_pp(tp: &GridSeries, vimd: &GridSeries, config: &TrainConfig) -> Result<(PpModel<f64>, TrainHistory)> {
    let out = train_pp_checkpointed(tp, vimd, config)?;
    match out.diverged_at {
        Some(epoch) => Err(Error::NonFiniteLoss { epoch }),
        None => Ok((out.model, out.history)),
    }
}

struct Pool<'a> {
    tp: &'a GridSeries,
    vimd: &'a GridSeries,
    cells: Vec<usize>,
    steps: std::ops::Range<usize>,
}

impl Pool<'_> {
    fn len(&self) -> usize {
        self.cells.len() * self.steps.len()
    }

    /// (TP, VIMD) of flat point `k`, step-major.
    fn point(&self, k: usize) -> (f64, f64) {
        let step = self.steps.start + k / self.cells.len();
        let cell = self.cells[k % self.cells.len()];
        (self.tp.step(step)[cell], self.vimd.step(step)[cell])
    }
}

fn check_inputs(tp: &GridSeries, vimd: &GridSeries) -> Result<()> {
    if tp.kind() != FieldKind::Tp {
        return Err(Error::KindMismatch { expected: "TP", found: tp.kind().name() });
    }
    if vimd.kind() != FieldKind::Vimd {
        return Err(Error::KindMismatch { expected: "VIMD", found: vimd.kind().name() });
    }
    if !tp.aligned_with(vimd) || tp.geometry().mask() != vimd.geometry().mask() {
        return Err(Error::GeometryMismatch("TP and VIMD series are not aligned".into()));
    }
    Ok(())
}

fn normalization(pool: &Pool) -> Result<Normalization> {
    let (mut wet_sum, mut wet_n) = (0.0, 0usize);
    let (mut v_sum, mut v_sq) = (0.0, 0.0);
    for k in 0..pool.len() {
        let (t, v) = pool.point(k);
        if t > 0.0 {
            wet_sum += t;
            wet_n += 1;
        }
        v_sum += v;
        v_sq += v * v;
    }
    let n = pool.len() as f64;
    let mean = v_sum / n;
    let std = (v_sq / n - mean * mean).max(0.0).sqrt();
    if wet_n == 0 {
        return Err(Error::InsufficientData("training TP has no positive values".into()));
    }
    if !(std > 0.0) {
        return Err(Error::InsufficientData("training VIMD has zero variance".into()));
    }
    Ok(Normalization { tp_scale: wet_sum / wet_n as f64, vimd_mean: mean, vimd_std: std })
}

struct Holdout {
    tp: Vec<f64>,
    vimd: Vec<f64>,
    tpn: Vec<f64>,
}

fn holdout_sample(pool: &Pool, cap: usize, norm: &Normalization) -> Holdout {
    let n = pool.len();
    let m = n.min(cap);
    let (mut tp, mut vimd) = (Vec::with_capacity(m), Vec::with_capacity(m));
    for i in 0..m {
        let (t, v) = pool.point((i as u128 * n as u128 / m as u128) as usize);
        tp.push(t);
        vimd.push(v);
    }
    let tpn = tp.iter().map(|&t| norm.tp(t)).collect();
    Holdout { tp, vimd, tpn }
}

struct Scores {
    record: EpochRecord,
    pp: Vec<f64>,
}

fn score(model: &PpModel<f64>, hold: &Holdout, table: &QuantileTable, w: LossWeights, epoch: usize) -> Result<Scores> {
    let pp = model.encode_points(&hold.tp, &hold.vimd);
    let rec = model.decode_normalized(&pp);
    let l_quant = sample_quantile_loss(&pp, table)?;
    let (l_rec, _) = reconstruction_loss(&rec, &hold.tpn)?;
    let mae = rec.iter().zip(&hold.tpn).map(|(r, t)| (r.max(0.0) - t).abs()).sum::<f64>() / rec.len() as f64;
    let ks = ks_statistic_normal(&pp)?;
    let record = EpochRecord { epoch, l_quant, l_rec, l_total: w.combine(l_quant, l_rec), mae, ks };
    Ok(Scores { record, pp })
}

/// Redraws every bias uniformly in `±1/sqrt(fan_in)`. With zero biases all
/// first-layer units of the one-input decoder share the same centre, and the
/// kink at the wet/dry boundary is learned far more slowly.
fn spread_biases(m: &mut Mlp<f64>, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(m.n_params());
    for layer in m.layers() {
        let limit = 1.0 / (layer.inputs as f64).sqrt();
        params.extend_from_slice(&layer.weights);
        params.extend((0..layer.outputs).map(|_| rng.random_range(-limit..limit)));
    }
    m.set_params(&params)
}

fn all_finite(m: &Mlp<f64>) -> bool {
    m.params().iter().all(|p| p.is_finite())
}

/// Trains and, on divergence, still returns the best model seen so far.
pub fn train_pp_checkpointed(tp: &GridSeries, vimd: &GridSeries, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    check_inputs(tp, vimd)?;
    let cells: Vec<usize> = (0..tp.ncells()).filter(|&c| tp.geometry().is_valid(c)).collect();
    let total_points = cells.len() * tp.len();
    if total_points < MIN_POINTS {
        return Err(Error::InsufficientData(format!("{total_points} valid points, need {MIN_POINTS}")));
    }
    let n_hold = ((tp.len() as f64 * config.holdout_fraction).ceil() as usize).max(1);
    if n_hold >= tp.len() {
        return Err(Error::InsufficientData(format!("{} steps leave nothing to train on", tp.len())));
    }
    let split = tp.len() - n_hold;
    let train = Pool { tp, vimd, cells: cells.clone(), steps: 0..split };
    let held = Pool { tp, vimd, cells, steps: split..tp.len() };
    let norm = normalization(&train)?;
    let hold = holdout_sample(&held, config.holdout_points, &norm);
    let table = config.quantiles.table()?;
    if config.batch_size < table.min_batch() {
        return Err(Error::BatchTooSmall { got: config.batch_size, bins: table.n_bins(), need: table.min_batch() });
    }

    let mut enc_widths = vec![2];
    enc_widths.extend(&config.hidden);
    enc_widths.push(1);
    let mut dec_widths = vec![1];
    dec_widths.extend(&config.hidden);
    dec_widths.push(1);
    let acts = Activation::hidden_tanh(config.hidden.len() + 1);
    let mut encoder = init_mlp(&enc_widths, &acts, stream_seed(config.seed, 0, 101))?;
    let mut decoder = init_mlp(&dec_widths, &acts, stream_seed(config.seed, 0, 102))?;
    spread_biases(&mut encoder, stream_seed(config.seed, 0, 104))?;
    spread_biases(&mut decoder, stream_seed(config.seed, 0, 105))?;
    let mut model = PpModel::new(encoder, decoder, norm)?;

    let adam = AdamConfig { lr: config.lr, beta1: config.adam_beta1, beta2: config.adam_beta2, eps: config.adam_eps };
    let mut enc_state = AdamState::new(model.encoder.n_params(), adam);
    let mut dec_state = AdamState::new(model.decoder.n_params(), adam);
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, 0, 103));
    let final_weights = LossWeights { quant: config.w_quant, rec: config.w_rec };

    let b = config.batch_size;
    let total_steps = config.epochs * config.batches_per_epoch;
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, PpModel<f64>)> = None;
    let mut diverged_at = None;
    let mut inputs = Matrix::zeros(b, 2);
    let mut target = vec![0.0; b];
    let mut step = 0;

    'epochs: for epoch in 0..config.epochs {
        let weights = config.weights_at(epoch);
        for _ in 0..config.batches_per_epoch {
            for i in 0..b {
                let (t, v) = train.point(rng.random_range(0..train.len()));
                let tn = norm.tp(t);
                inputs.data[2 * i] = tn;
                inputs.data[2 * i + 1] = norm.vimd(v);
                target[i] = tn;
            }
            let (pp, enc_cache) = model.encoder.forward(&inputs)?;
            let (rec, dec_cache) = model.decoder.forward(&pp)?;
            let (parts, grads) = total_loss(&pp.data, &rec.data, &target, &table, weights)?;
            if !parts.total.is_finite() {
                diverged_at = Some(epoch);
                break 'epochs;
            }
            let dec_grads = model.decoder.backward(&dec_cache, &Matrix::column(grads.tp_pred))?;
            let mut pp_grad = grads.pp;
            for (g, d) in pp_grad.iter_mut().zip(&dec_grads.input.data) {
                *g += d;
            }
            let enc_grads = model.encoder.backward(&enc_cache, &Matrix::column(pp_grad))?;

            let lr = config.lr_at(step, total_steps);
            enc_state.config.lr = lr;
            dec_state.config.lr = lr;
            let mut p = model.encoder.params();
            adam_step(&mut p, &enc_grads.flat(), &mut enc_state)?;
            model.encoder.set_params(&p)?;
            let mut p = model.decoder.params();
            adam_step(&mut p, &dec_grads.flat(), &mut dec_state)?;
            model.decoder.set_params(&p)?;
            step += 1;
        }
        if !all_finite(&model.encoder) || !all_finite(&model.decoder) {
            diverged_at = Some(epoch);
            break;
        }
        let record = score(&model, &hold, &table, final_weights, epoch)?.record;
        if !record.l_total.is_finite() {
            diverged_at = Some(epoch);
            break;
        }
        history.records.push(record);
        if best.as_ref().is_none_or(|(l, _, _)| record.l_total < *l) {
            best = Some((record.l_total, epoch, model.clone()));
        }
    }

    let Some((_, best_epoch, model)) = best else {
        return Err(Error::NonFiniteLoss { epoch: diverged_at.unwrap_or(0) });
    };
    let scores = score(&model, &hold, &table, final_weights, best_epoch)?;
    let decoded = model.decode_points(&scores.pp);
    let raw_mae = decoded.iter().zip(&hold.tp).map(|(d, t)| (d - t).abs()).sum::<f64>() / decoded.len() as f64;
    let tp_p99 = empirical_quantiles(&hold.tp, &[0.99])?[0];
    let summary = HoldoutSummary {
        points: hold.tp.len(),
        best_epoch,
        l_quant: scores.record.l_quant,
        mae: scores.record.mae,
        ks: scores.record.ks,
        raw_mae,
        tp_p99,
    };
    Ok(TrainOutcome { model, history, summary, diverged_at })
}

/// Quantile loss of a whole sample with `[p_min, p_max]` plotting positions.
pub fn sample_quantile_loss(sample: &[f64], table: &QuantileTable) -> Result<f64> {
    let q = table.sample_quantiles(sample)?;
    Ok(q.iter().zip(&table.targets).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / q.len() as f64)
}
