//! One function per subcommand. Each returns its stdout summary line.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pseudoprecip::blend::{decode, encode, train_pp_checkpointed, HoldoutSummary};
use pseudoprecip::downscale::{
    apply_downscaler_onto, load_downscaler, route_compare, save_downscaler, train_downscaler, RouteComparison,
};
use pseudoprecip::eval::{
    daily_percentile, emit_report, extreme_day_count, qq_data, temporal_psd_cells, EvalReport, ExtremeCount,
};
use pseudoprecip::grid::{
    field_stats, read_derived_series, read_grid_series, write_derived_series, write_grid_series, STEPS_PER_DAY,
};
use pseudoprecip::netcore::{load_model, save_model};
use pseudoprecip::spectral::{coarse_geometry, gibbs_metrics, lowpass_series, make_pairs, GibbsReport, LowpassSpec, PairSet};
use pseudoprecip::synth::synth_tp_vimd;
use pseudoprecip::{Error, FieldKind, GridSeries, PpModel};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Which field a pairs/downscaler stage works on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Field {
    Tp,
    Pp,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::Tp => "tp",
            Field::Pp => "pp",
        }
    }

    fn kind(self) -> FieldKind {
        match self {
            Field::Tp => FieldKind::Tp,
            Field::Pp => FieldKind::Pp,
        }
    }

    fn source(self) -> String {
        format!("{}.ppg", self.name())
    }
}

fn log(stage: &str, msg: impl std::fmt::Display) {
    eprintln!("[{stage}] {msg}");
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
    Ok(())
}

fn expect_kind(series: &GridSeries, kind: FieldKind) -> Result<()> {
    if series.kind() != kind {
        return Err(Error::KindMismatch { expected: kind.name(), found: series.kind().name() }.into());
    }
    Ok(())
}

fn read_kind(path: &Path, kind: FieldKind) -> Result<GridSeries> {
    let s = read_grid_series(path)?;
    expect_kind(&s, kind)?;
    Ok(s)
}

fn read_derived_kind(path: &Path, kind: FieldKind) -> Result<GridSeries> {
    let s = read_derived_series(path)?;
    expect_kind(&s, kind)?;
    Ok(s)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::MalformedInput(format!("{}: {e}", path.display())).into())
}

pub fn gen(cfg: &PipelineConfig) -> Result<String> {
    let t = Instant::now();
    ensure_dir(&cfg.paths.data_dir)?;
    if !cfg.synth.nsteps.is_multiple_of(STEPS_PER_DAY) {
        log(
            "gen",
            format!(
                "warning: {} steps is not a whole number of days; extreme-day counts will drop the last partial day",
                cfg.synth.nsteps
            ),
        );
    }
    let (tp, vimd) = synth_tp_vimd(&cfg.synth)?;
    write_grid_series(&tp, cfg.data("tp.ppg"))?;
    write_grid_series(&vimd, cfg.data("vimd.ppg"))?;
    let (st, sv) = (field_stats(&tp), field_stats(&vimd));
    log("gen", format!("TP {st}"));
    log("gen", format!("VIMD {sv}"));
    log("gen", format!("done in {:.1} s", t.elapsed().as_secs_f64()));
    Ok(format!(
        "gen steps={} nlat={} nlon={} tp_mean={} tp_wet={} vimd_mean={} vimd_std={}",
        tp.len(),
        tp.nlat(),
        tp.nlon(),
        st.mean,
        st.wet_fraction.unwrap_or(0.0),
        sv.mean,
        sv.std
    ))
}

/// Contents of `train_summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub holdout: HoldoutSummary,
    pub epochs_run: usize,
    pub diverged_at: Option<usize>,
}

pub fn train_pp(cfg: &PipelineConfig) -> Result<String> {
    let t = Instant::now();
    let tp = read_kind(&cfg.data("tp.ppg"), FieldKind::Tp)?;
    let vimd = read_kind(&cfg.data("vimd.ppg"), FieldKind::Vimd)?;
    log("train-pp", format!("{} steps, {} epochs x {} batches", tp.len(), cfg.train.epochs, cfg.train.batches_per_epoch));
    let out = train_pp_checkpointed(&tp, &vimd, &cfg.train)?;
    for r in &out.history.records {
        log(
            "train-pp",
            format!("epoch {} l_quant={:.3e} mae={:.3e} ks={:.4}", r.epoch, r.l_quant, r.mae, r.ks),
        );
    }
    let model_path = cfg.data("model.ppm");
    save_model(&out.model, &model_path)?;
    out.history.write_csv(cfg.data("history.csv"))?;
    let summary =
        TrainSummary { holdout: out.summary, epochs_run: out.history.records.len(), diverged_at: out.diverged_at };
    write_json(&summary, &cfg.data("train_summary.json"))?;
    log("train-pp", format!("done in {:.1} s", t.elapsed().as_secs_f64()));
    if let Some(epoch) = out.diverged_at {
        return Err(CliError::Diverged { epoch, checkpoint: model_path.display().to_string() });
    }
    let h = &out.summary;
    log(
        "train-pp",
        format!(
            "best epoch {} l_quant={:e} raw_mae={} mm (tp_p99={} mm)",
            h.best_epoch, h.l_quant, h.raw_mae, h.tp_p99
        ),
    );
    Ok(format!("ks={} mae={}", h.ks, h.mae))
}

fn load_pp_model(cfg: &PipelineConfig) -> Result<PpModel> {
    Ok(load_model(cfg.data("model.ppm"))?)
}

pub fn encode_stage(cfg: &PipelineConfig) -> Result<String> {
    let model = load_pp_model(cfg)?;
    let tp = read_kind(&cfg.data("tp.ppg"), FieldKind::Tp)?;
    let vimd = read_kind(&cfg.data("vimd.ppg"), FieldKind::Vimd)?;
    let pp = encode(&model, &tp, &vimd)?;
    write_grid_series(&pp, cfg.data("pp.ppg"))?;
    let s = field_stats(&pp);
    log("encode", format!("PP {s}"));
    Ok(format!("encode steps={} pp_mean={} pp_std={}", pp.len(), s.mean, s.std))
}

pub fn make_pairs_stage(cfg: &PipelineConfig, field: Field) -> Result<String> {
    let hr = read_kind(&cfg.data(&field.source()), field.kind())?;
    let pairs = make_pairs(&hr, cfg.pairs.factor, cfg.pairs.lowpass)?;
    let name = format!("{}_lr.ppg", field.name());
    // band-limited TP undershoots zero, so the lenient writer is needed
    write_derived_series(&pairs.lr, cfg.data(&name))?;
    Ok(format!(
        "make-pairs field={} factor={} lr_nlat={} lr_nlon={} steps={}",
        field.name(),
        pairs.factor,
        pairs.lr.nlat(),
        pairs.lr.nlon(),
        pairs.lr.len()
    ))
}

/// HR source and its stored LR counterpart, checked against each other.
fn load_pairs(cfg: &PipelineConfig, field: Field) -> Result<PairSet> {
    let hr = read_kind(&cfg.data(&field.source()), field.kind())?;
    let lr = read_derived_kind(&cfg.data(&format!("{}_lr.ppg", field.name())), field.kind())?;
    let want = coarse_geometry(hr.geometry(), cfg.pairs.factor)?;
    if !lr.geometry().same_layout(&want) || lr.len() != hr.len() || lr.t0() != hr.t0() {
        return Err(Error::GeometryMismatch(format!(
            "{}_lr.ppg does not match {} at factor {}",
            field.name(),
            field.source(),
            cfg.pairs.factor
        ))
        .into());
    }
    Ok(PairSet { hr, lr, factor: cfg.pairs.factor })
}

pub fn train_ds_stage(cfg: &PipelineConfig, field: Field) -> Result<String> {
    let pairs = load_pairs(cfg, field)?;
    let split = cfg.route().split(pairs.hr.len())?;
    let train = PairSet {
        hr: pairs.hr.slice_steps(0..split)?,
        lr: pairs.lr.slice_steps(0..split)?,
        factor: pairs.factor,
    };
    let model = train_downscaler(&train, cfg.downscale)?;
    save_downscaler(&model, cfg.data(&format!("ds_{}.ppd", field.name())))?;
    Ok(format!(
        "train-ds field={} steps={} radius={} lambda={}",
        field.name(),
        split,
        model.radius,
        model.lambda
    ))
}

pub fn downscale_stage(cfg: &PipelineConfig, field: Field) -> Result<String> {
    let pairs = load_pairs(cfg, field)?;
    let model = load_downscaler(cfg.data(&format!("ds_{}.ppd", field.name())))?;
    let split = cfg.route().split(pairs.hr.len())?;
    let held = pairs.lr.slice_steps(split..pairs.lr.len())?;
    let out = apply_downscaler_onto(&model, &held, pairs.hr.geometry())?;
    write_derived_series(&out, cfg.data(&format!("{}_hr.ppg", field.name())))?;
    Ok(format!(
        "downscale field={} first_step={} steps={} nlat={} nlon={}",
        field.name(),
        split,
        out.len(),
        out.nlat(),
        out.nlon()
    ))
}

pub fn default_decode_paths(cfg: &PipelineConfig) -> (PathBuf, PathBuf) {
    (cfg.data("pp_hr.ppg"), cfg.data("tp_from_pp_hr.ppg"))
}

pub fn decode_stage(cfg: &PipelineConfig, input: &Path, output: &Path) -> Result<String> {
    let model = load_pp_model(cfg)?;
    let pp = read_derived_series(input)?;
    let tp = decode(&model, &pp)?;
    write_grid_series(&tp, output)?;
    let s = field_stats(&tp);
    Ok(format!("decode steps={} tp_mean={} tp_min={}", tp.len(), s.mean, s.min))
}

/// Valid values of every step, flattened.
fn pooled(series: &GridSeries) -> Vec<f64> {
    let geo = series.geometry();
    series
        .steps()
        .iter()
        .flat_map(|s| s.iter().enumerate().filter(|(c, _)| geo.is_valid(*c)).map(|(_, &v)| v))
        .collect()
}

fn whole_days(series: &GridSeries) -> Result<Option<GridSeries>> {
    let days = series.len() / STEPS_PER_DAY;
    if days == 0 {
        return Ok(None);
    }
    Ok(Some(series.slice_steps(0..days * STEPS_PER_DAY)?))
}

fn mean_gibbs(truth: &GridSeries, filtered: &GridSeries) -> Result<GibbsReport> {
    let reports =
        (0..truth.len()).map(|i| gibbs_metrics(&truth.grid(i), &filtered.grid(i))).collect::<std::result::Result<Vec<_>, Error>>()?;
    Ok(GibbsReport::mean(&reports))
}

/// Brick-wall band-limiting of held-out TP directly and through PP.
fn brickwall_demo(cfg: &PipelineConfig, model: &PpModel, truth: &GridSeries, vimd: &GridSeries) -> Result<[GibbsReport; 2]> {
    let spec = LowpassSpec::brick_wall(cfg.eval.brickwall_cutoff, cfg.pairs.lowpass.pad);
    let tp_filtered = lowpass_series(truth, spec)?;
    let tp_report = mean_gibbs(truth, &tp_filtered)?;
    drop(tp_filtered);
    let pp = encode(model, truth, vimd)?;
    let back = decode(model, &lowpass_series(&pp, spec)?)?;
    Ok([tp_report, mean_gibbs(truth, &back)?])
}

fn extremes(
    truth: &GridSeries,
    cmp: &RouteComparison,
    threshold: f64,
    suffix: &str,
    report: &mut EvalReport,
) -> Result<()> {
    let (Some(t), Some(a), Some(b)) = (whole_days(truth)?, whole_days(&cmp.route_a)?, whole_days(&cmp.route_b)?) else {
        return Ok(());
    };
    let counts: Vec<(String, ExtremeCount)> = [("truth", &t), ("route_a", &a), ("route_b", &b)]
        .into_iter()
        .map(|(l, s)| Ok((format!("{l}{suffix}"), extreme_day_count(s, threshold)?)))
        .collect::<Result<_>>()?;
    let total = counts[0].1.total() as f64;
    report.summary.push((format!("extreme_threshold{suffix}"), threshold));
    for (label, c) in &counts {
        report.summary.push((format!("extreme_total_{label}"), c.total() as f64));
    }
    for (label, c) in &counts[1..] {
        report.summary.push((format!("extreme_abs_err_{label}"), (c.total() as f64 - total).abs()));
    }
    report.extremes.extend(counts);
    Ok(())
}

pub fn evaluate(cfg: &PipelineConfig) -> Result<String> {
    let t = Instant::now();
    let model = load_pp_model(cfg)?;
    let tp = read_kind(&cfg.data("tp.ppg"), FieldKind::Tp)?;
    let vimd = read_kind(&cfg.data("vimd.ppg"), FieldKind::Vimd)?;
    let route = cfg.route();
    let cmp = route_compare(&tp, &vimd, &model, &route)?;
    log("evaluate", format!("routes compared in {:.1} s", t.elapsed().as_secs_f64()));
    let split = cmp.holdout_start;
    let truth = &cmp.truth;
    let mut report = EvalReport::default();
    report.summary.push(("holdout_start".into(), split as f64));
    report.summary.push(("holdout_steps".into(), truth.len() as f64));

    let cells = cfg.eval.probe_indices(truth.nlat(), truth.nlon());
    for (label, s) in [("truth", truth), ("route_a", &cmp.route_a), ("route_b", &cmp.route_b)] {
        report.psd.push((label.into(), temporal_psd_cells(s, &cells, cfg.eval.psd_segment)?));
    }

    let probs = cfg.eval.qq_probs();
    let reference = pooled(truth);
    for (label, s) in [("route_a", &cmp.route_a), ("route_b", &cmp.route_b)] {
        let q = qq_data(&pooled(s), &reference, &probs)?;
        report.summary.push((format!("qq_max_dev_{label}"), q.max_deviation(0.99)));
        report.qq.push((label.into(), q));
    }
    let q99 = report.qq[0].1.reference_at(0.99).unwrap_or(f64::NAN);
    report.summary.push(("qq_ref_q99".into(), q99));
    drop(reference);

    let train_tp = whole_days(&tp.slice_steps(0..split)?)?
        .ok_or_else(|| Error::InsufficientData("training split is shorter than a day".into()))?;
    let scaled = daily_percentile(&train_tp, cfg.eval.extreme_percentile)?;
    drop(train_tp);
    extremes(truth, &cmp, cfg.eval.extreme_threshold_mm, "", &mut report)?;
    extremes(truth, &cmp, scaled, "_scaled", &mut report)?;

    report.gibbs.push(("route_a".into(), cmp.gibbs_a));
    report.gibbs.push(("route_b".into(), cmp.gibbs_b));
    let held_vimd = vimd.slice_steps(split..vimd.len())?;
    let [tp_bw, pp_bw] = brickwall_demo(cfg, &model, truth, &held_vimd)?;
    report.gibbs.push(("tp_brickwall".into(), tp_bw));
    report.gibbs.push(("pp_brickwall".into(), pp_bw));

    if let Ok(ts) = read_json::<TrainSummary>(&cfg.data("train_summary.json")) {
        let h = ts.holdout;
        for (k, v) in [
            ("train_ks", h.ks),
            ("train_mae", h.mae),
            ("train_l_quant", h.l_quant),
            ("train_raw_mae", h.raw_mae),
            ("train_tp_p99", h.tp_p99),
        ] {
            report.summary.push((k.into(), v));
        }
    }

    ensure_dir(&cfg.paths.output_dir)?;
    write_json(&report, &cfg.output("evaluation.json"))?;
    let files = emit_report(&report, &cfg.paths.output_dir)?;
    log("evaluate", format!("{} report files in {:.1} s", files.len(), t.elapsed().as_secs_f64()));
    let get = |k: &str| report.summary.iter().find(|(n, _)| n == k).map_or(f64::NAN, |(_, v)| *v);
    Ok(format!(
        "evaluate holdout_steps={} qq_max_dev_route_a={} qq_max_dev_route_b={} qq_ref_q99={} extreme_abs_err_route_a={} extreme_abs_err_route_b={}",
        truth.len(),
        get("qq_max_dev_route_a"),
        get("qq_max_dev_route_b"),
        q99,
        get("extreme_abs_err_route_a"),
        get("extreme_abs_err_route_b"),
    ))
}

pub fn report(cfg: &PipelineConfig) -> Result<String> {
    let report: EvalReport = read_json(&cfg.output("evaluation.json"))?;
    let files = emit_report(&report, &cfg.paths.output_dir)?;
    let index = files.last().map(|p| p.display().to_string()).unwrap_or_default();
    Ok(format!("report files={} index={index}", files.len()))
}

/// Every stage in pipeline order; stops at the first failure.
pub fn run(cfg: &PipelineConfig, mut emit: impl FnMut(&str)) -> Result<()> {
    emit(&gen(cfg)?);
    emit(&train_pp(cfg)?);
    emit(&encode_stage(cfg)?);
    for field in [Field::Tp, Field::Pp] {
        emit(&make_pairs_stage(cfg, field)?);
        emit(&train_ds_stage(cfg, field)?);
        emit(&downscale_stage(cfg, field)?);
    }
    let (input, output) = default_decode_paths(cfg);
    emit(&decode_stage(cfg, &input, &output)?);
    emit(&evaluate(cfg)?);
    emit(&report(cfg)?);
    Ok(())
}
