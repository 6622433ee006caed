//! Pipeline configuration: one JSON document per experiment, with dotted
//! `key=value` overrides applied before parsing.

use std::path::{Path, PathBuf};

use pseudoprecip::blend::TrainConfig;
use pseudoprecip::downscale::{RidgeConfig, RouteConfig};
use pseudoprecip::spectral::LowpassSpec;
use pseudoprecip::synth::SynthConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// The configuration shipped with the binary (96 x 96 cells, 2048 steps).
pub const DEFAULT_CONFIG: &str = include_str!("../default_config.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Fields, models and intermediate products.
    pub data_dir: PathBuf,
    /// Evaluation results and the CSV/SVG report.
    pub output_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairsConfig {
    pub factor: usize,
    pub lowpass: LowpassSpec,
}

impl Default for PairsConfig {
    fn default() -> Self {
        PairsConfig { factor: 4, lowpass: LowpassSpec::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Leading share of steps used to fit the downscalers.
    pub train_fraction: f64,
    /// `[row, col]` cells whose time series enter the PSD; empty picks a
    /// 4 x 4 lattice.
    pub probe_cells: Vec<[usize; 2]>,
    /// Fixed daily threshold in mm.
    pub extreme_threshold_mm: f64,
    /// Daily percentile of training TP used as the scaled threshold.
    pub extreme_percentile: f64,
    pub psd_segment: usize,
    /// Q-Q probabilities are `k / qq_points` for `k = 1..qq_points`.
    pub qq_points: usize,
    /// Cutoff (fraction of Nyquist) of the brick-wall ringing demonstration.
    pub brickwall_cutoff: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            train_fraction: 0.75,
            probe_cells: Vec::new(),
            extreme_threshold_mm: 20.0,
            extreme_percentile: 0.995,
            psd_segment: 256,
            qq_points: 200,
            brickwall_cutoff: 0.25,
        }
    }
}

impl EvalConfig {
    pub fn qq_probs(&self) -> Vec<f64> {
        (1..self.qq_points).map(|k| k as f64 / self.qq_points as f64).collect()
    }

    /// Row-major cell indices of the probe cells on an `nlat x nlon` grid.
    pub fn probe_indices(&self, nlat: usize, nlon: usize) -> Vec<usize> {
        if self.probe_cells.is_empty() {
            let rows: Vec<usize> = (0..4).map(|k| (2 * k + 1) * nlat / 8).collect();
            let cols: Vec<usize> = (0..4).map(|k| (2 * k + 1) * nlon / 8).collect();
            return rows.iter().flat_map(|&i| cols.iter().map(move |&j| i * nlon + j)).collect();
        }
        self.probe_cells.iter().map(|[i, j]| i * nlon + j).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Overrides `synth.seed` and `train.seed`; there is no implicit entropy.
    pub seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub pairs: PairsConfig,
    #[serde(default)]
    pub downscale: RidgeConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl PipelineConfig {
    /// Loads `path` (or the bundled default), applies `--set` overrides,
    /// then `--seed` and `--out`, and validates the result.
    pub fn load(path: Option<&Path>, sets: &[String], seed: Option<u64>, out: Option<&Path>) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::Core(pseudoprecip::Error::Io { path: p.to_path_buf(), source: e }))?,
            None => DEFAULT_CONFIG.to_string(),
        };
        let mut doc: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?;
        for s in sets {
            apply_override(&mut doc, s)?;
        }
        let mut cfg: PipelineConfig =
            serde_json::from_value(doc).map_err(|e| CliError::Config(format!("config: {e}")))?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(dir) = out {
            cfg.paths = Paths { data_dir: dir.join("data"), output_dir: dir.join("report") };
        }
        cfg.synth.seed = cfg.seed;
        cfg.train.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.synth.validate()?;
        self.train.validate()?;
        self.pairs.lowpass.validate()?;
        let f = self.pairs.factor;
        if f == 0 || !self.synth.nlat.is_multiple_of(f) || !self.synth.nlon.is_multiple_of(f) {
            return Err(CliError::Config(format!(
                "factor {f} must divide the {}x{} grid",
                self.synth.nlat, self.synth.nlon
            )));
        }
        if !(self.downscale.lambda >= 0.0) {
            return Err(CliError::Config(format!("ridge lambda {} is negative", self.downscale.lambda)));
        }
        let e = &self.eval;
        let split = self.route().split(self.synth.nsteps)?;
        if self.synth.nsteps - split < e.psd_segment {
            return Err(CliError::Config(format!(
                "{} held-out steps are fewer than psd_segment {}",
                self.synth.nsteps - split,
                e.psd_segment
            )));
        }
        if !(e.extreme_percentile > 0.0 && e.extreme_percentile < 1.0) {
            return Err(CliError::Config(format!("extreme_percentile {} outside (0, 1)", e.extreme_percentile)));
        }
        if !(e.extreme_threshold_mm >= 0.0) {
            return Err(CliError::Config("extreme_threshold_mm must be non-negative".into()));
        }
        if e.psd_segment < 2 || e.qq_points < 2 {
            return Err(CliError::Config("psd_segment and qq_points must be at least 2".into()));
        }
        if !(e.brickwall_cutoff > 0.0 && e.brickwall_cutoff <= 1.0) {
            return Err(CliError::Config(format!("brickwall_cutoff {} outside (0, 1]", e.brickwall_cutoff)));
        }
        if let Some([i, j]) = e.probe_cells.iter().find(|[i, j]| *i >= self.synth.nlat || *j >= self.synth.nlon) {
            return Err(CliError::Config(format!("probe cell [{i}, {j}] is off the grid")));
        }
        Ok(())
    }

    pub fn route(&self) -> RouteConfig {
        RouteConfig {
            train_fraction: self.eval.train_fraction,
            factor: self.pairs.factor,
            lowpass: self.pairs.lowpass,
            ridge: self.downscale,
        }
    }

    pub fn data(&self, name: &str) -> PathBuf {
        self.paths.data_dir.join(name)
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.paths.output_dir.join(name)
    }
}

/// Applies one `a.b.c=value` override. The value is parsed as JSON and
/// falls back to a plain string; missing intermediate objects are created.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let keys: Vec<&str> = key.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("override key {key:?} is malformed")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    for k in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("override {key:?} descends into a non-object")))?;
        node = obj.entry(k.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::Config(format!("override {key:?} descends into a non-object")))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_matches_library_defaults() {
        let cfg = PipelineConfig::load(None, &[], None, None).unwrap();
        assert_eq!(cfg.synth, SynthConfig { seed: cfg.seed, ..SynthConfig::default() });
        assert_eq!(cfg.train, TrainConfig { seed: cfg.seed, ..TrainConfig::default() });
        assert_eq!(cfg.pairs, PairsConfig::default());
        assert_eq!(cfg.downscale, RidgeConfig::default());
        assert_eq!(cfg.eval, EvalConfig::default());
        assert_eq!((cfg.synth.nlat, cfg.synth.nlon, cfg.synth.nsteps), (96, 96, 2048));
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let sets = ["synth.nsteps=1024".to_string(), "pairs.lowpass.taper=\"brick_wall\"".to_string()];
        let cfg = PipelineConfig::load(None, &sets, Some(7), Some(Path::new("x"))).unwrap();
        assert_eq!(cfg.synth.nsteps, 1024);
        assert_eq!(cfg.pairs.lowpass.taper, pseudoprecip::spectral::Taper::BrickWall);
        assert_eq!((cfg.seed, cfg.synth.seed, cfg.train.seed), (7, 7, 7));
        assert_eq!(cfg.paths.data_dir, Path::new("x").join("data"));
    }

    #[test]
    fn bare_strings_fall_back_to_text() {
        let mut doc = serde_json::json!({"paths": {"data_dir": "a"}});
        apply_override(&mut doc, "paths.data_dir=some/dir").unwrap();
        assert_eq!(doc["paths"]["data_dir"], "some/dir");
        apply_override(&mut doc, "new.deep.key=3").unwrap();
        assert_eq!(doc["new"]["deep"]["key"], 3);
        assert!(apply_override(&mut doc, "noequals").is_err());
        assert!(apply_override(&mut doc, "paths..x=1").is_err());
    }

    #[test]
    fn unknown_keys_and_missing_seed_are_rejected() {
        assert!(PipelineConfig::load(None, &["synth.nlatt=4".into()], None, None).is_err());
        let mut doc: Value = serde_json::from_str(DEFAULT_CONFIG).unwrap();
        doc.as_object_mut().unwrap().remove("seed");
        assert!(serde_json::from_value::<PipelineConfig>(doc).is_err());
    }

    #[test]
    fn factor_must_divide_the_grid() {
        let err = PipelineConfig::load(None, &["pairs.factor=5".into()], None, None).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn default_probe_lattice_is_inside_the_grid() {
        let cells = EvalConfig::default().probe_indices(96, 96);
        assert_eq!(cells.len(), 16);
        assert!(cells.iter().all(|&c| c < 96 * 96));
        assert_eq!(cells[0], 12 * 96 + 12);
    }
}
