//! CSV tables, SVG charts and an index file for one evaluation.
//!
//! Per labelled curve: `psd_<label>.csv` (freq,power,segments),
//! `qq_<label>.csv` (prob,q_cand,q_ref), `extremes_<label>.csv`
//! (lat,lon,count). Shared: `gibbs.csv` (metric,route,value),
//! `summary.csv` (key,value). `index.txt` lists every emitted file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{ExtremeCount, QqData};
use super::psd::PsdCurve;
use super::svg::{BarChart, LineChart};
use crate::error::{Error, Result};
use crate::spectral::GibbsReport;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub psd: Vec<(String, PsdCurve)>,
    pub qq: Vec<(String, QqData)>,
    pub extremes: Vec<(String, ExtremeCount)>,
    pub gibbs: Vec<(String, GibbsReport)>,
    /// Scalar results, written in order.
    pub summary: Vec<(String, f64)>,
}

impl EvalReport {
    pub fn is_empty(&self) -> bool {
        self.psd.is_empty() && self.qq.is_empty() && self.extremes.is_empty() && self.gibbs.is_empty()
    }
}

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() || !label.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_') {
        return Err(Error::InvalidConfig(format!("report label {label:?} must match [a-z0-9_]+")));
    }
    Ok(())
}

fn psd_csv(c: &PsdCurve) -> String {
    let mut s = String::from("freq,power,segments\n");
    for (f, p) in c.freqs.iter().zip(&c.power) {
        let _ = writeln!(s, "{f},{p},{}", c.segments);
    }
    s
}

fn qq_csv(q: &QqData) -> String {
    let mut s = String::from("prob,q_cand,q_ref\n");
    for ((p, c), r) in q.probs.iter().zip(&q.cand).zip(&q.reference) {
        let _ = writeln!(s, "{p},{c},{r}");
    }
    s
}

fn extremes_csv(e: &ExtremeCount) -> String {
    let mut s = String::from("lat,lon,count\n");
    let nlon = e.lon.len();
    for (c, n) in e.counts.iter().enumerate() {
        let _ = writeln!(s, "{},{},{n}", e.lat[c / nlon], e.lon[c % nlon]);
    }
    s
}

fn gibbs_csv(g: &[(String, GibbsReport)]) -> String {
    let mut s = String::from("metric,route,value\n");
    for (route, r) in g {
        if let Some(v) = r.negative_cell_fraction {
            let _ = writeln!(s, "negative_cell_fraction,{route},{v}");
        }
        let _ = writeln!(s, "max_overshoot_ratio,{route},{}", r.max_overshoot_ratio);
        let _ = writeln!(s, "dry_region_ringing_energy,{route},{}", r.dry_region_ringing_energy);
    }
    s
}

/// Writes the report into `dir` (created if needed) and returns the paths
/// written, `index.txt` last. Identical reports give identical bytes.
pub fn emit_report(report: &EvalReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if report.is_empty() {
        return Err(Error::MalformedInput("refusing to emit an empty report".into()));
    }
    for label in report
        .psd
        .iter()
        .map(|x| &x.0)
        .chain(report.qq.iter().map(|x| &x.0))
        .chain(report.extremes.iter().map(|x| &x.0))
        .chain(report.gibbs.iter().map(|x| &x.0))
    {
        check_label(label)?;
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(String, String)> = Vec::new();

    for (label, c) in &report.psd {
        files.push((format!("psd_{label}.csv"), psd_csv(c)));
    }
    if !report.psd.is_empty() {
        let chart = LineChart {
            title: "Temporal power spectral density",
            x_label: "frequency (cycles/day)",
            y_label: "power",
            log_x: true,
            log_y: true,
            series: report
                .psd
                .iter()
                .map(|(l, c)| (l.as_str(), c.freqs.iter().copied().zip(c.power.iter().copied()).skip(1).collect()))
                .collect(),
            diagonal: false,
        };
        files.push(("psd.svg".into(), chart.render()));
    }
    for (label, q) in &report.qq {
        files.push((format!("qq_{label}.csv"), qq_csv(q)));
    }
    if !report.qq.is_empty() {
        let chart = LineChart {
            title: "Q-Q against reference",
            x_label: "reference quantile",
            y_label: "candidate quantile",
            log_x: false,
            log_y: false,
            series: report
                .qq
                .iter()
                .map(|(l, q)| (l.as_str(), q.reference.iter().copied().zip(q.cand.iter().copied()).collect()))
                .collect(),
            diagonal: true,
        };
        files.push(("qq.svg".into(), chart.render()));
    }
    for (label, e) in &report.extremes {
        files.push((format!("extremes_{label}.csv"), extremes_csv(e)));
    }
    if !report.extremes.is_empty() {
        let chart = BarChart {
            title: "Extreme days (all cells)",
            y_label: "cell-days above threshold",
            bars: report.extremes.iter().map(|(l, e)| (l.clone(), e.total() as f64)).collect(),
        };
        files.push(("extremes.svg".into(), chart.render()));
    }
    if !report.gibbs.is_empty() {
        files.push(("gibbs.csv".into(), gibbs_csv(&report.gibbs)));
        let chart = BarChart {
            title: "Dry-region ringing energy",
            y_label: "mean squared value",
            bars: report.gibbs.iter().map(|(l, g)| (l.clone(), g.dry_region_ringing_energy)).collect(),
        };
        files.push(("gibbs.svg".into(), chart.render()));
    }
    if !report.summary.is_empty() {
        let mut s = String::from("key,value\n");
        for (k, v) in &report.summary {
            let _ = writeln!(s, "{k},{v}");
        }
        files.push(("summary.csv".into(), s));
    }

    let mut written = Vec::with_capacity(files.len() + 1);
    let mut index = String::new();
    for (name, body) in &files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        index.push_str(name);
        index.push('\n');
        written.push(path);
    }
    let path = dir.join("index.txt");
    fs::write(&path, index).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
