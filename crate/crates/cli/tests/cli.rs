use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pseudoprecip");

const SMALL: &[&str] = &[
    "synth.nlat=32",
    "synth.nlon=32",
    "synth.nsteps=256",
    "train.epochs=1",
    "train.batches_per_epoch=4",
    "eval.psd_segment=32",
];

fn pp(out: &Path, args: &[&str], extra: &[&str]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).arg("--out").arg(out);
    for s in SMALL.iter().chain(extra) {
        cmd.arg("--set").arg(s);
    }
    cmd.output().unwrap()
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = pp(out, args, &[]);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn gen_is_deterministic_and_creates_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a/deep"), dir.path().join("b"));
    let line = ok(&a, &["gen"]);
    assert!(line.starts_with("gen steps=256 "), "{line}");
    ok(&b, &["gen"]);
    for f in ["tp.ppg", "vimd.ppg"] {
        assert_eq!(std::fs::read(a.join("data").join(f)).unwrap(), std::fs::read(b.join("data").join(f)).unwrap());
    }
    // a different seed changes the fields
    let c = dir.path().join("c");
    let o = Command::new(BIN).args(["gen", "--seed", "3", "--out"]).arg(&c).args(SMALL.iter().flat_map(|s| ["--set", s])).output().unwrap();
    assert!(o.status.success());
    assert_ne!(std::fs::read(a.join("data/tp.ppg")).unwrap(), std::fs::read(c.join("data/tp.ppg")).unwrap());
}

#[test]
fn partial_days_are_warned_about() {
    let dir = tempfile::tempdir().unwrap();
    let o = pp(dir.path(), &["gen"], &["synth.nsteps=260"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
}

#[test]
fn missing_vimd_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen"]);
    std::fs::remove_file(dir.path().join("data/vimd.ppg")).unwrap();
    let o = pp(dir.path(), &["train-pp"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("vimd.ppg"), "{}", stderr(&o));
}

#[test]
fn inputs_are_checked_by_content_not_name() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen"]);
    let data = dir.path().join("data");
    // VIMD under the TP name is caught by its header
    std::fs::copy(data.join("vimd.ppg"), data.join("tp.ppg")).unwrap();
    let o = pp(dir.path(), &["make-pairs", "--field", "tp"], &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("VIMD"), "{}", stderr(&o));
    std::fs::write(data.join("tp.ppg"), b"not a grid").unwrap();
    assert_eq!(pp(dir.path(), &["make-pairs", "--field", "tp"], &[]).status.code(), Some(4));
}

#[test]
fn bad_config_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pp(dir.path(), &["gen"], &["synth.bogus=1"]).status.code(), Some(4));
    assert_eq!(pp(dir.path(), &["gen"], &["pairs.factor=3"]).status.code(), Some(4));
    let o = Command::new(BIN).args(["gen", "--config"]).arg(dir.path().join("none.json")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn staged_pipeline_runs_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(out, &["gen"]);
    let line = ok(out, &["train-pp"]);
    let last = line.lines().last().unwrap();
    let fields: Vec<&str> = last.split(' ').collect();
    assert_eq!(fields.len(), 2, "{last}");
    assert!(fields[0].strip_prefix("ks=").unwrap().parse::<f64>().is_ok());
    assert!(fields[1].strip_prefix("mae=").unwrap().parse::<f64>().is_ok());
    let model = std::fs::read(out.join("data/model.ppm")).unwrap();
    ok(out, &["train-pp"]);
    assert_eq!(std::fs::read(out.join("data/model.ppm")).unwrap(), model);

    ok(out, &["encode"]);
    for field in ["tp", "pp"] {
        ok(out, &["make-pairs", "--field", field]);
        ok(out, &["train-ds", "--field", field]);
        ok(out, &["downscale", "--field", field]);
    }
    let hr = std::fs::read(out.join("data/tp_hr.ppg")).unwrap();
    ok(out, &["downscale", "--field", "tp"]);
    assert_eq!(std::fs::read(out.join("data/tp_hr.ppg")).unwrap(), hr);

    ok(out, &["decode"]);
    // decode refuses anything that is not PP
    let o = pp(out, &["decode", "--input", out.join("data/tp.ppg").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("expected PP"), "{}", stderr(&o));

    let line = ok(out, &["evaluate"]);
    assert!(line.starts_with("evaluate "), "{line}");
    let gibbs = std::fs::read_to_string(out.join("report/gibbs.csv")).unwrap();
    assert!(gibbs.contains("negative_cell_fraction,route_a,"), "{gibbs}");
    assert!(gibbs.contains("negative_cell_fraction,route_b,0\n"), "{gibbs}");
    let index = std::fs::read_to_string(out.join("report/index.txt")).unwrap();
    for name in index.lines() {
        assert!(out.join("report").join(name).is_file(), "{name}");
    }

    let before = std::fs::read(out.join("report/summary.csv")).unwrap();
    std::fs::remove_file(out.join("report/summary.csv")).unwrap();
    let line = ok(out, &["report"]);
    assert!(line.starts_with("report files="), "{line}");
    assert_eq!(std::fs::read(out.join("report/summary.csv")).unwrap(), before);
}
