//! End-to-end runs of the `eitrecon` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eitrecon::nd_map::NdMatrix;
use eitrecon::reconstruction::ReconResult;
use tempfile::TempDir;

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(cmd: &str, config: &Path, overrides: &[&str]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_eitrecon"));
    c.arg(cmd).arg("--config").arg(config);
    for o in overrides {
        c.arg("--override").arg(o);
    }
    c.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const GRID_3X3: &str = "rows = 3\ncols = 3\nh = 1/24\ngamma = bottom\nM = 8\n";

#[test]
fn validate_reports_orderings() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "v.cfg", GRID_3X3);
    let ok = run("validate", &cfg, &[]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("valid"));

    let bad = run("validate", &cfg, &["order=4,1,0,2,3,5,6,7,8"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("invalid at m=1"), "{}", stdout(&bad));

    let roi = run("validate", &cfg, &["roi=4"]);
    assert_eq!(roi.status.code(), Some(0));
    assert!(stdout(&roi).contains("[1, 4]"), "{}", stdout(&roi));
}

#[test]
fn consistent_round_trip_through_files() {
    let dir = TempDir::new().unwrap();
    let body = "rows = 2\ncols = 2\nh = 1/16\ngamma = bottom, left, top, right\nM = 32\n\
                phantom = 1, 1, 1, 1\ndata_refinement = 0\ndata = nd.txt\nresult = res.txt\n\
                raster = img.pgm\ncsv = values.csv\n";
    let cfg = write_config(dir.path(), "c.cfg", body);
    let sim = run("simulate", &cfg, &[]);
    assert_eq!(sim.status.code(), Some(0), "{}", String::from_utf8_lossy(&sim.stderr));
    let nd = NdMatrix::read_file(&dir.path().join("nd.txt")).unwrap();
    assert_eq!(nd.order(), 32);

    let rec = run("reconstruct", &cfg, &[]);
    assert_eq!(rec.status.code(), Some(0), "{}", String::from_utf8_lossy(&rec.stderr));
    let res = ReconResult::read_file(&dir.path().join("res.txt")).unwrap();
    for o in &res.outcomes {
        assert!((o.value - 1.0).abs() <= 1e-4, "{o:?}");
    }
    let pgm = fs::read_to_string(dir.path().join("img.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n2 2\n255\n"));
    let csv = fs::read_to_string(dir.path().join("values.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "pixel,row,col,value");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0,0,0,"));
}

#[test]
fn msweep_writes_csv() {
    let dir = TempDir::new().unwrap();
    let body = "rows = 1\ncols = 1\nh = 1/16\ngamma = bottom\nM = 4\nphantom = 2\n\
                data_refinement = 0\ndata = nd.txt\nsweep_t = 1, 2, 4\nsweep_M = 1, 2, 4\n";
    let cfg = write_config(dir.path(), "s.cfg", body);
    assert_eq!(run("simulate", &cfg, &[]).status.code(), Some(0));
    let out = run("msweep", &cfg, &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 9);
    for r in rows {
        let t: f64 = r[0].parse().unwrap();
        let holds: bool = r[4].parse().unwrap();
        // Single pixel: the inequality holds exactly when t ≥ γ.
        assert_eq!(holds, t >= 2.0, "{r:?}");
    }
}

#[test]
fn invalid_input_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "rows = 2\ncols = 2\nM = 4\n");
    let out = run("validate", &cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing key"));

    let missing = run("validate", &dir.path().join("nope.cfg"), &[]);
    assert_eq!(missing.status.code(), Some(1));

    let body = format!("{GRID_3X3}phantom = 1,1,1,1,1,1,1,1,1\ndata = nd.txt\ndata_refinement = 0\n");
    let cfg = write_config(dir.path(), "m.cfg", &body);
    assert_eq!(run("simulate", &cfg, &[]).status.code(), Some(0));
    let mismatch = run("reconstruct", &cfg, &["M=6"]);
    assert_eq!(mismatch.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("data error"));
}

#[test]
fn heavy_noise_is_flagged() {
    let dir = TempDir::new().unwrap();
    let body = "rows = 2\ncols = 2\nh = 1/16\ngamma = bottom, left\nM = 8\nphantom = 1, 2, 0.5, 3\n\
                noise = 0.5\nseed = 4\ndata = nd.txt\nresult = res.txt\n";
    let cfg = write_config(dir.path(), "n.cfg", body);
    assert_eq!(run("simulate", &cfg, &[]).status.code(), Some(0));
    let out = run("reconstruct", &cfg, &[]);
    let code = out.status.code().unwrap();
    assert!(code == 0 || code == 2, "{code}");
    let res = ReconResult::read_file(&dir.path().join("res.txt")).unwrap();
    if code == 2 {
        assert!(res.outcomes.iter().any(|o| o.status.to_string() == "BracketCapHit"));
    }
}

#[test]
fn thread_cap_is_honoured() {
    let dir = TempDir::new().unwrap();
    let body = "rows = 1\ncols = 1\nh = 1/16\ngamma = bottom\nM = 4\nphantom = 1.5\ndata = nd.txt\n";
    let cfg = write_config(dir.path(), "t.cfg", body);
    let one = Command::new(env!("CARGO_BIN_EXE_eitrecon"))
        .env("EITRECON_THREADS", "1")
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(one.status.code(), Some(0));
    let first = fs::read(dir.path().join("nd.txt")).unwrap();
    let auto = Command::new(env!("CARGO_BIN_EXE_eitrecon"))
        .env("EITRECON_THREADS", "0")
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(auto.status.code(), Some(0));
    assert_eq!(first, fs::read(dir.path().join("nd.txt")).unwrap());

    let bad = Command::new(env!("CARGO_BIN_EXE_eitrecon"))
        .env("EITRECON_THREADS", "many")
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
