use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn criteval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_criteval"))
        .args(args)
        .env_remove("CRIT_EVAL_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn core_fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(rel)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SCENARIO: &str = r#"{
  "name": "cli",
  "n_frames": 6,
  "ego": {"start": [0, 0], "velocity": [0, 8]},
  "objects": [
    {"id": "lead", "start": [0, 25], "velocity": [0, 4]},
    {"id": "oncoming", "start": [3.5, 45], "velocity": [0, -10]}
  ],
  "random_objects": {"count": 8, "max_speed": 12},
  "seed": 5,
  "detectors": {
    "perfect": {"tp_confidence": {"mean": 1.0, "sigma": 0.0}},
    "noisy": {"center_noise_sigma": 0.8, "fp_rate_per_frame": 1.5, "miss_prob_by_distance": [[0, 0.1], [50, 0.4]]}
  }
}"#;

fn generated(dir: &TempDir) -> PathBuf {
    let spec = dir.path().join("scenario.json");
    fs::write(&spec, SCENARIO).unwrap();
    let out = dir.path().join("gen");
    let o = criteval(&["generate", "--spec", s(&spec), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn generate_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let (ga, gb) = (generated(&a), generated(&b));
    for f in ["gt.json", "pred_perfect.json", "pred_noisy.json"] {
        assert_eq!(fs::read(ga.join(f)).unwrap(), fs::read(gb.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_changes_the_scene() {
    let dir = TempDir::new().unwrap();
    let gen = generated(&dir);
    let spec = dir.path().join("scenario.json");
    let other = dir.path().join("other");
    let o = criteval(&["generate", "--spec", s(&spec), "--seed", "6", "--out", s(&other)]);
    assert!(o.status.success());
    assert_ne!(fs::read(gen.join("gt.json")).unwrap(), fs::read(other.join("gt.json")).unwrap());
}

#[test]
fn perfect_detector_scores_one() {
    let dir = TempDir::new().unwrap();
    let gen = generated(&dir);
    let out = dir.path().join("eval");
    let o = criteval(&[
        "evaluate",
        "--gt",
        s(&gen.join("gt.json")),
        "--pred",
        s(&gen.join("pred_perfect.json")),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("car")).collect();
    assert_eq!(rows.len(), 4, "{text}");
    for row in rows {
        assert!(row.ends_with("1.0000   1.0000"), "{row}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["entries"][0]["ap_crit"], 1.0);
    let csv = fs::read_to_string(out.join("curve_car_l0.5.csv")).unwrap();
    assert!(csv.starts_with("threshold,P,R,P_R,R_S\n"));
}

#[test]
fn empty_detections_score_zero() {
    let dir = TempDir::new().unwrap();
    let gen = generated(&dir);
    let empty = dir.path().join("empty.json");
    fs::write(&empty, r#"{"results": {}}"#).unwrap();
    for style in ["anchored", "devkit"] {
        let o = criteval(&[
            "evaluate",
            "--gt",
            s(&gen.join("gt.json")),
            "--pred",
            s(&empty),
            "--dist-limits",
            "1",
            "--ap-style",
            style,
            "--out",
            s(&dir.path().join(style)),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("0.0000   0.0000"), "{}", stdout(&o));
    }
}

#[test]
fn schema_errors_exit_one_with_the_field() {
    let dir = TempDir::new().unwrap();
    let gen = generated(&dir);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"results": {"cli-000": [{"class": "car", "center": [1, 2], "size": [1.9, 4.6], "yaw": 0}]}}"#)
        .unwrap();
    let o = criteval(&["evaluate", "--gt", s(&gen.join("gt.json")), "--pred", s(&bad), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("confidence"), "{}", stderr(&o));

    let o = criteval(&["evaluate", "--gt", "/does/not/exist.json", "--pred", s(&bad), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/does/not/exist.json"));
}

#[test]
fn invalid_caps_are_rejected() {
    let dir = TempDir::new().unwrap();
    let gen = generated(&dir);
    let gt = gen.join("gt.json");
    let o = criteval(&["evaluate", "--gt", s(&gt), "--pred", s(&gt), "--dmax", "0", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_and_rank() {
    let dir = TempDir::new().unwrap();
    let gen = generated(&dir);
    let grid = dir.path().join("grid.json");
    fs::write(&grid, r#"{"d_values": [10, 20], "r_values": [20], "t_values": [4, 8]}"#).unwrap();
    let run = |threads: &str, out: &Path| {
        Command::new(env!("CARGO_BIN_EXE_criteval"))
            .args([
                "sweep",
                "--gt",
                s(&gen.join("gt.json")),
                "--pred",
                &format!("perfect={}", s(&gen.join("pred_perfect.json"))),
                "--pred",
                &format!("noisy={}", s(&gen.join("pred_noisy.json"))),
                "--grid",
                s(&grid),
                "--out",
                s(out),
            ])
            .env("CRIT_EVAL_THREADS", threads)
            .output()
            .unwrap()
    };
    let (one, three) = (dir.path().join("s1"), dir.path().join("s3"));
    assert!(run("1", &one).status.success());
    assert!(run("3", &three).status.success());
    let csv = fs::read_to_string(one.join("sweep.csv")).unwrap();
    assert_eq!(csv, fs::read_to_string(three.join("sweep.csv")).unwrap());
    assert!(csv.starts_with("detector,class,l,d_max,r_max,t_max,ap,ap_crit\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 4 * 4);
    let rankings: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(one.join("rankings.json")).unwrap()).unwrap();
    assert_eq!(rankings["summary"].as_array().unwrap().len(), 4);

    let o = criteval(&["rank", "--table", s(&one.join("sweep.csv")), "--metric", "ap", "--dist-limit", "1", "--config", "20,20,8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "car\tl=1\t(20, 20, 8)\tperfect > noisy");

    assert_eq!(run("zero", &dir.path().join("bad")).status.code(), Some(1));
}

#[test]
fn rank_reproduces_the_divergence() {
    let dir = TempDir::new().unwrap();
    let grid = dir.path().join("grid.json");
    fs::write(&grid, r#"{"d_values": [20], "r_values": [20], "t_values": [8]}"#).unwrap();
    let out = dir.path().join("sweep");
    let o = criteval(&[
        "sweep",
        "--gt",
        s(&core_fixture("divergence/gt.json")),
        "--pred",
        &format!("A={}", s(&core_fixture("divergence/det_a.json"))),
        "--pred",
        &format!("B={}", s(&core_fixture("divergence/det_b.json"))),
        "--dist-limits",
        "1",
        "--grid",
        s(&grid),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = out.join("sweep.csv");
    let ap = criteval(&["rank", "--table", s(&table), "--metric", "ap"]);
    let crit = criteval(&["rank", "--table", s(&table), "--metric", "ap_crit"]);
    assert!(stdout(&ap).trim().ends_with("B > A"));
    assert!(stdout(&crit).trim().ends_with("A > B"));
}

#[test]
fn birdview_matches_the_golden_file() {
    let dir = TempDir::new().unwrap();
    let o = criteval(&[
        "birdview",
        "--gt",
        s(&core_fixture("head_on/gt.json")),
        "--pred",
        s(&core_fixture("head_on/pred.json")),
        "--frame",
        "head-on-000",
        "--weight",
        "kappa",
        "--dmax",
        "30",
        "--class",
        "car",
        "--out",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = fs::read_to_string(dir.path().join("head-on-000_kappa.svg")).unwrap();
    assert_eq!(svg, fs::read_to_string(core_fixture("head_on/birdview_kappa.svg")).unwrap());
    let json = fs::read_to_string(dir.path().join("head-on-000_kappa.json")).unwrap();
    assert_eq!(json, fs::read_to_string(core_fixture("head_on/birdview_kappa.json")).unwrap());
}

#[test]
fn birdview_overlays() {
    let dir = TempDir::new().unwrap();
    let gt = core_fixture("head_on/gt.json");
    let o = criteval(&["birdview", "--gt", s(&gt), "--frame", "head-on-000", "--weight", "kappa_t", "--out", s(dir.path())]);
    assert!(o.status.success());
    let data: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("head-on-000_kappa_t.json")).unwrap()).unwrap();
    let labels: Vec<&str> = data["boxes"].as_array().unwrap().iter().map(|b| b["label"].as_str().unwrap()).collect();
    // Oncoming, parked (zero relative velocity), receding.
    assert_eq!(labels, ["0.94", "0.00", "0.00"]);

    let o = criteval(&["birdview", "--gt", s(&gt), "--frame", "missing", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing"));
}
