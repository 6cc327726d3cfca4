use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SWEEP: &str = r#"
[params]
gamma = 1.0
beta = 1.0

[grid]
modes = 16

[[sweep]]
k = [0.07, 0.09]
P = [1e-4, 1e-3]
k_samples = 2
P_samples = 2
"#;

fn ostwave(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ostwave"))
        .args(args)
        .env("OSTWAVE_CACHE_DIR", dir.join("cache"))
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn out(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn repeated_solve_is_byte_identical_and_hits_cache() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let args = [
        "--modes",
        "16",
        "--out",
        &out(d, "o"),
        "solve",
        "--k",
        "0.08",
        "--p",
        "1e-3",
    ];
    let first = ostwave(d, &args);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stderr(&first).contains("cache miss"));
    let file = d.join("o/wave-k0.08-P1e-3.json");
    let bytes = fs::read(&file).unwrap();

    let second = ostwave(d, &args);
    assert!(second.status.success());
    assert!(stderr(&second).contains("cache hit"));
    assert_eq!(fs::read(&file).unwrap(), bytes);

    // A fresh solve in a clean cache writes the same bytes.
    let other = TempDir::new().unwrap();
    let fresh_args = [
        "--modes",
        "16",
        "--out",
        &out(other.path(), "o"),
        "solve",
        "--k",
        "0.08",
        "--p",
        "1e-3",
    ];
    assert!(ostwave(other.path(), &fresh_args).status.success());
    assert_eq!(
        fs::read(other.path().join("o/wave-k0.08-P1e-3.json")).unwrap(),
        bytes
    );
    let json: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(json["format_version"], 1);
}

#[test]
fn corrupted_cache_is_rejected_until_forced() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let args = [
        "--modes",
        "16",
        "--out",
        &out(d, "o"),
        "solve",
        "--k",
        "0.08",
        "--p",
        "1e-3",
    ];
    assert!(ostwave(d, &args).status.success());
    let entry = fs::read_dir(d.join("cache"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    fs::write(&entry, "{\"format_version\": 1, \"key\": ").unwrap();

    let bad = ostwave(d, &args);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("invalid"), "{}", stderr(&bad));

    let mut forced = args.to_vec();
    forced.insert(0, "--force");
    let fixed = ostwave(d, &forced);
    assert!(fixed.status.success(), "{}", stderr(&fixed));
    assert!(stderr(&ostwave(d, &args)).contains("cache hit"));
}

#[test]
fn verify_is_deterministic_across_job_counts() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let cfg = config(d, SWEEP);
    let serial = ostwave(
        d,
        &[
            "--config",
            &cfg,
            "--jobs",
            "1",
            "--out",
            &out(d, "a"),
            "verify",
        ],
    );
    assert!(serial.status.success(), "{}", stderr(&serial));
    let parallel = ostwave(
        d,
        &[
            "--config",
            &cfg,
            "--jobs",
            "4",
            "--force",
            "--out",
            &out(d, "b"),
            "verify",
        ],
    );
    assert!(parallel.status.success());
    for f in ["verify.json", "verify.csv", "verify.manifest.json"] {
        assert_eq!(
            fs::read(d.join("a").join(f)).unwrap(),
            fs::read(d.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    // Cached waves give the same numbers as fresh ones.
    let cached = ostwave(d, &["--config", &cfg, "--out", &out(d, "c"), "verify"]);
    assert!(stderr(&cached).contains("cache hit"));
    assert_eq!(
        fs::read(d.join("a/verify.json")).unwrap(),
        fs::read(d.join("c/verify.json")).unwrap()
    );

    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("a/verify.json")).unwrap()).unwrap();
    assert_eq!(report["format_version"], 1);
    assert_eq!(report["summary"]["total"], 4);
    assert_eq!(report["summary"]["hyperbolic"], 4);
    let ks: Vec<f64> = report["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["k"].as_f64().unwrap())
        .collect();
    assert_eq!(ks, [0.07, 0.07, 0.09, 0.09]);
    for r in report["records"].as_array().unwrap() {
        assert!(r["residual"].as_f64().unwrap() <= 1e-6);
        assert_eq!(r["pass"], true);
        assert_eq!(r["row2_residuals"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn empty_sweep_gives_empty_report_and_success() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let cfg = config(d, "[params]\ngamma = 1.0\nbeta = 1.0\n");
    let o = ostwave(d, &["--config", &cfg, "--out", &out(d, "o"), "verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("o/verify.json")).unwrap()).unwrap();
    assert_eq!(report["summary"]["total"], 0);
    assert!(report["records"].as_array().unwrap().is_empty());
    let r = ostwave(d, &["--out", &out(d, "o"), "report"]);
    assert!(r.status.success());
    assert!(d.join("o/classification-map.svg").exists());
}

#[test]
fn failed_checks_exit_one_and_bad_config_exits_two() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let strict = format!("{SWEEP}\n[thresholds]\nidentity = 1e-300\n");
    let cfg = config(d, &strict);
    let o = ostwave(d, &["--config", &cfg, "--out", &out(d, "o"), "verify"]);
    assert_eq!(o.status.code(), Some(1));

    let cfg = config(d, "[params]\ngamma = -1.0\nbeta = 1.0\n");
    assert_eq!(
        ostwave(d, &["--config", &cfg, "stokes-criterion"])
            .status
            .code(),
        Some(2)
    );
    let cfg = config(d, "not toml [");
    assert_eq!(
        ostwave(d, &["--config", &cfg, "stokes-criterion"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ostwave(d, &["--config", "/nonexistent.toml", "verify"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(ostwave(d, &["solve", "--k", "0.1"]).status.code(), Some(2));
}

#[test]
fn whitham_map_flips_at_the_critical_wavenumber() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let cfg = config(
        d,
        "[grid]\nmodes = 16\n\n[[sweep]]\nk = [0.10, 0.14]\nP = [1e-4, 1e-4]\nk_samples = 5\nP_samples = 1\n",
    );
    let o = ostwave(d, &["--config", &cfg, "--out", &out(d, "o"), "whitham"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(d.join("o/whitham-map.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "gamma,beta,k,P,c,W11,W12,W21,W22,re_l1,im_l1,re_l2,im_l2,classification"
    );
    let classes: Vec<&str> = lines.map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(
        classes,
        [
            "hyperbolic",
            "hyperbolic",
            "hyperbolic",
            "elliptic",
            "elliptic"
        ]
    );
}

#[test]
fn stokes_criterion_marks_the_crossing() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let o = ostwave(d, &["--out", &out(d, "o"), "stokes-criterion"]);
    assert!(o.status.success());
    let csv = fs::read_to_string(d.join("o/stokes-criterion.csv")).unwrap();
    let crossings: Vec<&str> = csv.lines().filter(|l| l.ends_with(",true")).collect();
    assert_eq!(crossings.len(), 1);
    let k: f64 = crossings[0].split(',').next().unwrap().parse().unwrap();
    assert!((0.1209..=0.1219).contains(&k), "{k}");

    // Scaling gamma by 16 doubles the critical wavenumber.
    let o = ostwave(
        d,
        &["--gamma", "16", "--out", &out(d, "g"), "stokes-criterion"],
    );
    assert!(o.status.success());
    let csv = fs::read_to_string(d.join("g/stokes-criterion.csv")).unwrap();
    let row = csv.lines().find(|l| l.ends_with(",true")).unwrap();
    let k: f64 = row.split(',').next().unwrap().parse().unwrap();
    assert!((2.0 * 0.1209..=2.0 * 0.1209 + 0.002).contains(&k), "{k}");

    let o = ostwave(
        d,
        &[
            "--beta",
            "0",
            "--out",
            &out(d, "b"),
            "stokes-criterion",
            "--samples",
            "5",
        ],
    );
    assert!(o.status.success());
    let csv = fs::read_to_string(d.join("b/stokes-criterion.csv")).unwrap();
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(1) == Some("0.3333333333333333")));
}

#[test]
fn bloch_writes_curves_summary_and_chart() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let o = ostwave(
        d,
        &[
            "--modes",
            "16",
            "--out",
            &out(d, "o"),
            "bloch",
            "--k",
            "0.08",
            "--p",
            "1e-3",
            "--svg",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(d.join("o/bloch.csv")).unwrap();
    assert!(csv.starts_with("xi,re_l1,im_l1,re_l2,im_l2\n"));
    assert_eq!(csv.lines().count(), 11);
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("o/bloch.json")).unwrap()).unwrap();
    assert_eq!(summary["classification"], "hyperbolic");
    assert!(summary["max_re_in_window"].as_f64().unwrap() < 1e-12);
    assert!(fs::read_to_string(d.join("o/bloch.svg"))
        .unwrap()
        .contains("<polyline"));
}
