use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bilayer_cli::CliError;
use serde_json::Value;

fn bilayer(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bilayer"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn bilayer")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = bilayer(dir, args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn sidecar(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn map_table_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["map", "--a", "1.1:1.2:0.05", "--az", "0.8,0.9", "-o", "m.csv"]);
    let (header, rows) = table(&dir.path().join("m.csv"));
    assert_eq!(header, ["a_z", "a", "r_q"]);
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let v: f64 = r[2].parse().unwrap();
        assert!(v.is_nan() || (0.0..=1.0).contains(&v));
    }
    // a varies fastest.
    assert_eq!(rows[0][0], rows[2][0]);
    assert_ne!(rows[0][1], rows[1][1]);

    let js = sidecar(&dir.path().join("m.json"));
    for key in ["schema_version", "subcommand", "library_version", "threads", "config", "columns", "rows", "results"] {
        assert!(js.get(key).is_some(), "missing {key}");
    }
    assert_eq!(js["subcommand"], "map");
    assert_eq!(js["rows"], 6);
    assert_eq!(js["results"]["shape"], serde_json::json!([2, 3]));
    assert_eq!(js["config"]["geometry"]["a"], "1.1:1.2:0.05");
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["map", "--a", "1.0:1.4:0.1", "--az", "0.5:1.5:0.25", "--q", "pi", "--threads", "1"];
    ok(dir.path(), &[&args[..], &["-o", "x.csv"]].concat());
    ok(dir.path(), &[&args[..], &["-o", "y.csv"]].concat());
    let x = fs::read(dir.path().join("x.csv")).unwrap();
    assert_eq!(x, fs::read(dir.path().join("y.csv")).unwrap());
    let (mut jx, mut jy) = (sidecar(&dir.path().join("x.json")), sidecar(&dir.path().join("y.json")));
    jx["config"]["output"].take();
    jy["config"]["output"].take();
    assert_eq!(jx, jy);
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "[geometry]\nkind = \"triangular\"\na = \"1.2\"\n[bilayer]\naz = [0.7, 0.8]\n",
    )
    .unwrap();
    ok(dir.path(), &["map", "--config", "run.toml", "--a", "1.3", "-o", "c.csv"]);
    let js = sidecar(&dir.path().join("c.json"));
    assert_eq!(js["config"]["geometry"]["kind"], "triangular");
    assert_eq!(js["config"]["geometry"]["a"], "1.3");
    assert_eq!(js["rows"], 2);
}

#[test]
fn invalid_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.toml"), "[geometry]\nbogus = 1\n").unwrap();
    let cases: [&[&str]; 6] = [
        &["map", "--a", "1.1", "--az", "-1"],
        &["map", "--config", "bad.toml", "--a", "1.1", "--az", "0.9"],
        &["map", "--config", "missing.toml"],
        &["frobnicate"],
        &["scatter", "--N", "10"],
        &["curves", "--q", "pi", "--nc", "0"],
    ];
    for args in cases {
        let out = bilayer(d, args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let out = bilayer(d, &["map", "--a", "1.1", "--az", "-1"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bilayer.az"));
    assert!(!d.join("map.csv").exists());
    assert_eq!(bilayer(d, &["--help"]).status.code(), Some(0));
}

#[test]
fn numerical_failures_map_to_exit_two() {
    // No input reaches these through the binary; the mapping is checked here.
    let e: CliError = bilayer_core::Error::NonConvergence("bracket".into()).into();
    assert_eq!(e.exit_code(), 2);
    let e: CliError = bilayer_core::Error::SingularSystem { pivot: 0.0 }.into();
    assert_eq!(e.exit_code(), 2);
    let e: CliError = bilayer_core::Error::Domain("x".into()).into();
    assert_eq!(e.exit_code(), 1);
}

#[test]
fn curves_and_sets_formats() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["curves", "--az", "0.5:3.0:0.1", "--q", "pi", "-o", "c.csv"]);
    let (header, rows) = table(&dir.path().join("c.csv"));
    assert_eq!(header, ["a_z", "a"]);
    let js = sidecar(&dir.path().join("c.json"));
    let branches = js["results"]["branches"].as_array().unwrap();
    let ncs: Vec<u64> = branches.iter().map(|b| b["n_c"].as_u64().unwrap()).collect();
    assert_eq!(ncs, [1, 2]);
    let total: u64 = branches.iter().map(|b| b["rows"].as_u64().unwrap()).sum();
    assert_eq!(total as usize, rows.len());

    ok(dir.path(), &["sets", "--shift", "0.5,0.5", "--resolution", "120", "-o", "s.csv"]);
    let (header, rows) = table(&dir.path().join("s.csv"));
    assert_eq!(header, ["a", "a_z", "residual", "q", "d1", "d2"]);
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[3] == "0" && r[4] == "5.0000000000000000e-1"));

    ok(dir.path(), &["sets", "--kind", "triangular", "--q", "pi", "--resolution", "120", "-o", "t.csv"]);
    let (_, rows) = table(&dir.path().join("t.csv"));
    assert!(rows.iter().all(|r| r[3] == "pi"));
}

#[test]
fn scatter_and_scaling() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["scatter", "--N", "16,36", "-o", "s.csv"]);
    let (header, rows) = table(&dir.path().join("s.csv"));
    assert_eq!(header, ["N", "delta_star", "re_t", "im_t", "re_r", "im_r", "r_q", "one_minus_r_q"]);
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let v: Vec<f64> = r.iter().map(|x| x.parse().unwrap()).collect();
        assert!((v[6] + v[7] - 1.0).abs() < 1e-12);
    }
    let js = sidecar(&dir.path().join("s.json"));
    assert_eq!(js["results"]["runs"].as_array().unwrap().len(), 2);
    assert!(js["results"].get("infinite_array").is_some());

    ok(dir.path(), &["scaling", "--N", "16,25,36,49", "-o", "f.csv"]);
    let (_, rows) = table(&dir.path().join("f.csv"));
    assert_eq!(rows.len(), 4);
}

#[test]
fn memory_exports_mode_function() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["memory", "--tau", "1,10", "--mode-tau", "10", "--mode-out", "f.csv", "-o", "m.csv"]);
    let (header, rows) = table(&dir.path().join("m.csv"));
    assert_eq!(header, ["tau_Gamma1D", "one_minus_rf_numeric", "one_minus_rf_eq18"]);
    assert_eq!(rows.len(), 2);
    let (header, f) = table(&dir.path().join("f.csv"));
    assert_eq!(header, ["t", "re_f", "im_f"]);
    assert_eq!(f.len(), 2001);
    // Trapezoid norm of the sampled f(t); the default grid resolves a τ = 10 pulse.
    let pts: Vec<[f64; 3]> = f.iter().map(|r| [0, 1, 2].map(|i| r[i].parse().unwrap())).collect();
    let norm: f64 = pts
        .windows(2)
        .map(|w| 0.5 * (w[1][0] - w[0][0]) * (w[0][1].powi(2) + w[0][2].powi(2) + w[1][1].powi(2) + w[1][2].powi(2)))
        .sum();
    assert!((norm - 1.0).abs() < 1e-4, "norm {norm}");
    let js = sidecar(&dir.path().join("m.json"));
    let mf = &js["results"]["mode_function"];
    assert!((mf["norm"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert_eq!(mf["path"], "f.csv");
}

#[test]
fn lightshift_near_estimate() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["lightshift", "-o", "l.csv"]);
    let (_, rows) = table(&dir.path().join("l.csv"));
    let v: Vec<f64> = rows[0].iter().map(|x| x.parse().unwrap()).collect();
    assert_eq!(v[0], 100.0);
    assert!((v[1] / v[3] - 1.0).abs() < 0.2);
    assert!(v[5].abs() < 1e-12);
}

#[test]
fn check_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["check", "--samples", "10", "-o", "c.csv"]);
    let (header, rows) = table(&dir.path().join("c.csv"));
    assert_eq!(header, ["check", "passed", "worst", "tolerance"]);
    assert!(rows.len() >= 7);
    assert!(rows.iter().all(|r| r[1] == "true"));
    assert_eq!(sidecar(&dir.path().join("c.json"))["results"]["failed"], serde_json::json!([]));
}
