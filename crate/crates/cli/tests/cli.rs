//! End-to-end checks of the binary: output schemas, determinism, exit
//! codes.

use std::process::{Command, Output};

fn randprod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_randprod"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

#[test]
fn sieve_prints_reference_values() {
    let out = randprod(&["sieve", "--limit", "100", "--check"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("limit=100"), "{text}");
    assert!(text.contains("pi=25"), "{text}");
    assert!(text.contains("psi=94.045"), "{text}");
    assert!(text.contains("check=ok"), "{text}");

    let json = randprod(&["sieve", "--limit", "100", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["pi"], 25);
}

#[test]
fn eval_reproduces_zeta_two() {
    let out = randprod(&[
        "eval",
        "--s",
        "2,0",
        "--theta",
        "0",
        "--nmax",
        "100000",
        "--pmax",
        "100000",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let f_re = v["f"][0].as_f64().unwrap();
    assert!((f_re - 1.644_934).abs() < 1e-4, "f = {f_re}");
}

#[test]
fn mc_runs_are_byte_identical() {
    let args = ["mc", "--seed", "1", "--thetas", "2", "--nmax", "1000"];
    let a = randprod(&args);
    let b = randprod(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("# schema=1\n"), "{text}");
    assert!(text.contains("kind,theta,a,q,sup_normalized,exponent_fit,flags"));
    assert!(text.contains("# summary exponent_fit"));
    // explicit thread counts must not change the bytes
    let c = randprod(&["--threads", "2", "mc", "--seed", "1", "--thetas", "2", "--nmax", "1000"]);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn sum_scan_csv_schema() {
    let out = randprod(&["sum-scan", "--theta", "1/3", "--nmax", "500", "--grid", "list:10,100,500"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema=1"));
    assert_eq!(lines.next(), Some("theta,N,re_S,im_S,abs_S,re_C,im_C,normalized"));
    assert_eq!(text.lines().count(), 2 + 3);
    assert!(text.contains("1/3,10,"));
}

#[test]
fn winding_reports_zero() {
    let out = randprod(&[
        "winding",
        "--rect",
        "1.5,2.5,-1,1",
        "--theta",
        "0.3",
        "--nmax",
        "20000",
        "--pmax",
        "20000",
        "--cutoff",
        "20000",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["nearest"], 0);
    assert!(v["raw"][0].as_f64().unwrap().abs() < 1e-3);
}

#[test]
fn egk_fuzz_and_moments() {
    let out = randprod(&["egk", "fuzz", "--trials", "200", "--ncap", "2000", "--seed", "3"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["ok"], true);

    let dir = std::env::temp_dir().join("randprod_cli_test");
    std::fs::create_dir_all(&dir).unwrap();
    let cells = dir.join("cells.json");
    std::fs::write(&cells, "[[0, 10], [8, 2]]").unwrap();
    let out = randprod(&[
        "egk",
        "moments",
        "--cells",
        cells.to_str().unwrap(),
        "--samples",
        "500",
        "--seed",
        "9",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("M,N,closed_form,mc_estimate,mc_stderr,samples,ok"));
    assert!(text.contains("0,10,4.611111111111111"), "{text}");
}

#[test]
fn continue_carries_strip_flag() {
    let out = randprod(&[
        "continue",
        "--s",
        "0.8,0.5",
        "--theta",
        "0.37",
        "--nmax",
        "50000",
        "--pmax",
        "50000",
        "--cutoff",
        "50000",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let flags = v["flags"].as_array().unwrap();
    assert!(flags.iter().any(|f| f == "heuristic_tail"));
    // f = exp(log_f) never vanishes
    let f = v["f"].as_array().unwrap();
    let norm = (f[0].as_f64().unwrap().powi(2) + f[1].as_f64().unwrap().powi(2)).sqrt();
    assert!(norm > 0.0);
}

#[test]
fn exit_codes_follow_error_taxonomy() {
    // unknown flag -> clap usage error, exit 2
    let out = randprod(&["sieve", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));

    // invalid argument -> 2
    let out = randprod(&["sieve", "--limit", "1"]);
    assert_eq!(out.status.code(), Some(2));

    // domain error (Euler product below the abscissa) -> 2
    let out = randprod(&["eval", "--s", "0.9,0", "--theta", "0.1", "--nmax", "1000", "--pmax", "1000"]);
    assert_eq!(out.status.code(), Some(2));

    // resource limit -> 3 (limit that would blow the 2 GiB budget)
    let out = randprod(&["sieve", "--limit", "2000000000"]);
    assert_eq!(out.status.code(), Some(3));

    // bad theta -> 2
    let out = randprod(&["sum-scan", "--theta", "1.7", "--nmax", "1000"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_dash_and_file_agree() {
    let dir = std::env::temp_dir().join("randprod_cli_test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("scan.csv");
    let to_stdout = randprod(&["sum-scan", "--theta", "0.25", "--nmax", "300", "--grid", "list:10,300"]);
    let to_file = randprod(&[
        "sum-scan",
        "--theta",
        "0.25",
        "--nmax",
        "300",
        "--grid",
        "list:10,300",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(to_file.status.success());
    let file = std::fs::read_to_string(&path).unwrap();
    assert_eq!(stdout(&to_stdout), file);
}

#[test]
fn config_file_overrides_flags() {
    let dir = std::env::temp_dir().join("randprod_cli_test");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, r#"{"format": "json"}"#).unwrap();
    let out = randprod(&[
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "csv",
        "sieve",
        "--limit",
        "50",
    ]);
    assert!(out.status.success());
    // config wins over the flag: JSON, not CSV
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["limit"], 50);
}
