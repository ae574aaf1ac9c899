use std::fs;
use std::process::{Command, Output};

use nhjacobi::io::read_csv;

fn nhjacobi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhjacobi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &[
            "geodesic", "--model", "particle", "--q0", "0,0,0", "--v0", "1,1,0", "--bogus",
        ][..],
        &[
            "geodesic", "--model", "particle", "--q0", "0,x,0", "--v0", "1,1,0",
        ],
        &["geodesic", "--model", "nope", "--q0", "0", "--v0", "1"],
        &[
            "jacobi", "--model", "particle", "--q0", "0,0,0", "--v0", "1,1,0", "--w0", "0,0,1",
            "--method", "euler",
        ],
        &["symmetry", "--model", "particle", "--field", "dw"],
        &["verify", "--model", "sleigh"],
        &["verify", "--criterion", "13"],
        &["frobnicate"],
    ] {
        let o = nhjacobi(args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn dimension_mismatch_is_reported() {
    let o = nhjacobi(&[
        "geodesic", "--model", "particle", "--q0", "0,0,0", "--v0", "1,1",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("dimension mismatch"), "{}", stderr(&o));
}

#[test]
fn inadmissible_initial_velocity_is_rejected() {
    let o = nhjacobi(&[
        "geodesic", "--model", "particle", "--q0", "0,0,0", "--v0", "1,0,0.5",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("constraint row 0"));
}

#[test]
fn divergence_exits_3() {
    let o = nhjacobi(&[
        "geodesic",
        "--model",
        "particle",
        "--q0",
        "0,0,0",
        "--v0",
        "1e200,1e200,0",
        "--dt",
        "0.5",
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn geodesic_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("geo.csv");
    let o = nhjacobi(&[
        "geodesic",
        "--model",
        "particle",
        "--q0",
        "0,0,0",
        "--v0",
        "1,1,0",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(header.join(","), "t,q1,q2,q3,v1,v2,v3,energy,res1");
    assert_eq!(rows.len(), 1001);
    let last = &rows[1000];
    assert_eq!(last[0], 1.0);
    assert!((last[1] - 1f64.asinh()).abs() < 1e-8);
    assert!((last[2] - 1.0).abs() < 1e-8);
    assert!((last[3] - (2f64.sqrt() - 1.0)).abs() < 1e-8);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = [
        "jacobi",
        "--model",
        "disk",
        "--q0",
        "0.1,-0.2,0.3,0",
        "--v0",
        "0.9,0,0.9,0.7",
        "--w0",
        "0.1,0.2,-0.1,0.3",
        "--wd0",
        "0,0.1,0.2,0",
        "--method",
        "fd",
        "--t-end",
        "0.5",
    ];
    let a = nhjacobi(&args);
    let b = nhjacobi(&args);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);

    let v = ["verify", "--criterion", "4", "--format", "json"];
    assert_eq!(nhjacobi(&v).stdout, nhjacobi(&v).stdout);
}

#[test]
fn jacobi_all_writes_three_runs_and_a_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("j.csv");
    let o = nhjacobi(&[
        "jacobi",
        "--model",
        "particle",
        "--q0",
        "0,0.2,0",
        "--v0",
        "1,1,0.2",
        "--w0",
        "0.1,-0.2,0.3",
        "--wd0",
        "0.1,0.1,0.1",
        "--method",
        "all",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cmp: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(cmp["max_dev_direct_lift"].as_f64().unwrap() < 1e-8);
    assert!(cmp["max_dev_direct_fd"].as_f64().unwrap() < 5e-6);
    for m in ["direct", "lift", "fd"] {
        let (h, rows) =
            read_csv(fs::File::open(dir.path().join(format!("j-{m}.csv"))).unwrap()).unwrap();
        assert_eq!(h.join(","), "t,W1,W2,W3,Wd1,Wd2,Wd3,res_lifted,res_jacobi");
        assert_eq!(rows.len(), 1001);
    }
}

#[test]
fn tensors_json_keys() {
    let o = nhjacobi(&["tensors", "--model", "particle", "--q0", "0,0.5,0"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let p = &v["P"];
    assert!((p[0][0].as_f64().unwrap() - 0.8).abs() < 1e-15);
    let g = v["gammaNH"][0][1][0].as_f64().unwrap();
    assert!((g - 1.0 / 1.5625).abs() < 1e-12);
    assert_eq!(v["torsion"].as_array().unwrap().len(), 3);
}

#[test]
fn symmetry_report_for_counterexample() {
    let o = nhjacobi(&[
        "symmetry",
        "--model",
        "particle",
        "--field",
        "counterexample2",
        "--field-param",
        "u=0.5",
        "--field-param",
        "xdot0=1.25",
        "--q0",
        "0,0.6,0",
        "--v0",
        "1.25,0,0.75",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["audit"]["killing"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert_eq!(v["audit"]["symmetry"], false);
    assert_eq!(v["trajectory"]["pass"], true);
}

#[test]
fn verify_scoping_and_tolerance() {
    let o = nhjacobi(&[
        "verify",
        "--model",
        "disk",
        "--criterion",
        "2",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let checks = v["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        let models = c["models"].as_array().unwrap();
        assert!(
            models
                .iter()
                .any(|m| m.as_str().unwrap().starts_with("disk")),
            "{c}"
        );
    }

    let o = nhjacobi(&["verify", "--criterion", "1", "--tol", "1e-15"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn list_models_includes_lifts() {
    let o = nhjacobi(&["list-models", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&str> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"disk:lift"));
    assert_eq!(names.len(), 8);
}
