use std::process::{Command, Output};

fn gdcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdcert"))
        .args(args)
        .env_remove("GDCERT_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn rate_examples() {
    let o = gdcert(&["rate", "--N", "3", "--mu", "0", "--L", "1", "--gamma", "1.0", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!((v["tau"].as_f64().unwrap() - 1.0 / 7.0).abs() <= 1e-15);
    assert_eq!(v["branch"], "eta-branch");

    let o = gdcert(&["rate", "--N", "1", "--mu", "0", "--L", "1", "--gamma", "1.9", "--format", "json"]);
    let v = json(&o);
    assert!((v["tau"].as_f64().unwrap() - 0.81).abs() <= 1e-14);
    assert_eq!(v["branch"], "rho-branch");

    let o = gdcert(&["rate", "--N", "3", "--mu", "0", "--L", "1", "--gamma", "1.0"]);
    assert!(stdout(&o).contains("eta-branch"));
}

#[test]
fn invalid_parameters_exit_two() {
    for args in [
        &["rate", "--N", "1", "--mu", "2", "--L", "1", "--gamma", "0.5"][..],
        &["rate", "--N", "0", "--mu", "0", "--L", "1"],
        &["rate", "--N", "1", "--mu", "0", "--L", "1", "--gamma", "2.5"],
        &["certificate", "--N", "2", "--mu", "-0.1", "--L", "1"],
        &["table", "--N", "2", "--mu", "0", "--L", "0"],
        &["rate", "--mu", "0", "--L", "1"],
        &["frobnicate"],
    ] {
        let o = gdcert(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn gamma_star_is_echoed() {
    let o = gdcert(&["gamma-star", "--N", "1", "--mu", "0", "--L", "1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!((v["gamma_star"].as_f64().unwrap() - 1.5).abs() <= 1e-12);
}

#[test]
fn certificate_examples() {
    let o = gdcert(&["certificate", "--N", "5", "--mu", "0.1", "--L", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["verdicts"]["all_pass"], true);
    assert_eq!(v["psd"], true);
    let delta = v["delta"].as_array().unwrap();
    assert_eq!(delta.len(), 5);
    assert!(delta.iter().all(|d| d.as_f64().unwrap() >= 0.0));

    let o = gdcert(&["certificate", "--N", "3", "--mu", "0", "--L", "1", "--gamma", "0.7"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["eff"]["which_moved"], "l-raised");
    assert!(v["eff"]["L_eff"].as_f64().unwrap() > 1.0);

    let o = gdcert(&["certificate", "--N", "5", "--mu", "0.1", "--L", "1", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    let v = json(&o);
    assert_eq!(v["fault_injected"], true);
    assert_eq!(v["psd"], false);
}

#[test]
fn table_grid_matches_reference_values() {
    let o = gdcert(&["table", "--N", "5", "--mu", "0.1", "--L", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines[0].split_whitespace().collect::<Vec<_>>(), ["*", "0", "1", "2", "3", "4", "5"]);
    let row = |label: &str| -> Vec<String> {
        let l = lines[1..].iter().find(|l| l.split_whitespace().next() == Some(label)).unwrap();
        l.split_whitespace().skip(1).map(String::from).collect()
    };
    assert_eq!(row("*"), ["0.0000", "0.0384", "0.0621", "0.1063", "0.1873", "0.3342", "0.2718"]);
    assert_eq!(row("3")[5], "0.2876");
    assert_eq!(row("4")[6], "0.6719");
    assert_eq!(row("0")[2], "0.0182");
}

#[test]
fn table_csv_is_parseable() {
    let o = gdcert(&["table", "--N", "1", "--mu", "0", "--L", "1", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let mut rd = csv::Reader::from_reader(o.stdout.as_slice());
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(&header[1..], ["*", "0", "1"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let labels: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(labels, ["*", "0", "1"]);
    let m: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().skip(1).map(|x| x.parse().unwrap()).collect()).collect();
    // column sum − row sum: −1 at *, +1 at N, 0 elsewhere
    let balance = |k: usize| (0..3).map(|i| m[i][k]).sum::<f64>() - m[k].iter().sum::<f64>();
    assert!((balance(0) + 1.0).abs() <= 1e-15);
    assert!(balance(1).abs() <= 1e-15);
    assert!((balance(2) - 1.0).abs() <= 1e-15);
}

#[test]
fn lambda_document_reports_checks() {
    let o = gdcert(&["lambda", "--N", "3", "--mu", "0.2", "--L", "1", "--gamma", "0.9"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["diagnostics"]["pass"], true);
    assert_eq!(v["lambda"].as_array().unwrap().len(), 5);
}

#[test]
fn verify_example_passes() {
    let o = gdcert(&["verify", "--N", "4", "--mu", "0.05", "--L", "1", "--trials", "10000", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let s = stdout(&o);
    assert!(s.contains("[PASS]") && !s.contains("[FAIL]"));
}

#[test]
fn simulate_examples() {
    let o = gdcert(&["simulate", "--N", "6", "--mu", "0", "--L", "1", "--gamma", "0.9", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!((v["tightness"]["ratio"].as_f64().unwrap() - 1.0).abs() <= 1e-9);

    let o = gdcert(&["simulate", "--N", "3", "--mu", "0.1", "--L", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("n/a (mu>0)"));

    let o = gdcert(&["simulate", "--N", "2", "--mu", "0", "--L", "1", "--gamma", "1", "--format", "csv"]);
    let mut rd = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(rd.records().count(), 3);
}

#[test]
fn same_seed_gives_identical_json() {
    for cmd in ["certificate", "verify", "simulate"] {
        let args = [cmd, "--N", "3", "--mu", "0.1", "--L", "1", "--trials", "500", "--seed", "5", "--format", "json"];
        let a = gdcert(&args);
        let b = gdcert(&args);
        assert_eq!(a.status.code(), Some(0), "{cmd}");
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gdcert"))
        .args(["certificate", "--N", "2", "--mu", "0", "--L", "1"])
        .env("GDCERT_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let written = std::fs::read(dir.path().join("certificate.json")).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&written).unwrap();
    assert_eq!(v["verdicts"]["all_pass"], true);

    let path = dir.path().join("t.csv");
    let o = gdcert(&["table", "--N", "2", "--mu", "0", "--L", "1", "--format", "csv", "--output", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("lambda,*,0,1,2"));
}

#[test]
fn json_floats_carry_seventeen_digits() {
    let o = gdcert(&["rate", "--N", "3", "--mu", "0", "--L", "1", "--gamma", "1.0", "--format", "json"]);
    let s = stdout(&o);
    assert!(s.contains("1.4285714285714285e-1"), "{s}");
}
