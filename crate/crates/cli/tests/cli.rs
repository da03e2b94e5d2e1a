use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pmcal_cli::report::{AuditReport, PostprocessReport};
use tempfile::TempDir;

fn pmcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmcal")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = pmcal(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn simulated(dir: &TempDir, extra: &[&str]) -> String {
    let p = path(dir, "sim.csv");
    let mut args = vec!["simulate", "--n-groups", "20", "--n-per-group", "500", "-o", &p];
    args.extend_from_slice(extra);
    ok(&args);
    p
}

#[test]
fn audit_of_fixed_scenario_points_at_lowest_rate_group() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, &["--scenario", "fixed", "--seed", "2"]);
    let report = AuditReport::from_json(&ok(&["audit", &data, "--exact", "--gamma", "0.01"])).unwrap();
    assert!((report.pmc_loss.value.unwrap() - 0.5).abs() < 1e-12);
    let w = report
        .witnesses
        .iter()
        .find(|w| w.loss == pmcal::LossKind::Pmc)
        .unwrap();
    let pmcal::metrics::Witness::Category { category } = w.witness else {
        panic!("pmc witness is a category")
    };
    assert_eq!(report.prevalence.groups[category.group_id].label, "group=g01");
    assert_eq!(report.n, 10_000);
    assert_eq!(report.prevalence.groups.len(), 20);
}

#[test]
fn perfectly_calibrated_file_has_zero_losses() {
    let dir = TempDir::new().unwrap();
    let p = path(&dir, "cal.csv");
    let mut s = String::from("y,score,sex\n");
    for (sex, pos) in [("F", 1), ("M", 3)] {
        for i in 0..4 {
            s.push_str(&format!("{},{},{sex}\n", u8::from(i < pos), pos as f64 / 4.0));
        }
    }
    fs::write(&p, s).unwrap();
    let r = AuditReport::from_json(&ok(&["audit", &p, "--gamma", "0", "--rho", "0.1"])).unwrap();
    assert_eq!(r.mc_loss.value, Some(0.0));
    assert_eq!(r.pmc_loss.value, Some(0.0));
    assert_eq!(r.dc_loss.value, Some(0.0));
    assert_eq!(r.prevalence.overall, 0.5);
}

#[test]
fn gamma_above_every_group_gives_null_losses_with_reasons() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, &["--seed", "1"]);
    let json = ok(&["audit", &data, "--gamma", "0.5"]);
    let raw: serde_json::Value = serde_json::from_str(&json).unwrap();
    for key in ["mc_loss", "pmc_loss", "dc_loss"] {
        assert!(raw[key]["value"].is_null());
        assert!(raw[key]["reason"].is_string());
    }
    assert_eq!(raw["witnesses"], serde_json::json!([]));
}

#[test]
fn report_round_trips_and_rejects_other_majors() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, &["--seed", "3"]);
    let json = ok(&["audit", &data, "--marginals", "--bins", "geometric"]);
    let report = AuditReport::from_json(&json).unwrap();
    assert_eq!(pmcal_cli::report::to_json(&report), json);
    let keys: Vec<String> = match serde_json::from_str::<serde_json::Value>(&json).unwrap() {
        serde_json::Value::Object(m) => m.keys().cloned().collect(),
        _ => unreachable!(),
    };
    for k in [
        "n",
        "prevalence",
        "mc_loss",
        "pmc_loss",
        "dc_loss",
        "auroc",
        "witnesses",
        "categories",
    ] {
        assert!(keys.iter().any(|x| x == k), "missing {k}");
    }
    let future = json.replacen("\"schema_version\": \"1.0\"", "\"schema_version\": \"2.0\"", 1);
    assert!(AuditReport::from_json(&future)
        .unwrap_err()
        .to_string()
        .contains("unsupported"));
    let minor = json.replacen("\"schema_version\": \"1.0\"", "\"schema_version\": \"1.3\"", 1);
    assert!(AuditReport::from_json(&minor).is_ok());
}

#[test]
fn postprocess_reaches_the_targeted_loss_on_the_training_rows() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, &["--scenario", "random", "--seed", "5"]);
    for mode in ["pmc", "mc"] {
        let scores = path(&dir, "scores.csv");
        let json = ok(&[
            "postprocess",
            &data,
            "--mode",
            mode,
            "--alpha",
            "0.05",
            "--out-scores",
            &scores,
        ]);
        let r = PostprocessReport::from_json(&json).unwrap();
        assert!(r.trace.converged);
        assert!(r.train.is_none() && r.wall_time_secs.is_none());
        let (before, after) = match mode {
            "pmc" => (&r.before.pmc_loss, &r.after.pmc_loss),
            _ => (&r.before.mc_loss, &r.after.mc_loss),
        };
        assert!(after.value.unwrap() <= before.value.unwrap());
        assert!(after.value.unwrap() < 0.05);
        let lines = fs::read_to_string(&scores).unwrap();
        assert_eq!(lines.lines().count(), 10_001);
        assert!(lines.starts_with("row,fold,score_before,score_after\n1,train,"));
    }
}

#[test]
fn split_reports_on_the_held_out_rows() {
    let dir = TempDir::new().unwrap();
    let data = simulated(&dir, &["--seed", "8"]);
    let json = ok(&["postprocess", &data, "--split", "0.75", "--gamma", "0.02", "--timing"]);
    let r = PostprocessReport::from_json(&json).unwrap();
    assert_eq!((r.train_rows, r.eval_rows), (7500, 2500));
    assert_eq!(r.before.n, 2500);
    let train = r.train.unwrap();
    assert_eq!(train.after.n, 7500);
    assert!(train.after.pmc_loss.value.unwrap() < 0.1);
    assert!(r.wall_time_secs.is_some());
}

#[test]
fn one_pass_is_not_enough_but_still_succeeds() {
    let dir = TempDir::new().unwrap();
    let p = path(&dir, "far.csv");
    // one group, scores spread over every bin, outcomes all positive
    let mut s = String::from("y,score,g\n");
    for i in 0..200 {
        s.push_str(&format!("1,{},a\n", (i % 10) as f64 / 10.0 + 0.05));
    }
    fs::write(&p, s).unwrap();
    let json = ok(&["postprocess", &p, "--max-passes", "1", "--lambda", "0.5"]);
    let r = PostprocessReport::from_json(&json).unwrap();
    assert!(!r.trace.converged);
    assert_eq!(r.trace.passes, 1);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let p = path(&dir, "bad.csv");
    let mut s = String::from("y,score,g\n");
    for _ in 0..6 {
        s.push_str("0,0.5,a\n");
    }
    s.push_str("1,1.3,a\n");
    fs::write(&p, s).unwrap();
    let out = pmcal(&["audit", &p]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 7") && err.contains("score"), "{err}");

    assert_eq!(pmcal(&["audit", &path(&dir, "absent.csv")]).status.code(), Some(2));
    assert_eq!(pmcal(&["audit", &p, "--alpha", "abc"]).status.code(), Some(1));
    assert_eq!(pmcal(&["bounds", "--curve", "nope"]).status.code(), Some(1));
    assert_eq!(pmcal(&["audit", &p, "--exact"]).status.code(), Some(1));
    let unwritable = dir.path().join("no/such/dir/out.csv");
    let code = pmcal(&["bounds", "--curve", "pmc_to_dc", "-o", &unwritable.to_string_lossy()])
        .status
        .code();
    assert_eq!(code, Some(2));
    assert_eq!(pmcal(&["--help"]).status.code(), Some(0));
}

fn rows(csv: &str) -> Vec<(f64, String, Option<f64>)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].to_string(), f[2].parse().ok())
        })
        .collect()
}

#[test]
fn bounds_curves() {
    let out = ok(&["bounds", "--curve", "pmc_to_mc", "--grid", "0:0.45:0.05"]);
    let r = rows(&out);
    assert_eq!(r.len(), 10);
    assert!(r.windows(2).all(|w| w[0].2 < w[1].2));
    assert!((r[2].2.unwrap() - 0.111111).abs() < 1e-6);

    let out = ok(&["bounds", "--curve", "constraints", "--alpha", "0.1", "--rho", "0.2"]);
    let r = rows(&out);
    let at = |series: &str, x: f64| {
        r.iter()
            .find(|t| t.1 == series && (t.0 - x).abs() < 1e-9)
            .unwrap()
            .2
            .unwrap()
    };
    assert!((at("mc_upper", 0.5) - 0.6).abs() < 1e-12);
    assert!((at("pmc_upper", 0.5) - 0.55).abs() < 1e-12);
    // constant width below rho
    assert!((at("pmc_upper", 0.1) - 0.12).abs() < 1e-12);
    assert!((at("pmc_lower", 0.1) - 0.08).abs() < 1e-12);

    // undefined points are kept with an empty value
    let out = ok(&[
        "bounds",
        "--curve",
        "mc_to_dc",
        "--r-min",
        "0.1",
        "--grid",
        "0:0.2:0.05",
    ]);
    assert_eq!(rows(&out).iter().filter(|t| t.2.is_none()).count(), 3);
}

#[test]
fn simulate_is_reproducible_and_writes_tables() {
    let dir = TempDir::new().unwrap();
    let a = ok(&["simulate", "--scenario", "fixed", "--seed", "1", "--n-per-group", "20"]);
    let b = ok(&["simulate", "--scenario", "fixed", "--seed", "1", "--n-per-group", "20"]);
    assert_eq!(a, b);
    assert!(a.starts_with("y,score,group,p_star\n"));
    assert_eq!(a.lines().count(), 61 * 20 + 1);

    let t = path(&dir, "t.csv");
    let stdout = ok(&[
        "simulate",
        "--scenario",
        "fixed",
        "--n-sims",
        "2",
        "--n-per-group",
        "50",
        "--table",
        &t,
    ]);
    assert!(stdout.is_empty());
    let table = fs::read_to_string(Path::new(&t)).unwrap();
    let r = rows(&table);
    assert_eq!(r.len(), 122);
    assert!(r
        .iter()
        .any(|t| t.1 == "fixed:expected_ratio" && (t.0 - 0.2).abs() < 1e-12 && t.2 == Some(0.5)));
}

#[test]
fn verify_reports_no_violations() {
    let out = ok(&["verify", "--trials", "30", "--seed", "12"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 5);
    assert!(arr.iter().all(|r| r["violations"].as_array().unwrap().is_empty()));
    let one = ok(&["verify", "--bound", "pmc_to_mc", "--trials", "5"]);
    assert_eq!(
        serde_json::from_str::<serde_json::Value>(&one)
            .unwrap()
            .as_array()
            .unwrap()
            .len(),
        1
    );
}
