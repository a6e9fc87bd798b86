mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::data_path;

fn phtest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phtest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rossi_args<'a>(rossi: &'a str, format: &'a str) -> Vec<&'a str> {
    vec![
        "test",
        "--input",
        rossi,
        "--time-col",
        "week",
        "--status-col",
        "arrest",
        "--format",
        format,
    ]
}

#[test]
fn recidivism_text_table() {
    let rossi = data_path("rossi.csv");
    let out = phtest(&rossi_args(path(&rossi), "text"));
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let row = |name: &str| -> Vec<String> {
        text.lines()
            .find(|l| l.split_whitespace().next() == Some(name))
            .unwrap_or_else(|| panic!("no {name} row in\n{text}"))
            .split_whitespace()
            .map(String::from)
            .collect()
    };
    let age = row("age");
    assert!((age[1].parse::<f64>().unwrap() - 2.464).abs() <= 0.02);
    assert_eq!(age[3], "0.014");
    let global = row("global");
    assert!((global[1].parse::<f64>().unwrap() - 17.58).abs() <= 0.05);
    assert_eq!(
        (global[2].as_str(), global[3].as_str(), global[4].as_str()),
        ("7", "0.014", "yes")
    );
}

#[test]
fn csv_and_jsonl_carry_the_same_numbers() {
    let rossi = data_path("rossi.csv");
    let csv_text = stdout(&phtest(&rossi_args(path(&rossi), "csv")));
    let json_text = stdout(&phtest(&rossi_args(path(&rossi), "jsonl")));
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let csv_rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let json_rows: Vec<serde_json::Value> = json_text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(csv_rows.len(), 8);
    assert_eq!(json_rows.len(), 8);
    for (c, j) in csv_rows.iter().zip(&json_rows) {
        assert_eq!(c[0], *j["set"].as_str().unwrap());
        assert_eq!(
            c[1].parse::<f64>().unwrap(),
            j["statistic"].as_f64().unwrap()
        );
        assert_eq!(c[3].parse::<f64>().unwrap(), j["p_value"].as_f64().unwrap());
        assert_eq!(c[2].parse::<u64>().unwrap(), j["df"].as_u64().unwrap());
    }
}

#[test]
fn gastric_row() {
    let gastric = data_path("gastric.csv");
    let out = phtest(&["test", "--input", path(&gastric), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    let t: f64 = rows[0][1].parse().unwrap();
    let p: f64 = rows[0][3].parse().unwrap();
    assert!(
        (t - 3.651).abs() <= 0.02 && (p - 0.0003).abs() <= 0.0002,
        "{t} {p}"
    );
}

#[test]
fn explicit_test_sets() {
    let uis = data_path("uis.csv");
    let out = phtest(&[
        "test",
        "--input",
        path(&uis),
        "--status-col",
        "censor",
        "--covariates",
        "age,beck,ndr1,ndr2,ivhx3,race,treat,site,agexs,racexs",
        "--test-set",
        "age,beck",
        "--test-set",
        "site",
        "--format",
        "jsonl",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let rows: Vec<serde_json::Value> = stdout(&out)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["df"], 2);
    assert_eq!(rows[1]["df"], 1);
    assert_eq!(rows[0]["n"], 575);
}

#[test]
fn bad_cells_and_columns_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.csv");
    std::fs::write(&file, "time,status,x\n1,1,0.5\n2,0,oops\n3,1,1\n").unwrap();
    let out = phtest(&["test", "--input", path(&file), "--missing", "fail"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("`x`"), "{err}");

    let out = phtest(&["test", "--input", path(&file), "--covariates", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    let out = phtest(&["test", "--input", path(&dir.path().join("missing.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn separation_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("sep.csv");
    std::fs::write(&file, "time,status,x\n1,1,1\n2,1,0\n").unwrap();
    let out = phtest(&["test", "--input", path(&file)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("separation"));
}

#[test]
fn usage_errors_exit_4() {
    let gastric = data_path("gastric.csv");
    assert_eq!(
        phtest(&["test", "--input", path(&gastric), "--alpha", "1.5"])
            .status
            .code(),
        Some(4)
    );
    assert_eq!(phtest(&["test", "--bogus"]).status.code(), Some(4));
    assert_eq!(phtest(&[]).status.code(), Some(4));
    assert_eq!(phtest(&["--help"]).status.code(), Some(0));
}

const NULL_SPEC: &str = r#"
beta = [0.5, -0.3]
tested = [0]
baseline = { kind = "exponential", rate = 1.0 }
censoring = { kind = "uniform", max = 3.0 }
[design]
kind = "independent"
columns = [{ law = "bernoulli", p = 0.5 }, { law = "normal" }]
"#;

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, NULL_SPEC).unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        let o = phtest(&[
            "simulate",
            "--spec",
            path(&spec),
            "--n",
            "300",
            "--seed",
            "42",
            "--output",
            path(out),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    assert!(text.starts_with("time,status,z1,z2\n"));
    assert_eq!(text.lines().count(), 301);

    // The simulated file feeds straight back into `test`.
    let o = phtest(&["test", "--input", path(&a), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn simulate_rejects_empty_samples() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, NULL_SPEC).unwrap();
    assert_eq!(
        phtest(&["simulate", "--spec", path(&spec), "--n", "0"])
            .status
            .code(),
        Some(4)
    );
    std::fs::write(&spec, "beta = [").unwrap();
    assert_eq!(
        phtest(&["simulate", "--spec", path(&spec), "--n", "10"])
            .status
            .code(),
        Some(4)
    );
}

#[test]
fn null_batch_p_values_are_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, NULL_SPEC).unwrap();
    let o = phtest(&[
        "simulate",
        "--spec",
        path(&spec),
        "--n",
        "200",
        "--replicates",
        "300",
        "--seed",
        "3",
        "--format",
        "jsonl",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(v["ks_p_value"].as_f64().unwrap() > 0.01, "{v}");
    assert_eq!(v["failed"], 0);
}

#[test]
fn power_report() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    let local = |c: f64| {
        format!(
            "beta = [0.3]\ntested = [0]\nalternative = {{ kind = \"local\", c = [{c}] }}\n\
             baseline = {{ kind = \"exponential\", rate = 1.0 }}\ncensoring = {{ kind = \"uniform\", max = 4.0 }}\n\
             [design]\nkind = \"independent\"\ncolumns = [{{ law = \"normal\" }}]\n"
        )
    };
    let run = |c: f64| {
        std::fs::write(&spec, local(c)).unwrap();
        let o = phtest(&[
            "power",
            "--spec",
            path(&spec),
            "--n",
            "200",
            "--replicates",
            "100",
            "--n-plugin",
            "5000",
            "--seed",
            "5",
            "--format",
            "jsonl",
        ]);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        stdout(&o)
    };
    let zero: serde_json::Value = serde_json::from_str(run(0.0).trim()).unwrap();
    assert!((zero["analytic_power"].as_f64().unwrap() - 0.05).abs() < 1e-12);

    let first = run(2.0);
    assert_eq!(first, run(2.0));
    let v: serde_json::Value = serde_json::from_str(first.trim()).unwrap();
    let (d, big_d, mu) = (
        v["d"].as_f64().unwrap(),
        v["big_d"].as_f64().unwrap(),
        v["mu"].as_f64().unwrap(),
    );
    assert!((mu - d / big_d).abs() <= 1e-12 * mu.abs());
    assert_eq!(v["scaling"], "printed");
}
