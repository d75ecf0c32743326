use std::fs;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dmm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

const FIVE_COMPONENT: &str = r#"{
    "weights": [0.123, 0.552, 0.010, 0.080, 0.235],
    "means": [-0.236, -0.168, -0.987, 0.299, 0.150],
    "sigma2": 1.0
}"#;

#[test]
fn simulate_point_mass_without_noise() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    fs::write(&model, r#"{"weights": [1.0], "means": [0.0], "sigma2": 0.0}"#).unwrap();
    let out = run(&["simulate", "--model", model.to_str().unwrap(), "--n", "2"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "0\n0\n");
}

#[test]
fn simulate_deterministic_given_seed() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    fs::write(&model, FIVE_COMPONENT).unwrap();
    let args = [
        "simulate",
        "--model",
        model.to_str().unwrap(),
        "--n",
        "100",
        "--seed",
        "7",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn simulate_five_component_sample_mean() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    fs::write(&model, FIVE_COMPONENT).unwrap();
    let out = run(&[
        "simulate",
        "--model",
        model.to_str().unwrap(),
        "--n",
        "100000",
        "--seed",
        "1",
    ]);
    assert!(out.status.success());
    let samples: Vec<f64> = stdout(&out)
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    // Model mean is -0.0825415.
    assert!((mean + 0.0825415).abs() <= 0.02, "sample mean {mean}");
}

#[test]
fn simulate_rejects_malformed_json() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    fs::write(&model, "{\"weights\": [1.0,").unwrap();
    let out = run(&["simulate", "--model", model.to_str().unwrap(), "--n", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn estimate_dmm_on_overlap_data() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    fs::write(&model, r#"{"weights": [1.0], "means": [0.0], "sigma2": 1.0}"#).unwrap();
    let samples = dir.path().join("samples.txt");
    let sim = run(&[
        "simulate",
        "--model",
        model.to_str().unwrap(),
        "--n",
        "2000",
        "--seed",
        "3",
        "--out",
        samples.to_str().unwrap(),
    ]);
    assert!(sim.status.success());
    let out = run(&[
        "estimate",
        "--samples",
        samples.to_str().unwrap(),
        "--estimator",
        "dmm",
        "--k",
        "2",
        "--sigma2",
        "1",
    ]);
    assert!(out.status.success(), "stderr: {:?}", out.stderr);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let means = report["model"]["means"].as_array().unwrap();
    assert!(!means.is_empty() && means.len() <= 2);
    for m in means {
        assert!(m.as_f64().unwrap().abs() <= 0.5, "atom {m} far from 0");
    }
}

#[test]
fn estimate_lindsay_k1_matches_sample_variance() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("samples.txt");
    fs::write(&samples, "1\n2\n3\n6\n").unwrap();
    let out = run(&[
        "estimate",
        "--samples",
        samples.to_str().unwrap(),
        "--estimator",
        "lindsay",
        "--k",
        "1",
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((report["model"]["sigma2"].as_f64().unwrap() - 3.5).abs() <= 1e-12);
    assert!((report["model"]["means"][0].as_f64().unwrap() - 3.0).abs() <= 1e-12);
}

#[test]
fn estimate_missing_file_exits_two() {
    let out = run(&[
        "estimate",
        "--samples",
        "/nonexistent/samples.txt",
        "--estimator",
        "dmm",
        "--k",
        "1",
        "--sigma2",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn estimate_error_reports_json_object() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("samples.txt");
    fs::write(&samples, "1\n2\n").unwrap();
    // k = 2 needs sigma2 for the dmm route.
    let out = run(&[
        "estimate",
        "--samples",
        samples.to_str().unwrap(),
        "--estimator",
        "dmm",
        "--k",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(report["error"].is_string());
}

fn scenario_json(trials: usize, n_grid: &str, estimators: &str) -> String {
    format!(
        r#"{{
            "id": "smoke",
            "model": {{"weights": [0.5, 0.5], "means": [-1.0, 1.0], "sigma2": 0.25}},
            "n_grid": {n_grid},
            "trials": {trials},
            "estimators": {estimators},
            "seed": 11
        }}"#
    )
}

#[test]
fn benchmark_single_cell_emits_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("scenario.json");
    fs::write(&scenario, scenario_json(1, "[100]", r#"["dmm"]"#)).unwrap();
    let out = run(&["benchmark", "--scenario", scenario.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.trim_end().lines().collect();
    assert_eq!(
        lines[0],
        "scenario,estimator,n,trial,w1,mean_err,sigma2_err,wall_ms,error"
    );
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("smoke,dmm,100,0,"));
}

#[test]
fn benchmark_deterministic_given_seed() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("scenario.json");
    fs::write(
        &scenario,
        scenario_json(3, "[200, 400]", r#"["dmm", "lindsay", "em"]"#),
    )
    .unwrap();
    let args = ["benchmark", "--scenario", scenario.to_str().unwrap()];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    // Strip the timing column before comparing.
    let strip = |out: &Output| -> Vec<String> {
        stdout(out)
            .lines()
            .map(|l| {
                let cols: Vec<&str> = l.split(',').collect();
                cols[..7].join(",")
            })
            .collect()
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn benchmark_five_component_w1_improves_with_n() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("scenario.json");
    fs::write(
        &scenario,
        format!(
            r#"{{
                "id": "five",
                "model": {},
                "n_grid": [1000, 10000],
                "trials": 20,
                "estimators": ["dmm"],
                "seed": 5
            }}"#,
            FIVE_COMPONENT
        ),
    )
    .unwrap();
    let csv = dir.path().join("rows.csv");
    let out = run(&[
        "benchmark",
        "--scenario",
        scenario.to_str().unwrap(),
        "--jobs",
        "4",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    let mut by_n: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert!(cols[8].is_empty(), "unexpected failure row: {line}");
        by_n
            .entry(cols[2].parse().unwrap())
            .or_default()
            .push(cols[4].parse().unwrap());
    }
    let median = |xs: &mut Vec<f64>| -> f64 {
        xs.sort_by(f64::total_cmp);
        xs[xs.len() / 2]
    };
    let small = median(by_n.get_mut(&1000).unwrap());
    let large = median(by_n.get_mut(&10000).unwrap());
    assert!(large < small, "median W1: n=1e3 {small}, n=1e4 {large}");
}
