use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pred_minimax_cli::commands::{compute_figure1, compute_risk, dominance_failures, Figure1Row};
use pred_minimax_cli::config::Options;
use pred_minimax_cli::{Command as Sub, ExperimentConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pred-minimax"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn waterfill_ball_example_and_json_dump() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["waterfill", "--family", "l2", "--n", "100"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("waterfill.csv")).unwrap();
    assert!(csv.starts_with("# pred-minimax "));
    assert!(csv.lines().nth(1).unwrap() == "n,m,lambda,cutoff,risk");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("waterfill_n100.json")).unwrap()).unwrap();
    assert!((json["lambda"].as_f64().unwrap() - 0.06).abs() < 1e-12);
    assert_eq!(json["cutoff"].as_u64(), Some(100));
    assert_eq!(json["theta2"].as_array().unwrap().len(), 100);
    assert!(json["risk"].as_f64().is_some());
}

#[test]
fn waterfill_vanishing_budget() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["waterfill", "--n", "500", "--C", "1e-30"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("waterfill_n500.json")).unwrap()).unwrap();
    assert!(json["theta2"].as_array().unwrap().iter().all(|t| t.as_f64().unwrap() < 1e-29));
    assert!(json["risk"].as_f64().unwrap() < 1e-28);
}

#[test]
fn sobolev_cutoff_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["asymptotics", "--n", "1e6"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rows = data_rows(&fs::read_to_string(dir.path().join("asymptotics.csv")).unwrap());
    let cutoff_ratio: f64 = rows[0][8].parse().unwrap();
    assert!((cutoff_ratio - 1.0).abs() < 0.05, "{cutoff_ratio}");
}

#[test]
fn risk_rows_match_monte_carlo() {
    let mut opts = Options::default();
    opts.family = Some("l2".into());
    opts.n = Some(vec![10_000]);
    opts.replicates = Some(2_000);
    let cfg = ExperimentConfig::resolve(Sub::Risk, &opts).unwrap();
    let rows = compute_risk(&cfg).unwrap();
    assert_eq!(rows.len(), 4);
    let lm = &rows[0];
    assert_eq!(lm.estimator, "linear_minimax");
    assert!((lm.closed_form / (0.5 * 1.5f64.ln()) - 1.0).abs() < 0.01);
    for r in &rows {
        assert!(r.mc.z_score(r.closed_form) < 4.0, "{r:?}");
    }
}

#[test]
fn risk_zero_truth_oracle_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["risk", "--n", "51", "--theta", "zero", "--replicates", "1000"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let rows = data_rows(&fs::read_to_string(dir.path().join("risk.csv")).unwrap());
    let oracle = rows.iter().find(|r| r[2] == "oracle").unwrap();
    assert_eq!(oracle[3].parse::<f64>().unwrap(), 0.0);
    assert_eq!(oracle[4].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn figure1_rate_stability_under_doubling() {
    let mut opts = Options::default();
    opts.n = Some(vec![1_000_000, 2_000_000]);
    let cfg = ExperimentConfig::resolve(Sub::Figure1, &opts).unwrap();
    let rows = compute_figure1(&cfg).unwrap();
    let (a, b) = rows.split_at(rows.len() / 2);
    for (x, y) in a.iter().zip(b) {
        assert_eq!(x.alpha, y.alpha);
        assert!((y.predictive_constant / x.predictive_constant - 1.0).abs() < 0.02);
        assert!((y.plugin_constant / x.plugin_constant - 1.0).abs() < 0.02);
        assert!(x.bracket_lower < x.predictive_constant && x.predictive_constant < x.bracket_upper);
    }
    assert!(dominance_failures(&rows).is_empty());
}

#[test]
fn figure1_writes_svg_and_grid_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["figure1", "--n", "1e5", "--alphas", "0.5,1,2"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("figure1.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("alpha_grid=0.5,1,2"));
    assert_eq!(data_rows(&csv).len(), 3);
    let svg = fs::read_to_string(dir.path().join("figure1.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains(">α<") && svg.contains(">constant<"));
}

#[test]
fn dominance_helper_flags_violations() {
    let row = |alpha, p, q| Figure1Row {
        n: 10,
        alpha,
        predictive_constant: p,
        plugin_constant: q,
        bracket_lower: 0.0,
        bracket_upper: 1.0,
        cutoff: 1,
    };
    let rows = [row(0.5, 0.1, 0.2), row(1.0, 0.3, 0.3), row(2.0, 0.5, 0.4)];
    assert_eq!(dominance_failures(&rows), vec![1.0, 2.0]);
}

#[test]
fn verify_defaults_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(!text.contains("FAIL"));
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 8);

    let other = tempfile::tempdir().unwrap();
    let o2 = run(&["verify", "--seed", "99"], other.path());
    let verdicts = |s: &str| -> Vec<String> {
        s.lines()
            .filter(|l| !l.starts_with("wrote"))
            .map(|l| l.split(':').next().unwrap().to_string())
            .collect()
    };
    assert_eq!(verdicts(&text), verdicts(&stdout(&o2)));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.conf");
    fs::write(&cfg, "family = l2\nn = 100\nC = 5\n").unwrap();
    let o = bin()
        .args(["waterfill", "--config"])
        .arg(&cfg)
        .args(["--C", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let rows = data_rows(&fs::read_to_string(dir.path().join("waterfill.csv")).unwrap());
    assert!((rows[0][2].parse::<f64>().unwrap() - 0.06).abs() < 1e-12);
}

#[test]
fn custom_weights_file() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.txt");
    fs::write(&w, "1\n1\n2\n3\n5\n8\n").unwrap();
    let o = bin()
        .args(["waterfill", "--family", "custom", "--weights"])
        .arg(&w)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("waterfill_n6.json").exists());

    fs::write(&w, "1\n3\n2\n").unwrap();
    let o = bin()
        .args(["waterfill", "--family", "custom", "--weights"])
        .arg(&w)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["waterfill", "--C", "-1"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["figure1", "--family", "l2"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["risk", "--replicates", "10"], dir.path()).status.code(), Some(2));
    // the budget grows like √λ, so this radius cannot be bracketed
    assert_eq!(run(&["waterfill", "--C", "1e300"], dir.path()).status.code(), Some(3));
    let o = bin()
        .env("PRED_MINIMAX_THREADS", "zero")
        .args(["waterfill", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["risk", "--n", "101", "--replicates", "5000"];
    let oa = bin().env("PRED_MINIMAX_THREADS", "1").args(args).arg("--out").arg(a.path()).output().unwrap();
    let ob = bin().env("PRED_MINIMAX_THREADS", "3").args(args).arg("--out").arg(b.path()).output().unwrap();
    assert_eq!((oa.status.code(), ob.status.code()), (Some(0), Some(0)));
    assert_eq!(
        fs::read(a.path().join("risk.csv")).unwrap(),
        fs::read(b.path().join("risk.csv")).unwrap()
    );
}
