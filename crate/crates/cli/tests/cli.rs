use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn cvepr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvepr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn spec(dir: &TempDir, name: &str, json: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const VACUUM: &str = r#"{"kind": "gaussian", "mean": [0, 0, 0, 0],
    "cov": [1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]}"#;
const TMSV: &str = r#"{"kind": "tmsv", "r": 0.5}"#;
const MIXTURE: &str = r#"{"kind": "separable_mixture", "terms": [
    {"weight": 0.5, "state_a": {"kind": "vacuum"}, "state_b": {"kind": "coherent", "re": 1, "im": 0}},
    {"weight": 0.3, "state_a": {"kind": "coherent", "re": -1, "im": 0.5}, "state_b": {"kind": "vacuum"}},
    {"weight": 0.2, "state_a": {"kind": "fock", "dim": 2, "entries": [[0,0],[0,0],[0,0],[1,0]]},
     "state_b": {"kind": "coherent", "re": 0.5, "im": -0.5}}]}"#;

/// Rows of a CSV as field vectors, header dropped.
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let vac = spec(&dir, "vac.json", VACUUM);
    let tmsv = spec(&dir, "tmsv.json", TMSV);

    assert_eq!(
        cvepr(&["criteria", "--state", s(&vac)]).status.code(),
        Some(0)
    );
    assert_eq!(
        cvepr(&["criteria", "--state", s(&tmsv)]).status.code(),
        Some(3)
    );
    let no_seed = cvepr(&["experiment", "--state", s(&tmsv), "--shots", "100"]);
    assert_eq!(no_seed.status.code(), Some(2));
    assert!(stderr(&no_seed).contains("--seed"));
    let empty = cvepr(&["sweep", "--r-range", "1.0:0.1:0.1"]);
    assert_eq!(empty.status.code(), Some(2));
    assert!(stderr(&empty).contains("empty"));
    let missing = cvepr(&["criteria", "--state", s(&dir.path().join("nope.json"))]);
    assert_eq!(missing.status.code(), Some(1));
    let few_points = cvepr(&["criteria", "--state", s(&vac), "--grid-points", "8"]);
    assert_eq!(few_points.status.code(), Some(2));
}

#[test]
fn describe_prints_tmsv_moments() {
    let dir = TempDir::new().unwrap();
    let tmsv = spec(&dir, "tmsv.json", TMSV);
    let out = cvepr(&["describe", "--state", s(&tmsv)]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains(&format!("{:.6}", 1f64.cosh())));
    assert!(text.contains(&format!("{:.6}", 1f64.sinh())));
    assert!(text.contains("entangled"));

    let csv = stdout(&cvepr(&[
        "describe",
        "--state",
        s(&tmsv),
        "--format",
        "csv",
    ]));
    let get = |k: &str| -> f64 {
        csv.lines()
            .find_map(|l| l.strip_prefix(&format!("{k},")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((get("cov_00") - 1f64.cosh()).abs() < 1e-10);
    assert!((get("cov_02") - 1f64.sinh()).abs() < 1e-10);
    assert!((get("cov_13") + 1f64.sinh()).abs() < 1e-10);
    assert!((get("ppt_min_symplectic") - (-1f64).exp()).abs() < 1e-10);
}

#[test]
fn describe_rejects_invalid_specs() {
    let dir = TempDir::new().unwrap();
    let asym = spec(
        &dir,
        "asym.json",
        r#"{"kind": "gaussian", "mean": [0,0,0,0],
            "cov": [1,0.2,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]}"#,
    );
    let out = cvepr(&["describe", "--state", s(&asym)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("symmetry"), "{}", stderr(&out));

    let trace = spec(
        &dir,
        "trace.json",
        r#"{"kind": "fock", "dim_a": 1, "dim_b": 2, "entries": [[0.9,0],[0,0],[0,0],[0,0]]}"#,
    );
    let out = cvepr(&["describe", "--state", s(&trace)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("trace"), "{}", stderr(&out));
}

#[test]
fn criteria_table_shows_reid_margin() {
    let dir = TempDir::new().unwrap();
    let tmsv = spec(&dir, "tmsv.json", TMSV);
    let out = cvepr(&["criteria", "--state", s(&tmsv)]);
    let text = stdout(&out);
    let reid = text
        .lines()
        .find(|l| l.starts_with("reid_product") && l.contains("conditional"))
        .unwrap();
    let cols: Vec<&str> = reid.split_whitespace().collect();
    let margin: f64 = cols[4].parse().unwrap();
    assert!((margin - (1.0 - 1.0 / 1f64.cosh())).abs() < 1e-3);
    assert_eq!(cols[5], "VIOLATED");

    let csv = stdout(&cvepr(&[
        "criteria",
        "--state",
        s(&tmsv),
        "--format",
        "csv",
    ]));
    for row in rows(&csv) {
        assert_eq!(row.len(), 8);
        let (lhs, bound, margin): (f64, f64, f64) = (
            row[1].parse().unwrap(),
            row[2].parse().unwrap(),
            row[3].parse().unwrap(),
        );
        assert!((bound - lhs - margin).abs() < 1e-10);
    }
}

#[test]
fn separable_mixture_is_clean_and_ppt() {
    let dir = TempDir::new().unwrap();
    let mix = spec(&dir, "mix.json", MIXTURE);
    let out = cvepr(&["criteria", "--state", s(&mix)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(!text.contains("VIOLATED"));
    let ppt = text.lines().find(|l| l.starts_with("ppt:")).unwrap();
    assert!(ppt.contains("consistent with separability"), "{ppt}");
}

#[test]
fn r_sweep_tracks_inverse_cosh() {
    let out = cvepr(&["sweep", "--r-range", "0.1:1.0:0.1", "--format", "csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = stdout(&out);
    assert!(csv.starts_with("param,value,criterion,"));
    let mut seen = Vec::new();
    for row in rows(&csv) {
        if row[2] == "reid_product" && row[7] == "conditional" {
            let r: f64 = row[1].parse().unwrap();
            let lhs: f64 = row[3].parse().unwrap();
            assert!((lhs - 1.0 / (2.0 * r).cosh()).abs() < 1e-3, "r={r}");
            seen.push(r);
        }
    }
    assert_eq!(seen.len(), 10);
    assert!(seen.windows(2).all(|w| w[0] < w[1]), "rows sorted by r");
}

#[test]
fn gain_sweep_minimum_at_regression_gain() {
    let dir = TempDir::new().unwrap();
    let tmsv = spec(&dir, "tmsv.json", TMSV);
    let out = cvepr(&[
        "sweep",
        "--state",
        s(&tmsv),
        "--gains",
        "-1:1.5:0.01",
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let best = rows(&stdout(&out))
        .into_iter()
        .filter(|r| r[2] == "reid_product")
        .map(|r| (r[1].parse::<f64>().unwrap(), r[3].parse::<f64>().unwrap()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert!((best.0 - 1f64.tanh()).abs() <= 0.005 + 1e-9, "{best:?}");
}

#[test]
fn sweep_csv_round_trips() {
    let out = cvepr(&["sweep", "--r-range", "0.2:0.6:0.2", "--format", "csv"]);
    for row in rows(&stdout(&out)) {
        for (k, field) in row.iter().enumerate() {
            if [1, 3, 4, 5, 8].contains(&k) && !field.is_empty() {
                let v: f64 = field.parse().unwrap();
                assert_eq!(&format!("{v:.11e}"), field);
            }
        }
    }
}

#[test]
fn sweep_writes_to_out_file() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = cvepr(&[
        "sweep",
        "--r-range",
        "0.5:0.5:0.1",
        "--format",
        "csv",
        "--out",
        s(&path),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).is_empty());
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.lines().count() > 1);
}

#[test]
fn experiment_reports_reid_with_se() {
    let dir = TempDir::new().unwrap();
    let tmsv = spec(&dir, "tmsv.json", TMSV);
    let recs = dir.path().join("records");
    let args = [
        "experiment",
        "--state",
        s(&tmsv),
        "--shots",
        "100000",
        "--seed",
        "7",
        "--format",
        "csv",
        "--records",
        s(&recs),
    ];
    let out = cvepr(&args);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let csv = stdout(&out);
    assert!(csv.lines().next().unwrap().ends_with(",se"));
    let reid = rows(&csv)
        .into_iter()
        .find(|r| r[0] == "reid_product" && r[5] == "conditional")
        .unwrap();
    let (lhs, se): (f64, f64) = (reid[1].parse().unwrap(), reid[8].parse().unwrap());
    assert!(se > 0.0 && (lhs - 1.0 / 1f64.cosh()).abs() < 3.0 * se + 5e-3);
    assert!(recs.join("x_record.csv").exists());
    assert!(recs.join("p_record.csv").exists());
    assert_eq!(stdout(&cvepr(&args)), csv, "seeded runs are reproducible");
}

#[test]
fn lhv_dispersion_free_and_smeared() {
    let dir = TempDir::new().unwrap();
    let tmsv = spec(&dir, "tmsv.json", TMSV);
    let ens = dir.path().join("ensemble.csv");
    let out = cvepr(&[
        "lhv",
        "--state",
        s(&tmsv),
        "--shots",
        "20000",
        "--seed",
        "3",
        "--ensemble",
        s(&ens),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let text = stdout(&out);
    assert!(text.contains("(100.0%)"), "{text}");
    assert!(std::fs::read_to_string(&ens).unwrap().lines().count() > 20000);

    let out = cvepr(&[
        "lhv",
        "--state",
        s(&tmsv),
        "--shots",
        "20000",
        "--seed",
        "3",
        "--smear",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("respect the uncertainty bound"));
    assert!(!text.contains("VIOLATED"));

    let mix = spec(&dir, "mix.json", MIXTURE);
    let out = cvepr(&["lhv", "--state", s(&mix), "--shots", "10", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("Gaussian"));
}
