use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bcpnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcpnn")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

/// Fruit config and 400 samples in `dir`, plus a trained snapshot.
fn fruit(dir: &TempDir) -> (String, String, String) {
    let (cfg, data, snap) = (p(dir, "fruit.json"), p(dir, "fruit.csv"), p(dir, "fruit.snap"));
    let g = bcpnn(&[
        "generate", "--preset", "fruit", "--noise", "0.2", "--samples", "400", "--seed", "3", "--config", &cfg,
        "--dataset", &data,
    ]);
    assert_eq!(code(&g), 0, "{}", String::from_utf8_lossy(&g.stderr));
    let t = bcpnn(&["train", "--config", &cfg, "--dataset", &data, "--snapshot", &snap, "--epochs", "2"]);
    assert_eq!(code(&t), 0, "{}", String::from_utf8_lossy(&t.stderr));
    (cfg, data, snap)
}

#[test]
fn help_exits_zero_and_bad_usage_exits_one() {
    assert_eq!(code(&bcpnn(&["--help"])), 0);
    assert_eq!(code(&bcpnn(&[])), 1);
    assert_eq!(code(&bcpnn(&["train", "--no-such-flag"])), 1);
}

#[test]
fn risk_demo_bars() {
    let dir = TempDir::new().unwrap();
    let snap = p(&dir, "risk.snap");
    assert_eq!(code(&bcpnn(&["generate", "--preset", "risk-demo", "--snapshot", &snap])), 0);
    let out = bcpnn(&[
        "explain", "--snapshot", &snap, "--query", "Volatility=high,Volume=high,Momentum=up", "--primitives", "p11",
    ]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let bars = v["sections"]["p11"][0]["bars"].as_array().unwrap();
    let got: Vec<(String, f64)> = bars
        .iter()
        .map(|b| (b["label"].as_str().unwrap().to_string(), b["value"].as_f64().unwrap()))
        .collect();
    let values: Vec<f64> = got.iter().map(|g| g.1).collect();
    assert_eq!(values, vec![-2.0, 1.8, -0.3, 0.9, 0.4]);
    assert_eq!(got[1].0, "Volatility");
}

#[test]
fn commands_are_byte_identical_across_runs_and_job_counts() {
    let dir = TempDir::new().unwrap();
    let (cfg, data, snap) = fruit(&dir);
    let snap2 = p(&dir, "again.snap");
    bcpnn(&["train", "--config", &cfg, "--dataset", &data, "--snapshot", &snap2, "--epochs", "2"]);
    assert_eq!(fs::read(&snap).unwrap(), fs::read(&snap2).unwrap());

    let explain = |jobs: &str| bcpnn(&["--jobs", jobs, "explain", "--snapshot", &snap, "--dataset", &data, "--row", "5"]);
    let (a, b, c) = (explain("1"), explain("1"), explain("4"));
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);

    let sweep = |jobs: &str| {
        bcpnn(&[
            "--jobs", jobs, "sweep", "--config", &cfg, "--dataset", &data, "--rho-grid", "1.5,2,inf", "--seeds", "0,1",
            "--epochs", "1",
        ])
    };
    let (s1, s4) = (sweep("1"), sweep("4"));
    assert_eq!(code(&s1), 0, "{}", String::from_utf8_lossy(&s1.stderr));
    assert_eq!(s1.stdout, s4.stdout);

    let audit = || bcpnn(&["audit", "--snapshot", &snap, "--expert-ranking", "Colour,Shape,Size"]);
    let (x, y) = (audit(), audit());
    assert_eq!(code(&x), 0, "{}", String::from_utf8_lossy(&x.stderr));
    assert_eq!(x.stdout, y.stdout);
}

#[test]
fn monitor_reports_alarms_as_csv() {
    let dir = TempDir::new().unwrap();
    let (_, data, snap) = fruit(&dir);
    let out = bcpnn(&["monitor", "--snapshot", &snap, "--dataset", &data, "--baseline-window", "100"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("step,hypercolumn,minicolumn,direction,statistic\n"));
    let short = bcpnn(&["monitor", "--snapshot", &snap, "--dataset", &data, "--baseline-window", "5000"]);
    assert_eq!(code(&short), 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let (cfg, data, snap) = fruit(&dir);
    let text = fs::read_to_string(&data).unwrap();
    let dropped: String = text
        .lines()
        .map(|l| l.split(',').skip(1).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n");
    let bad = p(&dir, "missing.csv");
    fs::write(&bad, dropped).unwrap();
    let out = bcpnn(&["train", "--config", &cfg, "--dataset", &bad, "--snapshot", &p(&dir, "x.snap")]);
    assert_eq!(code(&out), 2);

    let mut bytes = fs::read(&snap).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    let corrupt = p(&dir, "corrupt.snap");
    fs::write(&corrupt, bytes).unwrap();
    assert_eq!(code(&bcpnn(&["audit", "--snapshot", &corrupt])), 2);
    assert_eq!(code(&bcpnn(&["audit", "--snapshot", &p(&dir, "absent.snap")])), 2);
}

#[test]
fn bad_primitive_list_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let (_, data, snap) = fruit(&dir);
    let out = bcpnn(&["explain", "--snapshot", &snap, "--dataset", &data, "--row", "0", "--primitives", "p99"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn unsettled_attractor_exits_four_with_report() {
    let dir = TempDir::new().unwrap();
    let (cfg, data, _) = fruit(&dir);
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    // a second hidden hypercolumn gives the memory cross-hypercolumn weights
    v["hidden"].as_array_mut().unwrap().push(serde_json::json!({ "name": "cluster", "size": 3 }));
    v["recurrence"] = serde_json::json!({ "max_steps": 1, "tolerance": 1e-12 });
    let rcfg = p(&dir, "recurrent.json");
    fs::write(&rcfg, v.to_string()).unwrap();
    let snap = p(&dir, "recurrent.snap");
    let t = bcpnn(&[
        "train", "--config", &rcfg, "--dataset", &data, "--snapshot", &snap, "--epochs", "1", "--mode", "unsupervised",
    ]);
    assert_eq!(code(&t), 0, "{}", String::from_utf8_lossy(&t.stderr));
    let out = bcpnn(&["explain", "--snapshot", &snap, "--dataset", &data, "--row", "0", "--primitives", "p8"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["warnings"][0].as_str().unwrap().starts_with("non-convergence"));
}

#[test]
fn train_writes_ontology_and_log() {
    let dir = TempDir::new().unwrap();
    let (_, _, snap) = fruit(&dir);
    for suffix in [".ontology.json", ".log.csv"] {
        let path = format!("{snap}{suffix}");
        assert!(Path::new(&path).exists(), "{path} missing");
    }
}
