use std::path::{Path, PathBuf};

use mcmarket::cli::{run, EXIT_INVALID, EXIT_OK};
use mcmarket::fixtures;
use mcmarket::simulate::PathRecord;
use serde_json::Value;

fn mc(args: &[&str]) -> i32 {
    let mut full = vec!["mcmarket"];
    full.extend_from_slice(args);
    run(full)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_path(dir: &Path, name: &str, p: &PathRecord) -> PathBuf {
    let file = dir.join(name);
    std::fs::write(&file, serde_json::to_string(p).unwrap()).unwrap();
    file
}

#[test]
fn validate_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mc(&["fixtures", "--dir", s(dir.path())]), EXIT_OK);
    for name in ["kh", "kh_symmetric", "twostate", "twostate_pinned"] {
        let src = dir.path().join(format!("{name}.json"));
        let a = dir.path().join(format!("{name}.a.json"));
        let b = dir.path().join(format!("{name}.b.json"));
        assert_eq!(mc(&["validate", "-m", s(&src), "--out", s(&a)]), EXIT_OK);
        assert_eq!(mc(&["validate", "-m", s(&a), "--out", s(&b)]), EXIT_OK);
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{name}");
    }
}

#[test]
fn invalid_input_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixtures::twostate_config();
    cfg.lambda[0][1] = -1.0;
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(mc(&["validate", "-m", s(&bad)]), EXIT_INVALID);
    assert_eq!(mc(&["no-such-command"]), EXIT_INVALID);
    assert_eq!(mc(&["validate", "-m", s(&dir.path().join("missing.json"))]), EXIT_INVALID);
}

#[test]
fn na_solve_reports_kh_intensities() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("na.json");
    assert_eq!(mc(&["na-solve", "-m", "kh", "--out", s(&out)]), EXIT_OK);
    let v = read_json(&out);
    assert_eq!(v["header"]["tool"], "mcmarket");
    assert_eq!(v["header"]["config_sha256"].as_str().unwrap().len(), 64);
    let rates = &v["result"]["intensities"]["rates"];
    assert!((rates[0][1].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((rates[0][2].as_f64().unwrap() - 1.1).abs() < 1e-12);
}

#[test]
fn simulate_is_reproducible_and_headed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        assert_eq!(mc(&["simulate", "-m", "kh", "--paths", "20", "--seed", "4", "--out", s(out)]), EXIT_OK);
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("# tool=mcmarket"));
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "path_id,event,time,from_state,to_state,L_S");
    assert_eq!(body.iter().filter(|l| l.contains(",start,")).count(), 20);
}

#[test]
fn scenarios_table_sums_with_tail() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sc.csv");
    assert_eq!(mc(&["scenarios", "-m", "kh", "--nmax", "6", "--out", s(&out)]), EXIT_OK);
    let text = std::fs::read_to_string(&out).unwrap();
    let total: f64 = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .sum();
    // total jumps are Poisson(2)
    let expected: f64 = (0..=6)
        .map(|k| (-2.0f64).exp() * 2.0f64.powi(k) / (1..=k).map(f64::from).product::<f64>())
        .sum();
    assert!((total - expected).abs() < 1e-12);
}

#[test]
fn classify_a_twostate_jump() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixtures::twostate();
    let p = PathRecord::from_parts(&m, vec![0, 1, 0], vec![0.25, 0.7]).unwrap();
    let file = write_path(dir.path(), "p.json", &p);
    let out = dir.path().join("c.json");
    assert_eq!(mc(&["classify", "-m", "twostate", "--path", s(&file), "--k", "2", "--out", s(&out)]), EXIT_OK);
    let v = read_json(&out);
    assert_eq!(v["result"]["mode"], "determined");
    assert!((v["result"]["bounds"]["upper"].as_f64().unwrap() - 0.7).abs() < 1e-9);
    assert_eq!(mc(&["classify", "-m", "twostate", "--path", s(&file), "--k", "3"]), EXIT_INVALID);
}

#[test]
fn nflvr_then_arbitrage() {
    let dir = tempfile::tempdir().unwrap();
    let m = fixtures::kh();
    let p = PathRecord::from_parts(&m, vec![0, 2, 0, 1], vec![0.1, 0.4, 0.7]).unwrap();
    let file = write_path(dir.path(), "p.json", &p);
    let report = dir.path().join("r.json");
    assert_eq!(mc(&["nflvr", "-m", "kh", "--path", s(&file), "--out", s(&report)]), EXIT_OK);
    let v = read_json(&report);
    assert!((v["result"]["tau_flvr"].as_f64().unwrap() - 0.1).abs() < 1e-12);

    let pnl = dir.path().join("pnl.csv");
    let args = ["arbitrage", "--report", s(&report), "--variant", "inaccessible", "--paths", "200", "--out", s(&pnl)];
    assert_eq!(mc(&args), EXIT_OK);
    let text = std::fs::read_to_string(&pnl).unwrap();
    let values: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 200);
    assert!(values.iter().all(|v| *v > 0.0));
    // kh never has a predictable jump
    assert_eq!(mc(&["arbitrage", "--report", s(&report), "--variant", "accessible"]), EXIT_INVALID);
}

#[test]
fn nflvr_reads_simulated_paths() {
    let dir = tempfile::tempdir().unwrap();
    let sims = dir.path().join("sims.json");
    assert_eq!(
        mc(&["simulate", "-m", "twostate_pinned", "--paths", "3", "--seed", "2", "--format", "json", "--out", s(&sims)]),
        EXIT_OK
    );
    let out = dir.path().join("r.json");
    let args = ["nflvr", "-m", "twostate_pinned", "--path", s(&sims), "--path-index", "2", "--out", s(&out)];
    assert_eq!(mc(&args), EXIT_OK);
    let v = read_json(&out);
    assert!(v["result"]["tau_flvr"].as_f64().unwrap() <= 1.0);
    let bad = ["nflvr", "-m", "twostate_pinned", "--path", s(&sims), "--path-index", "3"];
    assert_eq!(mc(&bad), EXIT_INVALID);
}

#[test]
fn kh_compensator_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("comp.csv");
    let ell = format!("{}", 2.0 * 1.1f64.ln() + 0.9f64.ln() + 0.01);
    let args = ["compensator", "-m", "kh", "--lambda+", "1", "--lambda-", "1", "--ell", &ell, "--out", s(&out)];
    assert_eq!(mc(&args), EXIT_OK);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("unique=true"), "{text}");
}
