use std::fs;
use std::path::{Path, PathBuf};

use bellgap::{BellFunctional, Scenario};
use bellgap_cli::files::{functional_json, parse_behavior, read_counts, write_json};
use bellgap_cli::{run, EXIT_NUMERICAL, EXIT_VALIDATION};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn bellgap(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("bellgap").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn field(stdout: &str, key: &str) -> String {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no `{key}` in {stdout}"))
        .to_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate_counts(dir: &Path, name: &str, concurrence: f64, seed: u64) -> PathBuf {
    let path = dir.join(name);
    let c = concurrence.to_string();
    let s = seed.to_string();
    let (code, _, err) = bellgap(&["simulate", "--concurrence", &c, "--n", "100000", "--seed", &s, "--out", path_str(&path)]);
    assert_eq!(code, 0, "{err}");
    path
}

#[test]
fn exact_simulation_matches_tilted_constants() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.json");
    let (code, _, err) = bellgap(&["simulate", "--alpha", "0", "--exact", "--out", path_str(&path)]);
    assert_eq!(code, 0, "{err}");
    let b = parse_behavior(&fs::read(&path).unwrap(), &path).unwrap().behavior;
    let value = BellFunctional::chsh().evaluate(&b).unwrap();
    assert!((value - 2.0 * 2f64.sqrt()).abs() < 1e-12);

    let (code, _, _) = bellgap(&["simulate", "--alpha", "2", "--exact", "--out", path_str(&path)]);
    assert_eq!(code, 0);
    let b = parse_behavior(&fs::read(&path).unwrap(), &path).unwrap().behavior;
    assert!((b.p(0, 0, 0, 0) - 1.0).abs() < 1e-12);
}

#[test]
fn sampled_counts_record_their_source() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate_counts(dir.path(), "c.json", 0.5, 9);
    let data = read_counts(&path).unwrap();
    let source = data.source.unwrap();
    assert_eq!(source.seed, Some(9));
    assert_eq!(source.n_per_setting, Some(100_000));
    assert_eq!(source.concurrence, Some(0.5));
    assert!(source.sampler.is_some());
    let again = simulate_counts(dir.path(), "d.json", 0.5, 9);
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn bound_of_shipped_tilted_fixture() {
    let (code, out, err) = bellgap(&["bound", path_str(&fixture("tilted_alpha_1.json"))]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(field(&out, "bound").parse::<f64>().unwrap(), 3.0);
}

#[test]
fn zero_functional_evaluates_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let counts = simulate_counts(dir.path(), "c.json", 0.8, 1);
    let (code, out, err) = bellgap(&["evaluate", path_str(&fixture("zero.json")), path_str(&counts)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(field(&out, "q").parse::<f64>().unwrap(), 0.0);
    assert_eq!(field(&out, "delta_q").parse::<f64>().unwrap(), 0.0);
    assert_eq!(field(&out, "sdn"), "undefined");
}

#[test]
fn projection_writes_a_no_signaling_behavior() {
    let dir = tempfile::tempdir().unwrap();
    let counts = simulate_counts(dir.path(), "c.json", 0.6, 2);
    let out_path = dir.path().join("p.json");
    let (code, out, err) = bellgap(&["project", path_str(&counts), "--out", path_str(&out_path)]);
    assert_eq!(code, 0, "{err}");
    assert!(field(&out, "kl_divergence").parse::<f64>().unwrap() >= 0.0);
    let b = parse_behavior(&fs::read(&out_path).unwrap(), &out_path).unwrap().behavior;
    assert!(b.ns_residual().max() <= 1e-8);
}

#[test]
fn efficiency_of_chsh_on_ideal_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("b.json");
    bellgap(&["simulate", "--alpha", "0", "--exact", "--out", path_str(&b)]);
    let f = dir.path().join("chsh.json");
    write_json(&f, &functional_json(&BellFunctional::chsh(), Some("chsh"))).unwrap();
    let (code, out, err) = bellgap(&["efficiency", path_str(&f), path_str(&b), "--normalize", "4"]);
    assert_eq!(code, 0, "{err}");
    let eta = |mode: &str| -> f64 {
        field(&out, mode).split_whitespace().nth(1).unwrap().parse().unwrap()
    };
    assert!((eta("symmetric") - 2.0 / (1.0 + 2f64.sqrt())).abs() < 1e-9);
    assert!((eta("asymmetric_b_perfect") - 0.5f64.sqrt()).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"format_version": 9, "kind": "functional"}"#).unwrap();
    assert_eq!(bellgap(&["bound", path_str(&bad)]).0, EXIT_VALIDATION);
    assert_eq!(bellgap(&["bound", "/nonexistent/f.json"]).0, EXIT_VALIDATION);
    assert_eq!(bellgap(&["optimize", "x.json", "--out", "r.json"]).0, EXIT_VALIDATION);
    assert_eq!(bellgap(&["simulate", "--alpha", "3", "--exact", "--out", path_str(&bad)]).0, EXIT_VALIDATION);

    // Uniform statistics never violate, so no efficiency threshold exists.
    let uniform = dir.path().join("u.json");
    let sc = Scenario::chsh();
    let counts = bellgap::CountTable::new(sc, vec![250; sc.joint_len()]).unwrap();
    write_json(&uniform, &bellgap_cli::files::counts_json(&counts, None)).unwrap();
    let (code, _, err) = bellgap(&["efficiency", path_str(&fixture("tilted_alpha_1.json")), path_str(&uniform)]);
    assert_eq!(code, EXIT_NUMERICAL, "{err}");
}

fn report_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn optimize_report_contents() {
    let dir = tempfile::tempdir().unwrap();
    let counts = simulate_counts(dir.path(), "c.json", 0.7, 3);
    let report = dir.path().join("r.json");
    let (code, out, err) = bellgap(&[
        "optimize",
        path_str(&counts),
        "--seed",
        "5",
        "--restarts",
        "4",
        "--witness",
        path_str(&fixture("tilted_alpha_1.json")),
        "--projected",
        "--out",
        path_str(&report),
    ]);
    assert_eq!(code, 0, "{err}");
    let r = report_json(&report);
    assert_eq!(r["kind"], "analysis_report");
    assert_eq!(r["config"]["restarts"], 4);
    assert_eq!(r["config"]["projected"], true);
    assert_eq!(r["input"]["sha256"].as_str().unwrap().len(), 64);
    let names: Vec<&str> = r["functionals"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["optimized", "tilted", "tilted_alpha_1"]);
    for block in r["functionals"].as_array().unwrap() {
        let get = |k: &str| block[k].as_f64().unwrap();
        let gap = get("q") - get("delta_q") - get("c");
        assert!((gap - (get("r") - 1.0) * (get("c") + 4.0)).abs() < 1e-9);
        assert_eq!(block["nonlocal"].as_bool().unwrap(), get("r") > 1.0);
    }
    let deviations: Vec<&str> = r["deviations"].as_array().unwrap().iter().map(|d| d.as_str().unwrap()).collect();
    assert!(deviations.iter().any(|d| d.contains("no-signaling projection")));
    assert!(deviations.iter().any(|d| d.contains("tilted_alpha_1") && d.contains("rescaled")));

    let functional_path = PathBuf::from(field(&out, "functional"));
    let saved = bellgap_cli::files::read_functional(&functional_path).unwrap();
    assert!(saved.functional.joint().iter().all(|v| v.abs() <= 1.0));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let counts = simulate_counts(dir.path(), "c.json", 0.9, 4);
    let config = dir.path().join("cfg.json");
    fs::write(&config, r#"{"restarts": 3, "engine": "nelder_mead", "max_iters": 50}"#).unwrap();
    let report = dir.path().join("r.json");
    let args = |extra: &[&'static str]| {
        let mut v = vec!["optimize", path_str(&counts), "--seed", "1", "--config", path_str(&config)];
        v.extend_from_slice(extra);
        v.extend_from_slice(&["--out", path_str(&report)]);
        v.into_iter().map(str::to_owned).collect::<Vec<_>>()
    };
    let run_args = |a: Vec<String>| {
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        bellgap(&refs)
    };
    assert_eq!(run_args(args(&[])).0, 0);
    let r = report_json(&report);
    assert_eq!(r["config"]["restarts"], 3);
    assert_eq!(r["config"]["engine"], "nelder_mead");
    assert_eq!(run_args(args(&["--restarts", "2", "--engine", "gradient"])).0, 0);
    let r = report_json(&report);
    assert_eq!(r["config"]["restarts"], 2);
    assert_eq!(r["config"]["engine"], "gradient");
    assert_eq!(r["config"]["max_iters"], 50);

    fs::write(&config, r#"{"seed": 3}"#).unwrap();
    assert_eq!(run_args(args(&[])).0, EXIT_VALIDATION);
}

#[test]
fn batch_report_writes_figure_series() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate_counts(dir.path(), "high.json", 0.9, 6);
    let b = simulate_counts(dir.path(), "low.json", 0.4, 7);
    let out_dir = dir.path().join("out");
    let (code, _, err) = bellgap(&[
        "report",
        path_str(&a),
        path_str(&b),
        "--seed",
        "2",
        "--restarts",
        "4",
        "--out-dir",
        path_str(&out_dir),
    ]);
    assert_eq!(code, 0, "{err}");
    let sdn = fs::read_to_string(out_dir.join("sdn.csv")).unwrap();
    let rows: Vec<Vec<f64>> = sdn
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], 0.4);
    for row in &rows {
        assert!(row[2] >= row[1]);
    }
    for name in ["efficiency_asymmetric.csv", "efficiency_symmetric.csv"] {
        let text = fs::read_to_string(out_dir.join(name)).unwrap();
        assert!(text.starts_with("concurrence,eta_tilted,eta_optimized\n"));
        assert_eq!(text.lines().count(), 3);
    }
    assert!(out_dir.join("high.report.json").exists());
}
