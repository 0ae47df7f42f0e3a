use std::path::PathBuf;
use std::process::{Command, Output};

fn preset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("presets").join(format!("{name}.json"))
}

fn gmin(args: &[&str]) -> Output {
    gmin_env(args, &[])
}

fn gmin_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gmin"));
    cmd.args(args).env_remove("GM_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("failed to run gmin")
}

fn with_preset(cmd: &str, name: &str, extra: &[&str]) -> Output {
    let p = preset(name);
    let mut args = vec![cmd, "--config", p.to_str().unwrap()];
    args.extend_from_slice(extra);
    gmin(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", stdout(o)))
}

#[test]
fn solve_two_atoms_on_unit_interval() {
    let o = with_preset("solve", "gauss-b1", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    let atoms: Vec<f64> = serde_json::from_value(v["atoms"].clone()).unwrap();
    assert_eq!(atoms.len(), 2);
    assert!(atoms[0].abs() < 1e-9 && (atoms[1] - 1.0).abs() < 1e-9);
    let want = (1.0 + (-0.5f64).exp()) / 2.0;
    assert!((v["v_star"].as_f64().unwrap() - want).abs() < 1e-9);
}

#[test]
fn flat_minimizer_exits_with_code_two() {
    for cmd in ["solve", "asym", "verify", "mu-plot"] {
        let o = with_preset(cmd, "composite-flat", &["--n", "10000"]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        assert!(stderr(&o).contains("continuous-support minimizer detected"), "{cmd}: {}", stderr(&o));
    }
}

#[test]
fn second_breakpoint_prints_only_upper_bound() {
    let o = with_preset("asym", "gauss-c2", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("degenerate: P = o(u^-3 exp(-u^2/2V*))"), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["nondegenerate"], false);
    assert!(v["prefactor"].is_null());
    assert!(!stderr(&o).contains("u,tail"));
}

#[test]
fn single_atom_composite_example() {
    let o = with_preset("asym", "composite-quartic", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["k"], 1);
    assert!((v["v_star"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let w = v["expected_w"]["mean"].as_f64().unwrap();
    assert!((w - (2.0f64 / 3.0).sqrt()).abs() < 1e-9, "{w}");
}

#[test]
fn all_presets_parse_and_run() {
    for name in ["gauss-b1", "gauss-c1", "gauss-b3", "gauss-c2", "sinc-b6", "composite-quartic"] {
        let o = with_preset("asym", name, &[]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        json(&o);
    }
}

#[test]
fn mu_plot_has_header_and_2001_rows() {
    let o = with_preset("mu-plot", "gauss-b3", &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,mu");
    assert_eq!(lines.len(), 2002);
    let min = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!((min - 1.0).abs() < 1e-6, "{min}");
}

#[test]
fn negative_level_gives_probability_one() {
    let o = gmin(&["verify", "--u=-10", "--n", "10000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    let p = v[0]["p_hat"].as_f64().unwrap();
    assert!((p - 1.0).abs() < 1e-12, "{p}");
}

#[test]
fn strict_mode_fails_on_low_ess() {
    let o = gmin(&["verify", "--strict", "--n", "1000", "--u", "5"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("LOW ESS") || stderr(&o).contains("strict"));
    let relaxed = gmin(&["verify", "--n", "1000", "--u", "5"]);
    assert_eq!(relaxed.status.code(), Some(0));
}

#[test]
fn verify_is_byte_identical_across_runs_and_threads() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let p = preset("gauss-b1");
    let args = |d: &tempfile::TempDir| {
        vec![
            "verify".to_string(),
            "--config".into(),
            p.to_str().unwrap().into(),
            "--n".into(),
            "30000".into(),
            "--u".into(),
            "4".into(),
            "--out".into(),
            d.path().to_str().unwrap().into(),
        ]
    };
    let a1 = args(&d1);
    let a2 = args(&d2);
    let o1 = gmin_env(&a1.iter().map(String::as_str).collect::<Vec<_>>(), &[("GM_THREADS", "1")]);
    let o2 = gmin_env(&a2.iter().map(String::as_str).collect::<Vec<_>>(), &[("GM_THREADS", "4")]);
    assert_eq!(o1.status.code(), Some(0), "{}", stderr(&o1));
    assert_eq!(o2.status.code(), Some(0), "{}", stderr(&o2));
    for name in ["verify.json", "samples_u4.0.csv", "fluctuation_u4.0.csv"] {
        let b1 = std::fs::read(d1.path().join(name)).unwrap();
        let b2 = std::fs::read(d2.path().join(name)).unwrap();
        assert!(!b1.is_empty());
        assert_eq!(b1, b2, "{name} differs");
    }
}

#[test]
fn seed_changes_the_sample() {
    let a = gmin(&["verify", "--n", "20000", "--u", "3", "--seed", "1"]);
    let b = gmin(&["verify", "--n", "20000", "--u", "3", "--seed", "2"]);
    assert_ne!(json(&a)[0]["p_hat"], json(&b)[0]["p_hat"]);
}

#[test]
fn solution_json_round_trips_through_files() {
    let d = tempfile::tempdir().unwrap();
    let o = gmin(&["solve", "--config", preset("sinc-b6").to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("V*"));
    let text = std::fs::read_to_string(d.path().join("solution.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let again: serde_json::Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(again, v);
    assert_eq!(v["atoms"].as_array().unwrap().len(), 3);
}

#[test]
fn breakpoints_table() {
    let o = gmin(&["breakpoints"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("family,c1,c2"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "gaussian");
    let c1: f64 = row[1].parse().unwrap();
    let c2: f64 = row[2].parse().unwrap();
    assert!((c1 - 2.2079).abs() < 1e-3 && (c2 - 3.9283).abs() < 1e-3, "{c1} {c2}");
}

#[test]
fn bad_config_is_rejected_with_location() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("bad.json");
    std::fs::write(&p, "{\"kernel\": {\"family\": \"gaussian\"},\n \"interval\": {\"a\": 0, \"b\": 1},\n \"sovler\": {}}").unwrap();
    let o = gmin(&["solve", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("sovler") && e.contains("line 3"), "{e}");
}

#[test]
fn invalid_thread_count_is_an_error() {
    let o = gmin_env(&["breakpoints"], &[("GM_THREADS", "zero")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("GM_THREADS"));
}
