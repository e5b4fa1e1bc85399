use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use diffspline::diffeo::Diffeo;
use diffspline::spectral::io::write_field;
use diffspline::spectral::{GridSpec, Momentum, VectorField};
use serde_json::{json, Value};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffspline"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.display().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Asserts a failed run with one `error[code]: ...` line on stderr.
fn assert_error(out: &Output, code: &str) -> String {
    assert!(!out.status.success());
    let err = stderr(out);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with(&format!("error[{code}]: ")), "{err}");
    lines[0].to_string()
}

fn passes(v: &Value) -> Vec<(String, bool)> {
    v["checks"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, c)| (k.clone(), c["pass"].as_bool().unwrap()))
        .collect()
}

#[test]
fn check_passes_and_writes_sorted_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["check", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = stdout_json(&out);
    assert_eq!(v["all_pass"], json!(true));
    let names: Vec<String> = passes(&v).into_iter().map(|(k, _)| k).collect();
    assert_eq!(names, ["conservation", "duality", "gradient", "gronwall"]);
    let text = fs::read_to_string(dir.path().join("checks.json")).unwrap();
    // keys appear in sorted order in the file itself
    let (a, c) = (text.find("\"all_pass\"").unwrap(), text.find("\"checks\"").unwrap());
    assert!(a < c && c < text.find("\"seed\"").unwrap());
}

#[test]
fn sign_flip_canary_fails_duality_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "check.json", &json!({ "inject_coad_sign_flip": true }));
    let out = run(&["check", "--config", &cfg]);
    let line = assert_error(&out, "check-failed");
    assert!(line.contains("duality"));
    let v = stdout_json(&out);
    assert_eq!(v["all_pass"], json!(false));
    for (name, pass) in passes(&v) {
        assert_eq!(pass, name != "duality", "{name}");
    }
}

#[test]
fn check_outcome_does_not_depend_on_seed() {
    let a = stdout_json(&run(&["check", "--seed", "1"]));
    let b = stdout_json(&run(&["check", "--seed", "99"]));
    assert_eq!(passes(&a), passes(&b));
    assert_eq!(a["all_pass"], json!(true));
}

fn settings(dim: usize, n: usize, s: f64, s_prime: f64, steps: usize) -> Value {
    json!({ "grid": { "dim": dim, "n": n }, "s": s, "s_prime": s_prime, "time_steps": steps })
}

fn merge(mut base: Value, extra: Value) -> Value {
    for (k, v) in extra.as_object().unwrap() {
        base[k] = v.clone();
    }
    base
}

#[test]
fn identity_spline_converges_with_zero_objective() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "p.json", &settings(1, 32, 2.0, 3.0, 8));
    let res = dir.path().join("res");
    let out = run(&["spline", "--config", &cfg, "--out", res.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&res.join("report.json"));
    assert_eq!(report["numerics"]["objective"], json!(0.0));
    assert_eq!(report["numerics"]["converged"], json!(true));
    assert!(res.join("trajectory/manifest.json").exists());
    assert!(res.join("control/alpha_0008.bin").exists());
}

#[test]
fn order_hypothesis_rejected_before_loading_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = merge(
        settings(1, 32, 2.0, 2.5, 8),
        json!({ "boundary": { "phi1": "does_not_exist.bin" } }),
    );
    let cfg = write_config(dir.path(), "p.json", &cfg);
    let res = dir.path().join("res");
    let out = run(&["spline", "--config", &cfg, "--out", res.to_str().unwrap()]);
    let line = assert_error(&out, "validation");
    assert!(line.contains("s' >= s + 1"), "{line}");
    assert!(!res.exists());

    // smoothness of the metric is checked as well
    let cfg = write_config(dir.path(), "q.json", &settings(2, 16, 1.5, 3.0, 8));
    assert_error(
        &run(&["spline", "--config", &cfg, "--out", res.to_str().unwrap()]),
        "validation",
    );
}

#[test]
fn missing_field_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = merge(
        settings(1, 32, 2.0, 3.0, 8),
        json!({ "boundary": { "phi1": "nowhere/phi1.bin" } }),
    );
    let cfg = write_config(dir.path(), "p.json", &cfg);
    let out = run(&[
        "spline",
        "--config",
        &cfg,
        "--out",
        dir.path().join("r").to_str().unwrap(),
    ]);
    let line = assert_error(&out, "io");
    assert!(line.contains("nowhere/phi1"), "{line}");

    let cfg = write_config(
        dir.path(),
        "g.json",
        &json!({ "grid": { "dim": 1, "n": 32 }, "s": 2.0, "time_steps": 8, "momentum": "m.bin" }),
    );
    let out = run(&[
        "geodesic",
        "--config",
        &cfg,
        "--out",
        dir.path().join("g").to_str().unwrap(),
    ]);
    let line = assert_error(&out, "io");
    assert!(line.contains("m.json") || line.contains("m.bin"), "{line}");
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "p.json",
        &merge(settings(1, 32, 2.0, 3.0, 8), json!({ "penalty_start": 5 })),
    );
    let line = assert_error(&run(&["spline", "--config", &cfg, "--out", "unused"]), "usage");
    assert!(line.contains("penalty_start"), "{line}");

    let cfg = write_config(
        dir.path(),
        "q.json",
        &json!({ "grid": { "dim": 1, "n": 32 }, "s": 2.0, "time_steps": 8 }),
    );
    let line = assert_error(&run(&["spline", "--config", &cfg, "--out", "unused"]), "usage");
    assert!(line.contains("s_prime"), "{line}");

    assert_error(&run(&["spline", "--out", "unused"]), "usage");
    assert_error(&run(&["frobnicate"]), "usage");
}

fn translation_config(dir: &Path, name: &str, init: &str) -> String {
    let g = GridSpec::new(1, 32).unwrap();
    Diffeo::translation(&g, &[0.3])
        .write(&dir.join("shift.bin"), "phi1")
        .unwrap();
    let cfg = merge(
        settings(1, 32, 2.0, 3.0, 16),
        json!({ "boundary": { "phi1": "shift.bin" }, "init": init, "init_amplitude": 0.05 }),
    );
    write_config(dir, name, &cfg)
}

#[test]
fn solve_reports_are_reproducible_and_multistart_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = translation_config(dir.path(), "p.json", "random");
    let mut numerics = Vec::new();
    for tag in ["a", "b"] {
        let res = dir.path().join(tag);
        let out = run(&[
            "spline",
            "--config",
            &cfg,
            "--out",
            res.to_str().unwrap(),
            "--seed",
            "7",
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        numerics.push(serde_json::to_string(&read_json(&res.join("report.json"))["numerics"]).unwrap());
    }
    assert_eq!(numerics[0], numerics[1]);

    let zero_cfg = translation_config(dir.path(), "z.json", "zero");
    let res = dir.path().join("z");
    assert!(run(&["spline", "--config", &zero_cfg, "--out", res.to_str().unwrap()])
        .status
        .success());
    let zero = read_json(&res.join("report.json"))["numerics"]["objective"]
        .as_f64()
        .unwrap();
    let random = read_json(&dir.path().join("a/report.json"))["numerics"]["objective"]
        .as_f64()
        .unwrap();
    assert!(zero > 0.0);
    assert!((zero - random).abs() / zero < 5e-4, "{zero} {random}");
}

#[test]
fn zero_momentum_geodesic_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridSpec::new(2, 16).unwrap();
    write_field(&Momentum::zeros(&g), &dir.path().join("m0.bin"), "m", &[]).unwrap();
    let cfg = write_config(
        dir.path(),
        "g.json",
        &json!({ "grid": { "dim": 2, "n": 16 }, "s": 2.5, "time_steps": 8, "momentum": "m0.bin" }),
    );
    let res = dir.path().join("res");
    let out = run(&["geodesic", "--config", &cfg, "--out", res.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&res.join("conservation.json"));
    assert_eq!(report["all_pass"], json!(true));
    let last = Diffeo::read(&res.join("trajectory/phi_0008.bin")).unwrap();
    assert_eq!(last.displacement().max_abs(), 0.0);
}

#[test]
fn single_mode_geodesic_conserves_energy() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridSpec::new(1, 64).unwrap();
    let v = VectorField::from_fn(&g, |x, o| o[0] = 0.1 * x[0].sin());
    write_field(&v, &dir.path().join("v0.bin"), "v", &[]).unwrap();
    let cfg = json!({ "grid": { "dim": 1, "n": 64 }, "s": 2.0, "time_steps": 64, "velocity": "v0.bin", "interpolation": "spectral" });
    let cfg = write_config(dir.path(), "g.json", &cfg);
    let res = dir.path().join("res");
    let out = run(&["geodesic", "--config", &cfg, "--out", res.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&res.join("conservation.json"));
    assert!(report["energy_drift"].as_f64().unwrap() <= 1e-5, "{report}");
}

/// Shoots a geodesic with the CLI and returns the directory holding its trajectory.
fn shoot_fixture(dir: &Path, steps: usize) -> std::path::PathBuf {
    let g = GridSpec::new(2, 16).unwrap();
    let v = VectorField::from_fn(&g, |x, o| {
        o[0] = 0.15 * x[1].sin() + 0.05 * x[0].cos();
        o[1] = 0.1 * (x[0] + x[1]).cos();
    });
    write_field(&v, &dir.join("v0.bin"), "v", &[]).unwrap();
    let cfg = json!({ "grid": { "dim": 2, "n": 16 }, "s": 2.5, "time_steps": steps, "velocity": "v0.bin" });
    let cfg = write_config(dir, "geo.json", &cfg);
    let res = dir.join("geo");
    let out = run(&["geodesic", "--config", &cfg, "--out", res.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    res.join("trajectory")
}

#[test]
fn geodesic_output_feeds_a_spline_with_zero_objective() {
    let dir = tempfile::tempdir().unwrap();
    shoot_fixture(dir.path(), 8);
    let cfg = merge(
        settings(2, 16, 2.5, 3.5, 8),
        json!({ "boundary": {
            "phi0": "geo/trajectory/phi_0000.bin",
            "v0": "geo/trajectory/v_0000.bin",
            "phi1": "geo/trajectory/phi_0008.bin",
            "v1": "geo/trajectory/v_0008.bin",
        }}),
    );
    let cfg = write_config(dir.path(), "spline.json", &cfg);
    let res = dir.path().join("res");
    let out = run(&["spline", "--config", &cfg, "--out", res.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let objective = read_json(&res.join("report.json"))["numerics"]["objective"]
        .as_f64()
        .unwrap();
    assert!(objective <= 1e-6, "{objective}");
}

#[test]
fn sequence_through_geodesic_knots() {
    let dir = tempfile::tempdir().unwrap();
    shoot_fixture(dir.path(), 12);
    let mut s = settings(2, 16, 2.5, 3.5, 12);
    s["tolerances"] = json!({ "endpoint": 1e-5 });
    let cfg = merge(
        s,
        json!({ "knots": {
            "times": [1.0 / 3.0, 2.0 / 3.0, 1.0],
            "targets": ["geo/trajectory/phi_0004.bin", "geo/trajectory/phi_0008.bin", "geo/trajectory/phi_0012.bin"],
            "initial_speed_weight": 1e-3,
        }}),
    );
    let cfg = write_config(dir.path(), "seq.json", &cfg);
    let res = dir.path().join("res");
    let out = run(&["sequence", "--config", &cfg, "--out", res.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = read_json(&res.join("report.json"));
    assert_eq!(report["numerics"]["knots"].as_array().unwrap().len(), 3);
    assert!(report["numerics"]["objective"].as_f64().unwrap() <= 1e-5);

    // the speed weight must be positive
    let mut bad = read_json(Path::new(&cfg));
    bad["knots"]["initial_speed_weight"] = json!(0.0);
    let bad = write_config(dir.path(), "bad.json", &bad);
    assert_error(
        &run(&["sequence", "--config", &bad, "--out", res.to_str().unwrap()]),
        "validation",
    );
}
