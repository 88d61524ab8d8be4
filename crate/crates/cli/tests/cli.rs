use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn wtp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wtp"))
        .arg("--quiet")
        .args(args)
        .output()
        .expect("spawn wtp")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn config(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const SHORT: &str = "[simulation]\nduration_h = 12.0\n";

#[test]
fn run_writes_trace_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SHORT);
    let out = dir.path().join("out");
    let o = wtp(&["run", &cfg, "--controller", "reactive", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("reactive: 288 steps"), "{}", stdout(&o));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 289);
    let metrics = fs::read_to_string(out.join("metrics.json")).unwrap();
    assert!(metrics.contains("\"total_emissions_kg\""));
}

#[test]
fn missing_config_is_a_one_line_io_error() {
    let o = wtp(&["run", "/nonexistent/plant.toml"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error[E_IO]"), "{err}");
    assert!(err.contains("/nonexistent/plant.toml"), "{err}");
}

#[test]
fn unknown_key_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[controller.mpc]\nhorizon = 3\n");
    let o = wtp(&["run", &cfg]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.starts_with("error[E_CONFIG]"), "{err}");
    assert!(err.contains("controller.mpc.horizon"), "{err}");
}

#[test]
fn bad_controller_and_bad_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SHORT);
    let o = wtp(&["run", &cfg, "--controller", "pid"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("pid"), "{}", stderr(&o));

    let o = wtp(&["run", &cfg, "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[E_USAGE]"), "{}", stderr(&o));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SHORT);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = wtp(&["run", &cfg, "--seed", "7", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push((fs::read(out.join("trace.csv")).unwrap(), fs::read(out.join("metrics.json")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);

    let out = dir.path().join("c");
    assert!(wtp(&["run", &cfg, "--out", out.to_str().unwrap()]).status.success());
    assert_ne!(fs::read(out.join("trace.csv")).unwrap(), outputs[0].0);
}

#[test]
fn compare_writes_all_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SHORT);
    let o = wtp(&["compare", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["trace_reactive.csv", "trace_mpc.csv", "metrics_reactive.json", "metrics_mpc.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let cmp = fs::read_to_string(dir.path().join("comparison.json")).unwrap();
    assert!(cmp.contains("y_c_min"), "{cmp}");
    assert!(stdout(&o).contains("emissions savings"), "{}", stdout(&o));
}

fn savings(stdout: &str) -> f64 {
    let line = stdout.lines().find(|l| l.starts_with("emissions savings")).unwrap();
    line.rsplit(' ').next().unwrap().trim_end_matches('%').parse().unwrap()
}

#[test]
fn without_an_emissions_weight_or_signal_savings_are_small() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "[emissions]\nsource = \"constant\"\n\n[controller.mpc]\npriority_emissions = 0.0\n",
    );
    let o = wtp(&["compare", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = savings(&stdout(&o));
    assert!(s.abs() < 5.0, "savings {s}%");
}

#[test]
fn fit_on_bundled_mix_recovers_the_generator() {
    let dir = tempfile::tempdir().unwrap();
    let phi = dir.path().join("phi.csv");
    let mix = repo().join("data/sample_mix.csv");
    let o = wtp(&["fit", mix.to_str().unwrap(), "--emit-phi", phi.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let want = [("wind", 11.0), ("solar", 45.0), ("hydro", 24.0), ("gas", 450.0), ("coal", 950.0), ("nuclear", 12.0)];
    for (name, v) in want {
        let line = text.lines().find(|l| l.starts_with(&format!("{name},"))).unwrap();
        let got: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((got - v).abs() < 1e-4, "{name}: {got}");
    }
    let phi_text = fs::read_to_string(&phi).unwrap();
    assert_eq!(phi_text.lines().count(), 121);
    assert_eq!(phi_text.lines().next(), Some("hour,phi_kg_per_kwh"));
}

#[test]
fn malformed_mix_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let src = fs::read_to_string(repo().join("data/sample_mix.csv")).unwrap();
    let mut lines: Vec<String> = src.lines().map(str::to_owned).collect();
    lines[4] = "3,not-a-number,0,1,2,3,4,5".into();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, lines.join("\n")).unwrap();
    let o = wtp(&["fit", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("line 5"), "{err}");
}

fn reactive_trace(dir: &Path) -> PathBuf {
    let cfg = repo().join("configs/default.toml");
    let o = wtp(&["run", cfg.to_str().unwrap(), "--controller", "reactive", "--out", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("trace.csv")
}

#[test]
fn plotdata_series() {
    let dir = tempfile::tempdir().unwrap();
    let trace = reactive_trace(dir.path());
    let trace = trace.to_str().unwrap();

    let out = dir.path().join("cl.csv");
    let o = wtp(&["plotdata", trace, "--series", "chlorine", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2880);
    assert!(rows.iter().all(|r| r.split(',').count() == 2));

    let o = wtp(&["plotdata", trace, "--series", "yD"]);
    assert!(o.status.success());
    for row in stdout(&o).lines().skip(1) {
        let y: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!((77.0..=95.0).contains(&y), "{row}");
    }

    let o = wtp(&["plotdata", trace, "--series", "tanks"]);
    assert_eq!(stdout(&o).lines().count(), 1 + 2 * 2880);

    let o = wtp(&["plotdata", trace, "--series", "pressure"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("yD, tanks, flows, emissions, chlorine"), "{err}");
}

#[test]
fn plotdata_rejects_an_empty_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = reactive_trace(dir.path());
    let header = fs::read_to_string(&trace).unwrap().lines().next().unwrap().to_owned();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, header + "\n").unwrap();
    let o = wtp(&["plotdata", empty.to_str().unwrap(), "--series", "yD"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error[E_RANGE]"), "{}", stderr(&o));
}

#[test]
fn dumped_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SHORT);
    let dump = dir.path().join("effective.toml");
    let a = dir.path().join("a");
    let o = wtp(&[
        "run",
        &cfg,
        "--seed",
        "3",
        "--out",
        a.to_str().unwrap(),
        "--dump-effective-config",
        dump.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let b = dir.path().join("b");
    let o = wtp(&["run", dump.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(a.join("trace.csv")).unwrap(), fs::read(b.join("trace.csv")).unwrap());
}

#[test]
fn synth_mix_round_trips_through_fit() {
    let dir = tempfile::tempdir().unwrap();
    let mix = dir.path().join("mix.csv");
    let o = wtp(&["synth-mix", "--hours", "48", "--seed", "9", "--out", mix.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&mix).unwrap().lines().count(), 49);
    assert!(wtp(&["fit", mix.to_str().unwrap()]).status.success());
}
