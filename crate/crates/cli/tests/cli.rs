//! End-to-end tests of the `saser` binary: exit codes, output files and
//! determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn saser(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saser")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// A 2 × 2 pump-off transmission map at a small cutoff.
const TINY_MAP: &str = r#"{
  "experiment": "rabi_map",
  "params": {"fock_cutoff": 2},
  "axes": [
    {"name": "delta_ge", "start": -20, "stop": 20, "points": 2},
    {"name": "probe_detuning", "start": -1, "stop": 1, "points": 2}
  ]
}"#;

#[test]
fn presets_are_listed_and_printable() {
    let o = saser(&["presets"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["fig3a", "fig3b", "fig3d", "fig4a", "fig4b", "figS4"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
    let o = saser(&["presets", "fig3a"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["config"]["experiment"], "rabi_map");
    assert!(v["solver_rationale"].as_str().unwrap().starts_with("full_quantum"));
    assert_eq!(code(&saser(&["presets", "fig9z"])), 2);
}

#[test]
fn every_figure_preset_validates() {
    for name in ["fig3a", "fig3b", "fig3d", "fig4a", "fig4b", "figS4"] {
        let o = saser(&["validate", "--preset", name]);
        assert_eq!(code(&o), 0, "{name}: {}", stderr(&o));
    }
}

#[test]
fn validation_errors_exit_2_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write(dir.path(), "typo.json", "{\n  \"experiment\": \"rabi_map\",\n  \"params\": {\"gama_eg\": 3}\n}");
    let o = saser(&["validate", "--config", typo.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("gama_eg"), "{}", stderr(&o));

    let neg = write(dir.path(), "neg.json", r#"{"experiment": "rabi_map", "params": {"gamma_eg": -1}}"#);
    let o = saser(&["run", "--config", neg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("gamma_eg"), "{}", stderr(&o));

    let broken = write(dir.path(), "broken.json", "{\n  \"experiment\": \"rabi_map\",\n  \"params\": {\n}");
    let o = saser(&["validate", "--config", broken.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let o = saser(&["run", "--preset", "fig3a", "--override", "axes.probe_detuning.points=1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("points"), "{}", stderr(&o));
}

#[test]
fn missing_config_and_unwritable_output_exit_4() {
    let o = saser(&["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("/nonexistent/config.json"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.json", TINY_MAP);
    let o = saser(&["run", "--config", cfg.to_str().unwrap(), "--out", "/nonexistent/dir/out.csv"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("/nonexistent/dir/out.csv"));
}

#[test]
fn mean_field_non_convergence_exits_3() {
    let o = saser(&[
        "run",
        "--preset",
        "figS4",
        "--override",
        "axes.omega_pump.points=2",
        "--override",
        "axes.omega_pump.start=200",
        "--override",
        "axes.omega_pump.stop=300",
        "--override",
        "mean_field_tolerance=1e-300",
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn memory_guard_refuses_before_solving() {
    let start = std::time::Instant::now();
    let o = saser(&["run", "--preset", "fig4b", "--override", "fock_cutoff=400"]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("refused") && err.contains("semiclassical"), "{err}");
    let o = saser(&["run", "--preset", "fig4b", "--override", "memory_budget_mb=1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("memory_budget_mb"));
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn two_by_two_csv_has_four_rows_and_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.json", TINY_MAP);
    let out = dir.path().join("tiny.csv");
    let o = saser(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5, "{text}");
    assert!(lines[0].starts_with("delta_ge,probe_detuning,t_re,t_im,abs_t"));
    assert!(lines[1].starts_with("-20,-1,"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tiny.json", TINY_MAP);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        let o = saser(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let (ja, jb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ja, jb);
    let v: Value = serde_json::from_slice(&ja).unwrap();
    let prov = &v["provenance"];
    assert_eq!(prov["solver"], "full_quantum");
    assert_eq!(prov["params_hash"].as_str().unwrap().len(), 16);
    assert!(prov["tolerances"]["steady_residual"].is_number());
    assert_eq!(v["payload"]["abs_t"].as_array().unwrap().len(), 2);

    // Semiclassical runs too, to stdout.
    let args = ["run", "--preset", "estimates", "--format", "json", "--override", "numerical_optimum=false"];
    let (x, y) = (saser(&args), saser(&args));
    assert_eq!(code(&x), 0, "{}", stderr(&x));
    assert_eq!(x.stdout, y.stdout);
}

#[test]
fn fit_subcommand_recovers_a_voigt_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("frequency_MHz,psd\n");
    for i in 0..401 {
        let f = -2.0 + 4.0 * i as f64 / 400.0;
        let w: f64 = 0.2;
        let y = 5.0 * (w / 2.0).powi(2) / (f * f + (w / 2.0).powi(2)) + 0.01;
        text.push_str(&format!("{f},{y}\n"));
    }
    let data = write(dir.path(), "line.csv", &text);
    let out = dir.path().join("fit.json");
    let o = saser(&["fit", "--model", "voigt", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["summary"]["converged"], true);
    let lf = v["summary"]["params"]["lorentz_fwhm"].as_f64().unwrap();
    assert!((lf - 0.2).abs() < 1e-3, "{lf}");
    let o = saser(&["fit", "--model", "voigt", "--data", data.to_str().unwrap(), "--init", "nope=1"]);
    assert_eq!(code(&o), 2);
    let o = saser(&["fit", "--model", "voigt", "--data", "/nonexistent.csv"]);
    assert_eq!(code(&o), 4);
}
