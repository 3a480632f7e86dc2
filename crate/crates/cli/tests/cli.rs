use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn satnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_satnls"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const GAUSS: &str = "
[grid]
n = 256
length = 64

[model]
saturation = cutoff
h = 0.5

[time]
dt = 0.005
t_final = 1

[datum]
kind = gaussian

[diagnostics]
every = 20
";

const ROUGH: &str = "
[grid]
n = 128
length = 6.283185307179586

[model]
saturation = rational-sat
h = 0.5

[time]
dt = 0.001
t_final = 0.1

[datum]
kind = prescribed-regularity
regularity = 1
seed = 4

[diagnostics]
every = 10
norms = 0.5, 2
";

#[test]
fn no_arguments_prints_usage() {
    let out = satnls(&[]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("Usage"), "{text}");
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = satnls(&["integrate", "--config", "x.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn conserve_passes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "gauss.cfg", GAUSS);
    let out_dir = dir.path().join("out");
    let out = satnls(&["conserve", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());

    let report = read_json(&out_dir.join("conserve.json"));
    assert!(report["mass_drift"].as_f64().unwrap() <= 1e-11);
    assert_eq!(report["verdict"], "pass");

    let csv = fs::read_to_string(out_dir.join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,mass,energy,h1_norm"));
    assert_eq!(lines.count(), 11);

    let manifest = read_json(&out_dir.join("manifest.json"));
    assert_eq!(manifest["subcommand"], "conserve");
    assert_eq!(manifest["config_digest"].as_str().unwrap().len(), 64);
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    for name in ["diagnostics.csv", "diagnostics.gp", "final.field", "conserve.json", "manifest.json"] {
        assert!(outputs.contains(&name), "{name} missing from {outputs:?}");
        assert!(out_dir.join(name).exists());
    }
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rough.cfg", ROUGH);
    let run = |name: &str, seed: &str| {
        let out_dir = dir.path().join(name);
        let out = satnls(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--seed", seed, "--quiet"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(out_dir.join("diagnostics.csv")).unwrap()
    };
    let a = run("a", "9");
    let b = run("b", "9");
    let c = run("c", "10");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let header = String::from_utf8(a).unwrap();
    assert!(header.starts_with("t,mass,energy,h1_norm,hs_0.5,hs_2\n"));

    let manifest = read_json(&dir.path().join("a").join("manifest.json"));
    assert_eq!(manifest["seeds"]["datum"], 9);
}

#[test]
fn config_errors_exit_2_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let bad = GAUSS.replace("h = 0.5", "h = 0.5\nsigmaa = 2");
    let cfg = write_config(dir.path(), "bad.cfg", &bad);
    let out = satnls(&["simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("line 9: unknown key 'sigmaa'"), "{text}");

    let missing = dir.path().join("missing.cfg");
    let out = satnls(&["simulate", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.cfg"));
}

#[test]
fn inapplicable_flags_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "gauss.cfg", GAUSS);
    let out_dir = dir.path().join("out");
    let out = satnls(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = satnls(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--h-list", "0.5,0.25"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn aborted_simulation_exits_1_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let leaky = GAUSS.replace("length = 64", "length = 12").replace("kind = gaussian", "kind = gaussian\nwave_vector = 20");
    let cfg = write_config(dir.path(), "leaky.cfg", &leaky);
    let out_dir = dir.path().join("out");
    let out = satnls(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let abort = read_json(&out_dir.join("abort.json"));
    assert!(abort["message"].as_str().unwrap().contains("boundary leak"));
    assert!(out_dir.join("diagnostics.csv").exists());
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn converge_writes_report_and_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "gauss.cfg", &GAUSS.replace("n = 256", "n = 512"));
    let out_dir = dir.path().join("out");
    let out = satnls(&[
        "converge",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--h-list",
        "0.5,0.4,0.3,0.25",
        "--norms",
        "0,1",
    ]);
    assert!(matches!(out.status.code(), Some(0) | Some(1)), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&out_dir.join("converge.json"));
    for key in ["h", "errors", "slope", "r2", "claimed_rate", "verdict", "config_digest"] {
        assert!(report.get(key).is_some(), "missing key {key}");
    }
    assert_eq!(report["h"].as_array().unwrap().len(), 4);
    assert!(report["slope"]["L2"].is_number());
    assert_eq!(report["verdict"], "observed");
    let script = fs::read_to_string(out_dir.join("rates.gp")).unwrap();
    assert!(script.contains("rates.dat"));
    assert!(script.contains("set logscale xy"));
}

#[test]
fn blowup_on_defocusing_config_is_not_applicable() {
    let dir = tempfile::tempdir().unwrap();
    let text = GAUSS
        .replace("saturation = cutoff\nh = 0.5", "sigma = 3")
        .replace("kind = gaussian", "kind = sech")
        .replace("t_final = 1", "t_final = 0.1");
    let cfg = write_config(dir.path(), "defocus.cfg", &text);
    let out_dir = dir.path().join("out");
    let out = satnls(&["blowup", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&out_dir.join("blowup.json"));
    assert_eq!(report["verdict"], "not-applicable");
    assert_eq!(report["saturated_outcomes"].as_array().unwrap().len(), 2);
}

#[test]
fn ode_demo_needs_concentrated_datum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "gauss.cfg", GAUSS);
    let out = satnls(&["ode-demo", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("concentrated"));
}
