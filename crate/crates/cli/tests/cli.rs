use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lightcone"))
}

fn config(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn lightcone")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad json ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn verify_cylinder_within_tolerance() {
    let out = run(&["verify", "--chart", "cylinder_r31", "--grid", "20x20", "--order", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let j = json(&out);
    assert_eq!(j["command"], "verify");
    assert_eq!(j["status"], "pass");
    for key in ["normalization", "structure", "integrability"] {
        assert!(num(&j["results"]["max"][key]) <= 1e-8, "{key}");
    }
    for key in ["max", "mean", "argmax_point"] {
        assert!(!j["residual_summary"][key].is_null(), "{key}");
    }
    assert_eq!(j["grid"]["nu"], 20);
}

#[test]
fn report_fields_in_schema_order() {
    let out = run(&["verify", "--chart", "plane_r31", "--grid", "4x4"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let keys = ["\"command\"", "\"config_echo\"", "\"grid\"", "\"results\"", "\"residual_summary\"", "\"status\""];
    let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{pos:?}");
}

#[test]
fn detect_cylinder() {
    let out = run(&["detect", "--chart", "cylinder_r31", "--rect", "0,1,0,1", "--grid", "21x21"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["results"];
    assert_eq!(r["isothermic"]["sign"], "+");
    assert_eq!(r["willmore"]["is_willmore"], false);
    assert!((num(&r["energy"]) - 0.125).abs() < 1e-10);
    assert!((num(&r["willmore"]["sup"]) - 0.03125).abs() < 1e-9);
}

#[test]
fn detect_bumps_even_grids_to_odd() {
    let out = run(&["detect", "--chart", "cylinder_r31", "--rect", "0,1,0,1", "--grid", "10x10"]);
    let j = json(&out);
    assert_eq!(j["grid"]["nu"], 11);
    assert!((num(&j["results"]["energy"]) - 0.125).abs() < 1e-10);
}

#[test]
fn thomsen_rejects_non_isothermic_chart() {
    let c = config("breather_lightcone.toml");
    let out = run(&["thomsen", "--config", &c]);
    assert_eq!(out.status.code(), Some(2));
    let j = json(&out);
    let status = j["status"].as_str().unwrap();
    assert!(status.starts_with("precondition failed: isothermic"), "{status}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("precondition failed: isothermic"));
}

#[test]
fn thomsen_branches() {
    let out = run(&["thomsen", "--chart", "clifford_s31"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["results"];
    assert_eq!(r["causal"], "timelike");
    assert_eq!(r["branch"], "S31");
    assert!(num(&r["h_residual"]) <= 1e-7);

    let c = config("helicoidal_lightcone.toml");
    let out = run(&["thomsen", "--config", &c]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["results"];
    assert_eq!(r["branch"], "H31");
    assert!(r["warnings"][0].as_str().unwrap().contains("(-)-isothermic"));

    let out = run(&["thomsen", "--chart", "plane_r31"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["status"], "contained in some S²₁");

    let out = run(&["thomsen", "--chart", "cylinder_r31"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(json(&out)["status"].as_str().unwrap().starts_with("precondition failed: willmore"));
}

#[test]
fn thomsen_csv_dump() {
    let out = run(&["thomsen", "--chart", "clifford_s31", "--grid", "6x5", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "u,v,x0,x1,x2,x3,H");
    assert_eq!(lines.len(), 31);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 7));
}

#[test]
fn repeated_runs_are_byte_identical() {
    for args in [
        vec!["verify", "--chart", "nullsum_minimal_r31"],
        vec!["detect", "--chart", "cylinder_r31", "--rect", "0,1,0,1"],
    ] {
        let a = run(&args);
        let b = run(&args);
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = run(&["verify", "--chart", "plane_r31", "--grid", "5x5", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let again = run(&["verify", "--chart", "plane_r31", "--grid", "5x5"]);
    assert_eq!(std::fs::read(&path).unwrap(), again.stdout);
}

#[test]
fn pair_commands() {
    let out = run(&["pair-classify", "--config", &config("clifford_zero_fields.toml")]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["results"];
    assert_eq!(r["label"], "DualSWillmore");
    assert!(num(&r["witness"]["kappa_hat_ratio_error"]) <= 1e-8);

    let out = run(&["pair-dual", "--chart", "clifford_s31"]);
    assert_eq!(json(&out)["results"]["label"], "DualSWillmore");

    let out = run(&["pair-trivial", "--config", &config("cylinder_trivial.toml")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["results"]["label"], "Trivial");

    // flags override the [pair] table
    let out = run(&["pair-trivial", "--config", &config("cylinder_trivial.toml"), "--P", "-1,0,0,0,-1"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["results"]["P"][0].as_f64(), Some(-1.0));
}

#[test]
fn pair_darboux_on_cylinder_and_breather() {
    let c = config("cylinder_darboux.toml");
    let out = run(&["pair-darboux", "--config", &c, "--rect", "0,1,0,1", "--grid", "30x30"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["results"];
    assert_eq!(r["label"], "IsothermicDarboux");
    assert!(num(&r["compatibility"]) <= 1e-6);
    assert_eq!(r["sign"], 1);

    // pair-classify dispatches on the [pair] mode
    let out = run(&["pair-classify", "--config", &c, "--rect", "0,1,0,1", "--grid", "10x10"]);
    assert_eq!(json(&out)["command"], "pair-darboux");

    let out = run(&["pair-darboux", "--config", &config("breather_lightcone.toml"), "--theta", "1", "--sign", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let j = json(&out);
    assert_eq!(j["status"], "fail");
    assert!(num(&j["results"]["compatibility"]) > 1e-3);
}

#[test]
fn arbitrary_fields_are_not_an_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fields.toml");
    let text = std::fs::read_to_string(config("cylinder_trivial.toml")).unwrap();
    let chart: String = text.lines().take_while(|l| !l.starts_with('[')).map(|l| format!("{l}\n")).collect();
    std::fs::write(&path, format!("{chart}[fields]\na = \"u\"\nb = \"v^2\"\nxi = [\"0.3\"]\n")).unwrap();
    let out = run(&["pair-classify", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let j = json(&out);
    assert_eq!(j["results"]["label"], "NotEnvelope");
    assert_eq!(j["status"], "negative");
}

#[test]
fn codimension_two_verify_flags_the_printed_ricci_sign() {
    let out = run(&["verify", "--config", &config("twisted_lightcone.toml")]);
    assert_eq!(out.status.code(), Some(2));
    let r = &json(&out)["results"];
    assert!(num(&r["integrability"]["ricci"]) > 1e-3);
    assert!(num(&r["integrability"]["ricci_reversed"]) < 1e-7);
    assert_eq!(r["within_tolerance"]["structure"], true);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "source = \"R31\"\ncomponents = [\"cos(u\", \"v\", \"u\"]\ndomain = [0, 1, 0, 1]\n").unwrap();
    let out = run(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");

    for args in [
        vec!["verify", "--chart", "cylinder_r31", "--tol", "nonsense=1"],
        vec!["verify", "--chart", "cylinder_r31", "--grid", "3x3"],
        vec!["verify", "--chart", "cylinder_r31", "--order", "4"],
        vec!["verify", "--chart", "no_such_chart"],
        vec!["verify"],
        vec!["frobnicate"],
        vec!["pair-darboux", "--chart", "cylinder_r31"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn tolerance_override_changes_the_verdict() {
    let out = run(&["verify", "--chart", "cylinder_r31", "--grid", "5x5", "--tol", "structure=1e-30"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["results"]["within_tolerance"]["structure"], false);
}

#[test]
fn catalog_entries_round_trip_through_config() {
    let out = run(&["catalog"]);
    let names = String::from_utf8(out.stdout).unwrap();
    assert_eq!(names.lines().count(), 4);
    let dir = tempfile::tempdir().unwrap();
    for name in names.lines() {
        let out = run(&["catalog", name]);
        assert_eq!(out.status.code(), Some(0));
        let path = dir.path().join(format!("{name}.toml"));
        std::fs::write(&path, &out.stdout).unwrap();
        let from_file = run(&["invariants", "--config", path.to_str().unwrap(), "--grid", "4x4"]);
        let from_name = run(&["invariants", "--chart", name, "--grid", "4x4"]);
        assert_eq!(from_file.stdout, from_name.stdout, "{name}");
    }
}
