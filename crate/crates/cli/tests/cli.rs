use std::path::PathBuf;
use std::process::{Command, Output};

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn ailca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ailca")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn compare_bundled_pair() {
    let o = ailca(&[
        "compare",
        &scenario("smart-building-m1.json"),
        &scenario("smart-building-m2.json"),
        "--strict",
        "--tolerance",
        "GWP=1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("-80"));
    assert!(text.contains("Beneficial") && text.contains("Detrimental"));
}

#[test]
fn json_output_is_byte_identical_across_runs() {
    let args = [
        "compare",
        &scenario("smart-building-m1.json"),
        &scenario("smart-building-m2.json"),
        "--format=json",
    ];
    let (a, b) = (ailca(&args), ailca(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["delta"][0], -80.0);
}

#[test]
fn out_flag_and_report_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("cmp.json");
    let o = ailca(&[
        "compare",
        &scenario("smart-building-m1.json"),
        &scenario("smart-building-m2.json"),
        "--format=json",
        &format!("--out={}", saved.display()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let csv = ailca(&["report", saved.to_str().unwrap(), "--format=csv"]);
    assert_eq!(csv.status.code(), Some(0));
    let text = stdout(&csv);
    assert!(text.starts_with("scenario,process,stage,tier,category,unit,value\n"));
    assert!(text.contains("smart-building-m2,grid,C_Use,unassigned,GWP,kg CO2e,10\n"));
}

#[test]
fn custom_factor_file() {
    let dir = tempfile::tempdir().unwrap();
    let factors = dir.path().join("f.json");
    std::fs::write(
        &factors,
        r#"{"categories": [{"id": "GWP", "name": "climate change", "unit": "kg CO2e"}],
            "factors": {"GWP": {"co2e": 2}}}"#,
    )
    .unwrap();
    let o = ailca(&[
        "assess",
        &scenario("smart-building-m1.json"),
        "--format=csv",
        "--factors",
        factors.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stderr(&o).contains("illustrative"));
    assert_eq!(stdout(&o).lines().nth(1), Some("smart-building-m1,heater,C_Use,unassigned,GWP,kg CO2e,1200"));
}

#[test]
fn schema_errors_and_lenient_mode() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("smart-building-m1.json"))
        .unwrap()
        .replacen("\"id\": \"heater\",", "\"id\": \"heater\", \"colour\": \"red\",", 1);
    let path = dir.path().join("extra.json");
    std::fs::write(&path, text).unwrap();
    let strict = ailca(&["validate", path.to_str().unwrap()]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(stderr(&strict).contains("/processes/0/colour"));
    let lenient = ailca(&["validate", path.to_str().unwrap(), "--lenient-schema"]);
    assert_eq!(lenient.status.code(), Some(0));
    assert!(stderr(&lenient).contains("warning"));
}

#[test]
fn negative_idle_power_is_reported_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("smart-building-m2.json"))
        .unwrap()
        .replacen("\"power_idle\": 5", "\"power_idle\": -5", 1);
    let path = dir.path().join("neg.json");
    std::fs::write(&path, text).unwrap();
    let o = ailca(&["assess", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/devices/0/power_idle"), "{}", stderr(&o));
}

#[test]
fn structural_problems_fail_validation() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("smart-building-m1.json"))
        .unwrap()
        .replacen("\"heat\": 1}", "\"heat\": 1, \"gas\": -2}", 1)
        .replacen(
            "\"flows\": [",
            "\"flows\": [\n    {\"id\": \"gas\", \"kind\": \"economic\", \"unit\": \"m3\"},",
            1,
        );
    let path = dir.path().join("orphan.json");
    std::fs::write(&path, text).unwrap();
    let validate = ailca(&["validate", path.to_str().unwrap()]);
    assert_eq!(validate.status.code(), Some(2));
    assert!(stderr(&validate).contains("gas"));
    let assess = ailca(&["assess", path.to_str().unwrap()]);
    assert_eq!(assess.status.code(), Some(1));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(ailca(&["--help"]).status.code(), Some(0));
    assert_eq!(ailca(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ailca(&["assess", "x.json", "--format=xml"]).status.code(), Some(1));
    assert_eq!(ailca(&["compare", "a", "b", "--tolerance", "GWP"]).status.code(), Some(1));
}
