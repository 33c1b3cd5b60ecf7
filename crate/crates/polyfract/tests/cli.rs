use std::path::PathBuf;

use polyfract::cli::{run_with, EXIT_COMPUTATION, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, SCHEMA_VERSION};
use polyfract::energy::CSV_HEADER;

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("polyfract").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    Output { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("polyfract-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn lists_builtin_examples() {
    let o = run(&["examples", "list"]);
    assert_eq!(o.code, EXIT_OK);
    let names: Vec<&str> = o.stdout.lines().map(|l| l.split('\t').next().unwrap()).collect();
    for name in ["carpet", "folded-square", "folded-triangle", "hexa-d3", "identity-square"] {
        assert!(names.contains(&name), "{name} missing from {names:?}");
    }
}

#[test]
fn example_round_trips_through_a_file() {
    let path = scratch("carpet.toml");
    let o = run(&["examples", "write", "carpet", path.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let shown = run(&["examples", "show", "carpet"]);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), shown.stdout);
    assert_eq!(run(&["validate", path.to_str().unwrap()]).code, EXIT_OK);
}

#[test]
fn validation_exit_codes() {
    assert_eq!(run(&["validate", "carpet"]).code, EXIT_OK);
    let bad = run(&["validate", "identity-square", "--json"]);
    assert_eq!(bad.code, EXIT_VALIDATION);
    let report: serde_json::Value = serde_json::from_str(&bad.stdout).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(report["axioms"]["a4"]["passed"], false);
    assert_eq!(report["schema_version"], SCHEMA_VERSION);

    let path = scratch("broken.toml");
    std::fs::write(&path, "J = ").unwrap();
    assert_eq!(run(&["validate", path.to_str().unwrap()]).code, EXIT_VALIDATION);
}

#[test]
fn usage_errors() {
    assert_eq!(run(&[]).code, EXIT_USAGE);
    assert_eq!(run(&["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(run(&["energy", "carpet"]).code, EXIT_USAGE);
    assert_eq!(run(&["--workers", "0", "validate", "carpet"]).code, EXIT_USAGE);
    let missing = run(&["validate", "no-such-system.toml", "--json"]);
    assert_eq!(missing.code, EXIT_USAGE);
    let err: serde_json::Value = serde_json::from_str(missing.stderr.trim()).unwrap();
    assert_eq!(err["error"]["kind"], "usage");
    assert_eq!(err["error"]["code"], EXIT_USAGE);
    assert!(missing.stdout.is_empty());
    assert_eq!(run(&["--help"]).code, EXIT_OK);
}

#[test]
fn computation_errors() {
    let o = run(&["energy", "carpet", "--p", "1", "--json"]);
    assert_eq!(o.code, EXIT_COMPUTATION);
    let err: serde_json::Value = serde_json::from_str(o.stderr.trim()).unwrap();
    assert_eq!(err["error"]["code"], EXIT_COMPUTATION);
}

#[test]
fn render_arguments_are_usage_errors() {
    assert_eq!(run(&["render", "carpet", "--level", "0", "--out", "-"]).code, EXIT_USAGE);
    assert_eq!(run(&["render", "carpet", "--level", "9", "--out", "-"]).code, EXIT_USAGE);
    assert_eq!(run(&["render", "carpet", "--level", "1", "--overlay", "components:7", "--out", "-"]).code, EXIT_USAGE);
}

#[test]
fn analyze_reports_the_verdict() {
    let o = run(&["--deterministic", "analyze", "carpet", "--json", "-"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let report: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(report["schema_version"], SCHEMA_VERSION);
    assert_eq!(report["system"]["j"], 4);
    assert_eq!(report["verdict"]["theorem"], "ZJ_transitive");
    assert_eq!(report["essential_boundary"], serde_json::json!([0, 1, 2, 3]));
    assert!(report.get("timing_ms").is_none());
}

#[test]
fn deterministic_output_ignores_worker_count() {
    let args = |w: &'static str| ["--deterministic", "--workers", w, "analyze", "folded-square", "--json", "-", "--fold-samples", "4"];
    let one = run(&args("1"));
    let four = run(&args("4"));
    assert_eq!(one.code, EXIT_OK, "{}", one.stderr);
    assert_eq!(one.stdout, four.stdout);
    let report: serde_json::Value = serde_json::from_str(&one.stdout).unwrap();
    assert_eq!(report["verdict"]["status"], "inconclusive");
    assert!(report.get("folding").is_some());
}

#[test]
fn energy_csv() {
    let o = run(&["energy", "carpet", "--p", "2", "--m-max", "2", "--csv", "-"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let mut lines = o.stdout.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.iter().filter(|r| r.contains(",conductance,")).count(), 2);
    assert_eq!(rows.iter().filter(|r| r.contains(",ratio,")).count(), 1);
}

#[test]
fn dimar_with_a_wide_tolerance_returns_the_input() {
    let o = run(&["dimar", "carpet", "--p-lo", "1.2", "--p-hi", "1.3", "--tol", "0.5", "--json"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let v: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["bracket"]["lo"], 1.2);
    assert_eq!(v["bracket"]["hi"], 1.3);
}

#[test]
fn render_writes_svg() {
    let path = scratch("carpet.svg");
    let o = run(&["render", "carpet", "--level", "2", "--overlay", "essential_edges", "--out", path.to_str().unwrap()]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let svg = std::fs::read_to_string(&path).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polygon")).count(), 64);
    assert_eq!(run(&["render", "carpet", "--level", "1", "--overlay", "bogus", "--out", "-"]).code, EXIT_USAGE);
    let piped = run(&["render", "carpet", "--level", "1", "--out", "-"]);
    assert_eq!(piped.code, EXIT_OK);
    assert_eq!(roxmltree::Document::parse(&piped.stdout).unwrap().descendants().filter(|n| n.has_tag_name("polygon")).count(), 8);
}
