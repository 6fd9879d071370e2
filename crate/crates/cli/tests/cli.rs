use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use pontryagin::corpus::{dead_mode_example, mixed_example};
use pontryagin::io::{load_system, save_system};
use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str], stdin: &str) -> Run {
    let mut child = Command::new(env!("CARGO_BIN_EXE_pontryagin"))
        .args(args)
        .env_remove("PONTRYAGIN_TOL")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    Run {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn example(name: &str, a: &str) -> String {
    let r = run(&["example", "--name", name, "--a", a], "");
    assert_eq!(r.code, 0, "{}", r.stderr);
    r.stdout
}

fn tmp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pontryagin-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schema").join(name);
    let value: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&value).expect("schema compiles")
}

fn assert_valid(validator: &jsonschema::Validator, text: &str) {
    let value: Value = serde_json::from_str(text).unwrap_or_else(|e| panic!("{e}: {text}"));
    let errors: Vec<String> = validator.iter_errors(&value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}\n{text}");
}

#[test]
fn piped_reciprocal_example_classifies_as_conservative() {
    let sys = example("recip-blaschke", "0.5");
    let r = run(&["classify", "--format", "text"], &sys);
    assert_eq!(r.code, 0);
    assert_eq!(r.stdout.lines().next(), Some("conservative"));
    let r = run(&["classify", "-"], &sys);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["result"]["class"], "conservative");
    assert_eq!(v["result"]["state_signature"], serde_json::json!([0, 1]));
}

#[test]
fn reciprocal_example_has_one_negative_square() {
    let r = run(&["negsq", "--seed", "3"], &example("recip-blaschke", "0.5"));
    assert_eq!(r.code, 0);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["result"]["kappa_hat"], 1);
    assert_eq!(v["result"]["trace"].as_array().unwrap().len(), 10);
    assert_eq!(v["result"]["stabilized"], true);
}

#[test]
fn seeded_commands_are_deterministic() {
    let path = tmp_file("mixed.json", &save_system(&mixed_example(), None));
    let p = path.to_str().unwrap();
    for args in [
        vec!["negsq", p, "--seed", "11"],
        vec!["kulma", p, "--seed", "5"],
        vec!["compare", p, "--other", p, "--seed", "2"],
    ] {
        let a = run(&args, "");
        let b = run(&args, "");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.code, b.code);
    }
}

#[test]
fn generated_files_survive_a_load_save_cycle() {
    let spec = r#"{"seed": 4, "state": [2, 1], "channel": [1, 0], "count": 3, "target": "passive"}"#;
    let spec_path = tmp_file("spec.json", spec);
    let r = run(&["gen", "--spec", spec_path.to_str().unwrap(), "--index", "2"], "");
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (sys, meta) = load_system(&r.stdout).unwrap();
    assert_eq!(save_system(&sys, meta), r.stdout);
    let all = run(&["gen", "--spec", spec_path.to_str().unwrap()], "");
    let v: Value = serde_json::from_str(&all.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
    // The CLI pipes its own output back in unchanged.
    let dual = run(&["dual"], &r.stdout);
    let back = run(&["dual"], &dual.stdout);
    let (twice, _) = load_system(&back.stdout).unwrap();
    assert_eq!(twice, sys);
}

#[test]
fn exit_codes_follow_the_taxonomy() {
    let recip = example("recip-blaschke", "0.5");
    let blaschke_path = tmp_file("b.json", &example("blaschke", "0.5"));

    // 1: a check ran and came out negative.
    let r = run(&["similar", "--other", blaschke_path.to_str().unwrap()], &recip);
    assert_eq!(r.code, 1, "{}", r.stdout);
    let r = run(&["admissible"], &save_system(&dead_mode_example(), None));
    assert_eq!(r.code, 1, "{}", r.stdout);

    // 2: malformed input, bad parameters and usage errors.
    assert_eq!(run(&["classify"], "{ not json").code, 2);
    assert_eq!(run(&["example", "--name", "blaschke", "--a", "2"], "").code, 2);
    assert_eq!(run(&["restrict", "--which", "nowhere"], &recip).code, 2);
    assert_eq!(run(&["transfer", "--z", "abc"], &recip).code, 2);

    // 3: the resolvent of A = 2 is singular at z = 1/2.
    let r = run(&["transfer", "--z", "0.5"], &recip);
    assert_eq!(r.code, 3, "{}", r.stdout);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["error"]["code"], "resolvent_singular");
    assert!(r.stderr.contains("resolvent_singular"));

    assert_eq!(run(&["transfer", "--z", "0.1,-0.2"], &recip).code, 0);
}

#[test]
fn tolerance_comes_from_the_environment() {
    let recip = example("recip-blaschke", "0.5");
    let mut child = Command::new(env!("CARGO_BIN_EXE_pontryagin"))
        .args(["classify"])
        .env("PONTRYAGIN_TOL", "-1")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(recip.as_bytes()).unwrap();
    assert_eq!(child.wait_with_output().unwrap().status.code(), Some(2));
}

#[test]
fn out_flag_writes_to_a_file() {
    let path = std::env::temp_dir().join(format!("pontryagin-out-{}.json", std::process::id()));
    let r = run(&["example", "--name", "blaschke", "--a", "0.3", "--out", path.to_str().unwrap()], "");
    assert_eq!(r.code, 0);
    assert!(r.stdout.is_empty());
    assert!(load_system(&std::fs::read_to_string(&path).unwrap()).is_ok());
}

#[test]
fn outputs_validate_against_the_shipped_schemas() {
    let systems = schema("system.schema.json");
    let reports = schema("report.schema.json");
    let mixed = save_system(&mixed_example(), None);
    let mixed_path = tmp_file("mixed-schema.json", &mixed);
    let recip = example("recip-blaschke", "0.5");
    assert_valid(&systems, &recip);
    assert_valid(&systems, &mixed);
    for args in [
        vec!["dual"],
        vec!["restrict", "--which", "min1"],
        vec!["julia-embed"],
        vec!["dilate", "--kind", "isometric", "--depth", "3"],
    ] {
        let r = run(&args, &mixed);
        assert_eq!(r.code, 0, "{args:?}: {}", r.stderr);
        assert_valid(&systems, &r.stdout);
    }
    for args in [
        vec!["classify"],
        vec!["transfer", "--z", "0.1,0.1"],
        vec!["markov", "--n", "4"],
        vec!["negsq"],
        vec!["admissible"],
        vec!["compare", "--other", mixed_path.to_str().unwrap()],
        vec!["similar", "--other", mixed_path.to_str().unwrap()],
        vec!["defect", "--side", "left"],
        vec!["defect", "--side", "right"],
        vec!["sepontulos"],
        vec!["kulma"],
        vec!["boundary-check", "--grid", "32"],
        vec!["transfer", "--z", "1,0"],
    ] {
        let r = run(&args, &mixed);
        assert!(r.code <= 3, "{args:?}");
        assert_valid(&reports, &r.stdout);
    }
    let err = run(&["classify"], "[]");
    assert_eq!(err.code, 2);
    assert_valid(&reports, &err.stdout);
}

#[test]
fn defect_and_structure_reports_on_the_mixed_example() {
    let mixed = save_system(&mixed_example(), None);
    let r = run(&["sepontulos"], &mixed);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["result"]["phi_zero"], false);
    assert_eq!(v["result"]["psi_zero"], false);
    let r = run(&["kulma"], &mixed);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["result"]["all_similar"], false);
    assert_eq!(v["result"]["kappa_matches"], false);
    assert_eq!(v["result"]["route"], "exploratory");
}
