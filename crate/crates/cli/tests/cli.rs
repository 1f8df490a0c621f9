//! End-to-end tests of the rectikernel binary: command behavior, exit
//! codes, format stability and determinism, plus structural validation of
//! the JSON outputs against the shipped schemas.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rectikernel"))
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rectikernel-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn triangle_csv(dir: &Path) -> PathBuf {
    let path = dir.join("triangle.csv");
    write(&path, "x,y,w\n0,0,1\n1,0,1\n0,1,1\n");
    path
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process exited")
}

#[test]
fn gen_writes_csv_and_is_deterministic() {
    let dir = tmpdir("gen");
    let spec = dir.join("segment.json");
    write(
        &spec,
        r#"{"variant":"segment","params":{"a":{"x":0.0,"y":0.0},"b":{"x":1.0,"y":0.0}},
            "n_points":100,"seed":5}"#,
    );
    let out_a = dir.join("a.csv");
    let out_b = dir.join("b.csv");
    for out in [&out_a, &out_b] {
        let r = bin().args(["gen"]).arg(&spec).arg("-o").arg(out).output().unwrap();
        assert_eq!(exit_code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    }
    let text = std::fs::read_to_string(&out_a).unwrap();
    assert_eq!(text.lines().count(), 101, "header plus one line per point");
    assert!(text.starts_with("x,y,w\n"));
    assert_eq!(
        std::fs::read(&out_a).unwrap(),
        std::fs::read(&out_b).unwrap(),
        "same spec and seed must produce identical bytes"
    );
    assert!(out_a.with_extension("manifest.json").exists());
}

#[test]
fn gen_cantor_depth_three_has_64_points() {
    let dir = tmpdir("gen-cantor");
    let spec = dir.join("cantor.json");
    write(
        &spec,
        r#"{"variant":"cantor_four_corner","params":{"depth":3},"n_points":64,"seed":0}"#,
    );
    let out = dir.join("cantor.csv");
    let r = bin().args(["gen"]).arg(&spec).arg("-o").arg(&out).output().unwrap();
    assert_eq!(exit_code(&r), 0);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 65);
}

#[test]
fn gen_rejects_invalid_spec_with_exit_2() {
    let dir = tmpdir("gen-bad");
    let spec = dir.join("bad.json");
    write(
        &spec,
        r#"{"variant":"cantor_four_corner","params":{"depth":99},"n_points":10,"seed":0}"#,
    );
    let r = bin()
        .args(["gen"])
        .arg(&spec)
        .arg("-o")
        .arg(dir.join("never.csv"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&r), 2);
}

#[test]
fn stats_triangle_reference_value() {
    let dir = tmpdir("stats");
    let csv = triangle_csv(&dir);
    let r = bin()
        .args(["stats"])
        .arg(&csv)
        .args(["--kernel", "1"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let doc: Value = serde_json::from_slice(&r.stdout).unwrap();
    let p = doc["results"]["p"]["value"].as_f64().unwrap();
    assert!((p - 0.5).abs() < 1e-12, "p = {p}");
    let c2 = doc["results"]["c2"]["value"].as_f64().unwrap();
    assert!((c2 - 2.0).abs() < 1e-12, "c2 = {c2}");
    validate_against_schema(&doc, &schema("stats-result.schema.json"));
}

#[test]
fn stats_collinear_cloud_is_zero() {
    let dir = tmpdir("stats-col");
    let csv = dir.join("line.csv");
    let mut text = String::from("x,y,w\n");
    for i in 0..40 {
        text.push_str(&format!("{},{},1\n", i as f64 * 0.1, i as f64 * 0.05));
    }
    write(&csv, &text);
    let r = bin().args(["stats"]).arg(&csv).output().unwrap();
    assert_eq!(exit_code(&r), 0);
    let doc: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert!(doc["results"]["p"]["value"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn stats_mc_is_deterministic_given_seed() {
    let dir = tmpdir("stats-mc");
    let csv = triangle_csv(&dir);
    let run = || {
        let r = bin()
            .args(["stats"])
            .arg(&csv)
            .args(["--mc", "10000", "--seed", "7"])
            .output()
            .unwrap();
        assert_eq!(exit_code(&r), 0);
        let doc: Value = serde_json::from_slice(&r.stdout).unwrap();
        serde_json::to_string(&doc["results"]).unwrap()
    };
    assert_eq!(run(), run(), "identical seeds must produce identical results");
}

#[test]
fn stats_exact_cap_gives_exit_4() {
    let dir = tmpdir("stats-cap");
    let csv = dir.join("big.csv");
    let mut text = String::from("x,y,w\n");
    for i in 0..6000 {
        text.push_str(&format!("{},0.5,1\n", i));
    }
    write(&csv, &text);
    let r = bin().args(["stats"]).arg(&csv).output().unwrap();
    assert_eq!(exit_code(&r), 4);
}

#[test]
fn stats_unreadable_input_gives_exit_3() {
    let r = bin()
        .args(["stats", "/nonexistent/cloud.csv"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&r), 3);
}

#[test]
fn stats_mv_residual_block() {
    let dir = tmpdir("stats-mv");
    let csv = triangle_csv(&dir);
    let r = bin()
        .args(["stats"])
        .arg(&csv)
        .args(["--mv-eps", "0.1"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&r), 0);
    let doc: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert!(doc["results"]["mv"]["residual"].is_number());
}

#[test]
fn corona_segment_reads_graph_like() {
    let dir = tmpdir("corona");
    let spec = dir.join("segment.json");
    write(
        &spec,
        r#"{"variant":"segment","params":{"a":{"x":0.0,"y":0.0},"b":{"x":1.0,"y":0.0}},
            "n_points":512,"seed":1}"#,
    );
    let csv = dir.join("segment.csv");
    let r = bin().args(["gen"]).arg(&spec).arg("-o").arg(&csv).output().unwrap();
    assert_eq!(exit_code(&r), 0);

    let out = dir.join("corona.json");
    let plot = dir.join("plot.csv");
    let r = bin()
        .args(["corona"])
        .arg(&csv)
        .arg("-o")
        .arg(&out)
        .arg("--csv")
        .arg(&plot)
        .output()
        .unwrap();
    assert_eq!(exit_code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["results"]["report"]["verdict"], "graph-like");
    validate_against_schema(&doc, &schema("corona-result.schema.json"));
    let plot_text = std::fs::read_to_string(&plot).unwrap();
    assert!(plot_text.starts_with("generation,mean_beta1,packing_ratio\n"));
    assert!(plot_text.lines().count() > 3);
}

#[test]
fn corona_paper_faithful_warns_and_runs() {
    let dir = tmpdir("corona-pf");
    let csv = dir.join("seg.csv");
    let mut text = String::from("x,y,w\n");
    for i in 0..128 {
        text.push_str(&format!("{},0,0.0078125\n", (i as f64 + 0.5) / 128.0));
    }
    write(&csv, &text);
    let r = bin()
        .args(["corona"])
        .arg(&csv)
        .args(["--profile", "paper-faithful"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let stderr = String::from_utf8_lossy(&r.stderr);
    assert!(stderr.contains("warning"), "expected a profile warning");
    let doc: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert!(!doc["results"]["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn verify_unknown_suite_gives_exit_2() {
    let r = bin().args(["verify", "no-such-suite"]).output().unwrap();
    assert_eq!(exit_code(&r), 2);
}

#[test]
fn verify_melnikov_emits_json_lines_and_passes() {
    let r = bin().args(["verify", "melnikov"]).output().unwrap();
    assert_eq!(exit_code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let stdout = String::from_utf8_lossy(&r.stdout);
    for line in stdout.lines() {
        let v: Value = serde_json::from_str(line).expect("JSON line");
        assert_eq!(v["pass"], true);
        assert_eq!(v["suite"], "melnikov");
    }
    assert!(stdout.lines().count() >= 2);
}

#[test]
fn generator_spec_schema_matches_shipped_example() {
    let spec: Value = serde_json::from_str(
        r#"{"variant":"lipschitz_graph",
            "params":{"u0":0.0,"u1":1.0,"slope":0.4,"frequency":2.0,"amplitude":0.01},
            "n_points":128,"seed":3,"total_mass":1.0}"#,
    )
    .unwrap();
    validate_against_schema(&spec, &schema("generator-spec.schema.json"));
}

// --- minimal JSON-schema subset checker (type/required/properties/items/$ref) ---

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn validate_against_schema(value: &Value, schema_doc: &Value) {
    let mut errors = Vec::new();
    check_node(value, schema_doc, schema_doc, "$", &mut errors);
    assert!(errors.is_empty(), "schema violations: {errors:?}");
}

fn resolve<'a>(node: &'a Value, root: &'a Value) -> &'a Value {
    if let Some(reference) = node.get("$ref").and_then(Value::as_str) {
        let path = reference.trim_start_matches("#/");
        let mut cur = root;
        for part in path.split('/') {
            cur = &cur[part];
        }
        return cur;
    }
    node
}

fn check_node(value: &Value, node: &Value, root: &Value, at: &str, errors: &mut Vec<String>) {
    let node = resolve(node, root);
    if let Some(ty) = node.get("type").and_then(Value::as_str) {
        let ok = match ty {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "number" => value.is_number(),
            "integer" => value.is_i64() || value.is_u64(),
            "boolean" => value.is_boolean(),
            _ => true,
        };
        if !ok {
            errors.push(format!("{at}: expected {ty}, found {value}"));
            return;
        }
    }
    if let Some(required) = node.get("required").and_then(Value::as_array) {
        for key in required {
            let key = key.as_str().unwrap();
            if value.get(key).is_none() {
                errors.push(format!("{at}: missing required key '{key}'"));
            }
        }
    }
    if let (Some(props), Some(obj)) = (
        node.get("properties").and_then(Value::as_object),
        value.as_object(),
    ) {
        for (key, sub) in props {
            if let Some(v) = obj.get(key) {
                check_node(v, sub, root, &format!("{at}.{key}"), errors);
            }
        }
    }
    if let (Some(items), Some(arr)) = (node.get("items"), value.as_array()) {
        for (i, v) in arr.iter().enumerate() {
            check_node(v, items, root, &format!("{at}[{i}]"), errors);
        }
    }
}
