use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value as Json;
use tablesynth::domains::load_benchmark;
use tablesynth::table::Table;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn bench(rel: &str) -> PathBuf {
    root().join("benchmarks").join(rel)
}

fn cli(args: &[&str]) -> Output {
    cli_env(args, &[])
}

fn cli_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tablesynth"));
    c.args(args);
    for k in [
        "BEE_TIMEOUT",
        "BEE_MAX_DEPTH",
        "BEE_HYPOTHESIS_BOUND",
        "BEE_MODE",
        "BEE_SEED",
    ] {
        c.env_remove(k);
    }
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_running_example() {
    let b = bench("image/running-example.json");
    let o = cli(&["synth", s(&b)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.matches("Yield(").count(), 2, "{text}");
    assert_eq!(text.matches("Filter(").count(), 2, "{text}");
    let stats: Json = serde_json::from_str(stderr(&o).lines().next().unwrap()).unwrap();
    assert_eq!(stats["mode"], "bi");
}

/// Synthesizing and then executing on the case's own inputs gives back the
/// output example, byte for byte.
#[test]
fn synth_then_exec_reproduces_every_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let mut files: Vec<PathBuf> = Vec::new();
    for d in ["file", "image", "spreadsheet", "xml"] {
        for e in std::fs::read_dir(bench(d)).unwrap() {
            files.push(e.unwrap().path());
        }
    }
    files.sort();
    for f in files {
        let o = cli(&["synth", s(&f)]);
        assert_eq!(code(&o), 0, "{}: {}", f.display(), stderr(&o));
        let prog = dir.path().join("p.txt");
        std::fs::write(&prog, stdout(&o)).unwrap();
        let e = cli(&["exec", s(&prog), s(&f)]);
        assert_eq!(code(&e), 0, "{}: {}", f.display(), stderr(&e));
        let case = load_benchmark(&f).unwrap();
        let want = serde_json::to_string_pretty(&case.output).unwrap() + "\n";
        assert_eq!(stdout(&e), want, "{}", f.display());
    }
}

#[test]
fn exec_on_pending_frames() {
    let dir = tempfile::tempdir().unwrap();
    let case = load_benchmark(bench("image/running-example.json")).unwrap();
    let prog = dir.path().join("a.prog");
    std::fs::write(&prog, case.reference.unwrap().to_string()).unwrap();
    let o = cli(&[
        "exec",
        s(&prog),
        s(&bench("image/running-example.json")),
        "--pending",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t: Table = serde_json::from_str(&stdout(&o)).unwrap();
    let last: Vec<(i64, i64)> = t
        .rows()
        .iter()
        .map(|r| (r[3].as_int().unwrap(), r[4].as_int().unwrap()))
        .collect();
    assert_eq!(last, vec![(-50, -50), (50, 50), (-60, -60), (60, 60)]);
}

#[test]
fn exec_with_table_list_and_inferred_signature() {
    let dir = tempfile::tempdir().unwrap();
    let case = load_benchmark(bench("image/running-example.json")).unwrap();
    let tables = dir.path().join("t.json");
    std::fs::write(&tables, serde_json::to_string(&case.inputs).unwrap()).unwrap();
    let prog = dir.path().join("a.prog");
    std::fs::write(&prog, "Yield(\"shift\", ti, id, frame);\n").unwrap();
    let o = cli(&["exec", s(&prog), s(&tables)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t: Json = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(t["columns"][1]["name"], "arg1");
    assert_eq!(t["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn exec_invalid_program_names_the_rule() {
    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("bad.prog");
    std::fs::write(
        &prog,
        "u = Filter(nowhere, isOdd(frame));\nYield(\"shift\", u, id, \"GB\", frame, frame);\n",
    )
    .unwrap();
    let o = cli(&["exec", s(&prog), s(&bench("image/running-example.json"))]);
    assert_eq!(code(&o), 1);
    assert!(
        stderr(&o).contains("rule: defined before use"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn validate_prints_canonical_text() {
    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("p.prog");
    std::fs::write(
        &prog,
        "u=Filter(ti,isOdd( frame ));Yield(\"shift\",u,id,\"GB\",frame,frame);",
    )
    .unwrap();
    let o = cli(&[
        "validate",
        s(&prog),
        s(&bench("image/running-example.json")),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "u = Filter(ti, isOdd(frame));\n\nYield(\"shift\", u, id, \"GB\", frame, frame);\n"
    );
    let o = cli(&[
        "validate",
        s(&prog),
        s(&bench("image/running-example.json")),
        "--domain",
        "xml",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn forced_timeout_exits_2() {
    let o = cli(&["synth", s(&bench("file/tar-logs.json")), "--timeout", "1ms"]);
    assert_eq!(code(&o), 2);
    let o = cli_env(
        &["synth", s(&bench("file/tar-logs.json"))],
        &[("BEE_TIMEOUT", "1ms")],
    );
    assert_eq!(code(&o), 2);
}

/// Under the same short budget the baseline gives up on twenty frames
/// while the bidirectional search finishes.
#[test]
fn forward_only_falls_behind_on_twenty_frames() {
    let b = bench("image/linear-split-20.json");
    let o = cli(&["synth", s(&b), "--mode", "forward-only", "--timeout", "2s"]);
    assert_eq!(code(&o), 2, "{}", stdout(&o));
    let o = cli(&["synth", s(&b), "--mode", "bi", "--timeout", "2s"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

fn write_case(dir: &Path, name: &str, regression: bool) -> PathBuf {
    // names that no feature links to their source row
    let json = serde_json::json!({
        "id": name,
        "domain": "misc",
        "inputs": [{"name": "t", "columns": [{"name": "id", "type": "Id"}, {"name": "n", "type": "Int"}],
                    "rows": [[{"id": "a"}, 1], [{"id": "b"}, 2], [{"id": "c"}, 3]]}],
        "output": {"name": "out", "columns": [{"name": "action", "type": "String"}, {"name": "id", "type": "Id"},
                   {"name": "tag", "type": "String"}],
                   "rows": [["tag", {"id": "a"}, "qq"], ["tag", {"id": "b"}, "zx"], ["tag", {"id": "c"}, "mm"]]},
        "expected": {"name": "out", "columns": [{"name": "action", "type": "String"}, {"name": "id", "type": "Id"},
                     {"name": "tag", "type": "String"}], "rows": []},
        "regression": regression
    });
    let p = dir.join(format!("{name}.json"));
    std::fs::write(&p, serde_json::to_string_pretty(&json).unwrap()).unwrap();
    p
}

#[test]
fn exhausted_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_case(dir.path(), "arbitrary", false);
    let o = cli(&["synth", s(&p), "--max-depth", "1"]);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&cli(&["frobnicate"])), 1);
    assert_eq!(code(&cli(&["synth", "/no/such/file.json"])), 1);
    assert_eq!(
        code(&cli(&[
            "synth",
            s(&bench("image/running-example.json")),
            "--mode",
            "both"
        ])),
        1
    );
    assert_eq!(
        code(&cli(&[
            "synth",
            s(&bench("image/running-example.json")),
            "--timeout",
            "soon"
        ])),
        1
    );
    assert_eq!(code(&cli(&["--help"])), 0);
}

#[test]
fn empty_bench_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["bench", s(dir.path()), "--mode", "bi", "--output", "json"]);
    assert_eq!(code(&o), 0);
    let r: Json = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["reports"][0]["aggregate"]["total"], 0);
    assert!(r["reports"][0]["cases"].as_array().unwrap().is_empty());
}

#[test]
fn failed_regression_case_fails_the_run() {
    let dir = tempfile::tempdir().unwrap();
    write_case(dir.path(), "arbitrary", true);
    let o = cli(&[
        "bench",
        s(dir.path()),
        "--mode",
        "bi",
        "--max-depth",
        "1",
        "--output",
        "json",
    ]);
    assert_eq!(code(&o), 1);
    let r: Json = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["reports"][0]["aggregate"]["regressions"], 1);
}

#[test]
fn both_modes_report_separately() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["running-example.json", "linear-split-10.json"] {
        std::fs::copy(bench("image").join(f), dir.path().join(f)).unwrap();
    }
    let o = cli(&[
        "bench",
        s(dir.path()),
        "--mode",
        "both",
        "--output",
        "json",
        "--jobs",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: Json = serde_json::from_str(&stdout(&o)).unwrap();
    let reports = r["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["mode"], "bi");
    assert_eq!(reports[1]["mode"], "forward-only");
    let solved = |i: usize| -> Vec<String> {
        reports[i]["cases"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|c| c["outcome"] == "solved")
            .map(|c| c["id"].as_str().unwrap().to_string())
            .collect()
    };
    assert!(solved(1).iter().all(|id| solved(0).contains(id)));
    assert_eq!(solved(0).len(), 2);
}

/// Every shipped case is solved without over-fitting, and the report
/// conforms to the committed schema.
#[test]
fn bench_over_shipped_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = cli(&[
        "bench",
        s(&root().join("benchmarks")),
        "--mode",
        "bi",
        "--output",
        "both",
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("solved 15/15"), "{out}");
    let r: Json = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let schema: Json = serde_json::from_str(
        &std::fs::read_to_string(root().join("crates/cli/report.schema.json")).unwrap(),
    )
    .unwrap();
    let mut errs = Vec::new();
    conform(&r, &schema, "$", &mut errs);
    assert!(errs.is_empty(), "{errs:#?}");
    for c in r["reports"][0]["cases"].as_array().unwrap() {
        assert_eq!(c["outcome"], "solved", "{c}");
        assert_eq!(c["overfit"], false, "{c}");
        assert_eq!(c["reference_ok"], true, "{c}");
    }

    // the checker itself rejects a mutated report
    let mut bad = r.clone();
    bad["reports"][0]["aggregate"]["extra"] = Json::from(1);
    bad["reports"][0]["cases"][0]["outcome"] = Json::from("maybe");
    let mut errs = Vec::new();
    conform(&bad, &schema, "$", &mut errs);
    assert_eq!(errs.len(), 2, "{errs:#?}");
}

/// The subset of JSON Schema used by the report schema: type, enum,
/// required, properties, additionalProperties (false), items, minimum and
/// maximum.
fn conform(v: &Json, schema: &Json, at: &str, errs: &mut Vec<String>) {
    if let Some(t) = schema.get("type") {
        let types: Vec<&str> = match t {
            Json::String(s) => vec![s.as_str()],
            Json::Array(a) => a.iter().filter_map(|x| x.as_str()).collect(),
            _ => vec![],
        };
        let ok = types.iter().any(|t| match *t {
            "object" => v.is_object(),
            "array" => v.is_array(),
            "string" => v.is_string(),
            "integer" => v.is_i64() || v.is_u64(),
            "number" => v.is_number(),
            "boolean" => v.is_boolean(),
            "null" => v.is_null(),
            _ => false,
        });
        if !ok {
            errs.push(format!("{at}: expected {types:?}, found {v}"));
            return;
        }
    }
    if let Some(Json::Array(options)) = schema.get("enum") {
        if !options.contains(v) {
            errs.push(format!("{at}: {v} not in {options:?}"));
        }
    }
    if let Some(n) = v.as_f64() {
        if schema
            .get("minimum")
            .and_then(Json::as_f64)
            .is_some_and(|m| n < m)
        {
            errs.push(format!("{at}: {n} below minimum"));
        }
        if schema
            .get("maximum")
            .and_then(Json::as_f64)
            .is_some_and(|m| n > m)
        {
            errs.push(format!("{at}: {n} above maximum"));
        }
    }
    if let Json::Object(obj) = v {
        if let Some(Json::Array(req)) = schema.get("required") {
            for k in req.iter().filter_map(|k| k.as_str()) {
                if !obj.contains_key(k) {
                    errs.push(format!("{at}: missing `{k}`"));
                }
            }
        }
        let props = schema.get("properties").and_then(Json::as_object);
        for (k, x) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(sub) => conform(x, sub, &format!("{at}.{k}"), errs),
                None if schema.get("additionalProperties") == Some(&Json::Bool(false)) => {
                    errs.push(format!("{at}: unexpected `{k}`"))
                }
                None => {}
            }
        }
    }
    if let (Json::Array(items), Some(sub)) = (v, schema.get("items")) {
        for (i, x) in items.iter().enumerate() {
            conform(x, sub, &format!("{at}[{i}]"), errs);
        }
    }
}
