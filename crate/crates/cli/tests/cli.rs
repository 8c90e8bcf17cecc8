//! Exercises the binary end to end against the bundled mock subcommand:
//! artifact layout, exit codes, and the DOT export.

use std::io::{BufRead, BufReader};
use std::process::{Child, Command, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_qlscan");

struct Mock {
    child: Child,
    url: String,
}

impl Mock {
    /// Starts `qlscan mock` on an ephemeral port and reads the URL it prints.
    fn start(extra: &[&str]) -> Mock {
        let mut child = Command::new(BIN)
            .args(["mock", "--port", "0"])
            .args(extra)
            .stdout(Stdio::piped())
            .spawn()
            .expect("spawn mock");
        let stdout = child.stdout.take().unwrap();
        let mut line = String::new();
        BufReader::new(stdout).read_line(&mut line).expect("mock banner");
        let url = line
            .trim()
            .rsplit(' ')
            .next()
            .expect("url in banner")
            .to_string();
        assert!(url.starts_with("http://"), "unexpected banner: {line}");
        Mock { child, url }
    }
}

impl Drop for Mock {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().expect("run qlscan");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn compile_graph_fuzz_pipeline_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let schema_path = dir.path().join("fixture-schema.json");
    let out_dir = dir.path().join("out");
    let mock = Mock::start(&["--schema-out", schema_path.to_str().unwrap()]);

    // Fuzz before compile: usage error, exit 1.
    let (code, _, stderr) = run(&[
        "fuzz",
        "--url",
        &mock.url,
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 1, "{stderr}");

    let (code, _, stderr) = run(&[
        "compile",
        "--url",
        &mock.url,
        "--schema-file",
        schema_path.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    for artifact in ["schema.json", "endpoints.json", "graph.json", "graph.dot"] {
        assert!(out_dir.join(artifact).exists(), "missing {artifact}");
    }

    let (code, stdout, _) = run(&[
        "graph",
        "--url",
        &mock.url,
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("digraph"));
    assert!(stdout.contains("createWallet"));

    // Secure target: clean exit, empty findings, reports written.
    let (code, stdout, stderr) = run(&[
        "fuzz",
        "--url",
        &mock.url,
        "--output-dir",
        out_dir.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert_eq!(code, 0, "{stdout}{stderr}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["findings"].as_array().unwrap().len(), 0);
    assert!(out_dir.join("requests.jsonl").exists());
    assert!(out_dir.join("report.txt").exists());
}

#[test]
fn findings_exit_code_and_settings_file() {
    let dir = tempfile::tempdir().unwrap();
    let toggles_path = dir.path().join("toggles.json");
    std::fs::write(&toggles_path, r#"{"sqlInjection": true}"#).unwrap();
    let mock = Mock::start(&["--toggles", toggles_path.to_str().unwrap()]);

    let schema_path = dir.path().join("schema.json");
    // The vulnerable instance leaves introspection off too; fetch the schema
    // from a second, info-disclosing instance's schema dump.
    let helper = Mock::start(&["--schema-out", schema_path.to_str().unwrap()]);
    drop(helper);

    let out_dir = dir.path().join("out");
    let settings_path = dir.path().join("settings.toml");
    std::fs::write(
        &settings_path,
        format!(
            "outputDir = {:?}\nfuzzClassesEnabled = [\"SQL_INJECTION\"]\nseed = 11\n",
            out_dir.to_str().unwrap()
        ),
    )
    .unwrap();

    let (code, stdout, stderr) = run(&[
        "run",
        "--settings",
        settings_path.to_str().unwrap(),
        "--url",
        &mock.url,
        "--schema-file",
        schema_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "{stdout}{stderr}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    let classes: Vec<&str> = report["findings"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|f| f["fuzzClass"].as_str())
        .collect();
    assert!(classes.iter().all(|c| *c == "SQL_INJECTION"), "{classes:?}");
    assert!(!classes.is_empty());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let (code, _, stderr) = run(&["run", "--definitely-not-a-flag"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("--definitely-not-a-flag"));
}
