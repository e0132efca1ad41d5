mod common;

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::thread;

fn btforge(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_btforge"))
        .args(args)
        .env_remove("BTFORGE_LIBRARY")
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn data(rel: &str) -> String {
    common::data_dir().join(rel).display().to_string()
}

fn reference(task: &str) -> String {
    fs::read_to_string(common::data_dir().join("reference").join(format!("{task}.xml"))).unwrap()
}

fn task_names() -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(common::data_dir().join("tasks"))
        .unwrap()
        .map(|e| e.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn write_attempts(root: &Path, task: &str, attempts: &[&str]) {
    let dir = root.join(task);
    fs::create_dir_all(&dir).unwrap();
    for (i, text) in attempts.iter().enumerate() {
        fs::write(dir.join(format!("attempt_{}.xml", i + 1)), text).unwrap();
    }
}

#[test]
fn validate_exit_codes() {
    let corpus: Vec<String> = (0..50).map(|i| data(&format!("corpus/tree_{i:02}.xml"))).collect();
    let mut args = vec!["validate"];
    args.extend(corpus.iter().map(String::as_str));
    let (code, out, _) = btforge(&args);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("50 of 50 files valid"));

    let dir = tempfile::tempdir().unwrap();
    let stack = dir.path().join("stack.xml");
    fs::write(&stack, reference("turning_on_radio").replace("TOGGLE_ON", "STACK")).unwrap();
    let (code, out, _) = btforge(&["validate", stack.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(out.contains("STACK"), "{out}");

    let (code, _, err) = btforge(&["validate", "/no/such/tree.xml"]);
    assert_eq!(code, 2);
    assert!(err.contains("no such file"));

    let teapot = data("samples/teapot.xml");
    let (code, out, _) = btforge(&["validate", &teapot, "--allowed", "NAVIGATE_TO,GRASP"]);
    assert_eq!(code, 1);
    assert!(out.contains("not allowed: PLACE_ON_TOP"), "{out}");
}

#[test]
fn exec_reports_goal_and_first_failure() {
    let (code, out, _) = btforge(&[
        "exec",
        "--task",
        &data("samples/teapot.yaml"),
        &data("samples/teapot.xml"),
    ]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("goal satisfied"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("early_grasp.xml");
    // Grasp the tomato, then try to open the fridge with full hands.
    let tree = format!(
        "<root main_tree_to_execute=\"MainTree\"><BehaviorTree ID=\"MainTree\"><Sequence>{}</Sequence></BehaviorTree></root>",
        [
            ("NAVIGATE_TO", "beefsteak_tomato"),
            ("GRASP", "beefsteak_tomato"),
            ("NAVIGATE_TO", "electric_refrigerator"),
            ("OPEN", "electric_refrigerator"),
        ]
        .iter()
        .map(|(id, obj)| format!("<Action ID=\"{id}\" obj=\"{obj}\"/>"))
        .collect::<String>()
    );
    fs::write(&bad, tree).unwrap();
    let task = data("tasks/carrying_in_groceries.yaml");
    let (code, out, _) = btforge(&["exec", "--task", &task, bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(
        out.contains("step 4 OPEN(electric_refrigerator) failed: HANDS_FULL"),
        "{out}"
    );

    let (code, out, _) = btforge(&["--format", "records", "exec", "--task", &task, bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    let record: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(record["trace"]["goal_satisfied"], false);
}

#[test]
fn score_identity_is_perfect() {
    let refs = data("reference");
    let (code, out, _) = btforge(&["score", "--reference", &refs, "--hypothesis", &refs]);
    assert_eq!(code, 0);
    assert!(
        out.contains("pairs 15  StructMatch 100.00%  Jaccard 1.000±0.000  BLEU 1.000"),
        "{out}"
    );

    let empty = tempfile::tempdir().unwrap();
    let (code, _, _) = btforge(&[
        "score",
        "--reference",
        &refs,
        "--hypothesis",
        empty.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

fn swap_first_two_actions(xml: &str) -> String {
    let mut lines: Vec<&str> = xml.lines().collect();
    let idx: Vec<usize> = (0..lines.len())
        .filter(|&i| lines[i].contains("<Action"))
        .take(2)
        .collect();
    lines.swap(idx[0], idx[1]);
    lines.join("\n")
}

#[test]
fn suite_with_precomputed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let names = task_names();
    for (i, name) in names.iter().enumerate() {
        let good = reference(name);
        let bad = swap_first_two_actions(&good);
        match i {
            0 => write_attempts(dir.path(), name, &[&bad, &good, &bad]),
            1 => write_attempts(dir.path(), name, &[&bad, &bad, &bad]),
            _ => write_attempts(dir.path(), name, &[&good, &good, &good]),
        }
    }
    let tasks = data("tasks");
    let outputs = dir.path().to_str().unwrap();
    let json_out = dir.path().join("result.json");
    let (code, out, _) = btforge(&[
        "suite",
        "--tasks",
        &tasks,
        "--outputs",
        outputs,
        "--out",
        json_out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("BT-Valid 100%  SR 87%  Pass@3 93%"), "{out}");
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(json_out).unwrap()).unwrap();
    assert_eq!(doc["tasks"].as_array().unwrap().len(), 15);

    let (code, out, _) = btforge(&["suite", "--tasks", &tasks, "--outputs", outputs, "--attempts", "1"]);
    assert_eq!(code, 0);
    assert!(out.contains("SR 87%  Pass@1 87%"), "{out}");

    let junk = tempfile::tempdir().unwrap();
    for name in &names {
        write_attempts(
            junk.path(),
            name,
            &["<root><BehaviorTree", "not xml", "```xml\n<oops\n```"],
        );
    }
    let (code, out, _) = btforge(&["suite", "--tasks", &tasks, "--outputs", junk.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("BT-Valid 0%  SR 0%  Pass@3 0%"), "{out}");

    let (code, _, err) = btforge(&["suite", "--tasks", &tasks, "--outputs", outputs, "--attempts", "4"]);
    assert_eq!(code, 2);
    assert!(err.contains("missing"), "{err}");
}

/// Answers `count` POST requests with `body`, returning the request bodies.
fn serve(count: usize, body: String) -> (String, thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/generate", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut seen = Vec::new();
        for stream in listener.incoming().take(count) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
            }
            let mut request = vec![0; length];
            reader.read_exact(&mut request).unwrap();
            seen.push(String::from_utf8(request).unwrap());
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: text/plain\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                body.len(),
                body
            )
            .unwrap();
        }
        seen
    });
    (url, handle)
}

#[test]
fn suite_with_http_generator() {
    let tasks = tempfile::tempdir().unwrap();
    fs::copy(
        common::data_dir().join("tasks/turning_on_radio.yaml"),
        tasks.path().join("turning_on_radio.yaml"),
    )
    .unwrap();
    let (url, server) = serve(3, format!("```xml\n{}\n```", reference("turning_on_radio")));
    let (code, out, err) = btforge(&[
        "suite",
        "--tasks",
        tasks.path().to_str().unwrap(),
        "--generator-url",
        &url,
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("BT-Valid 100%  SR 100%  Pass@3 100%"), "{out}");
    let requests = server.join().unwrap();
    assert_eq!(requests.len(), 3);
    let request: serde_json::Value = serde_json::from_str(&requests[0]).unwrap();
    assert_eq!(request["stage"], "architect");
    assert!(request["library"].as_array().unwrap().iter().any(|a| a == "TOGGLE_ON"));
}

fn dataset_script(dir: &Path) -> PathBuf {
    let script = dir.join("teacher.sh");
    fs::write(
        &script,
        r#"#!/bin/sh
request=$(cat)
case "$request" in
  *'"stage":"scene_analysis"'*)
    printf 'target: cup\ndestination: table\nexpanded_instruction: Move the cup onto the table.\nscene_context: The cup is on the counter.\nexpected_sequence: navigate, grasp, navigate, place\n' ;;
  *)
    printf '<root main_tree_to_execute="MainTree"><BehaviorTree ID="MainTree"><Sequence><Action ID="NAVIGATE_TO" obj="cup"/><Action ID="GRASP" obj="cup"/><Action ID="NAVIGATE_TO" obj="table"/><Action ID="PLACE_ON_TOP" obj="table"/></Sequence></BehaviorTree></root>\n' ;;
esac
"#,
    )
    .unwrap();
    script
}

#[test]
fn dataset_from_shell_generator_is_deterministic() {
    let work = tempfile::tempdir().unwrap();
    let sources = work.path().join("sources");
    btforge::dataset::synthetic::write_sources(&sources, 4, 30, 3).unwrap();
    let cmd = format!("sh {}", dataset_script(work.path()).display());
    let mut manifests = Vec::new();
    for run in 0..2 {
        let out = work.path().join(format!("out{run}"));
        let (code, stdout, err) = btforge(&[
            "dataset",
            sources.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "9",
            "--generator-cmd",
            &cmd,
        ]);
        assert_eq!(code, 0, "{stdout}{err}");
        assert!(stdout.contains("episodes 4  base 4  structural 2  total 6"), "{stdout}");
        manifests.push(fs::read_to_string(out.join("manifest.jsonl")).unwrap());
    }
    assert_eq!(manifests[0], manifests[1]);
    assert_eq!(manifests[0].lines().count(), 6);
}

#[test]
fn dataset_edge_cases() {
    let work = tempfile::tempdir().unwrap();
    let empty = work.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = work.path().join("out");
    let (code, stdout, _) = btforge(&["dataset", empty.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    assert_eq!(fs::read_to_string(out.join("manifest.jsonl")).unwrap(), "");

    let sources = work.path().join("sources");
    btforge::dataset::synthetic::write_sources(&sources, 2, 20, 1).unwrap();
    let (code, stdout, _) = btforge(&["dataset", sources.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stdout.contains("failed 2"), "{stdout}");

    let bad_config = work.path().join("config.yaml");
    fs::write(&bad_config, "structural_fraction: 0.5\nunknown_key: 1\n").unwrap();
    let (code, _, _) = btforge(&[
        "dataset",
        sources.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--config",
        bad_config.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);

    let (code, _, _) = btforge(&["dataset", "/no/such/dir", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(btforge(&["frobnicate"]).0, 2);
    assert_eq!(btforge(&[]).0, 2);
}
