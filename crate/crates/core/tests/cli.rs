mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::Ordering;

use lrnlu::dataset::{load_jsonl, save_jsonl, Manifest};
use serde_json::Value;
use tempfile::TempDir;

fn lrnlu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrnlu")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_line(o: &Output) -> Value {
    serde_json::from_str(stdout(o).lines().next().unwrap()).unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }

    fn manifest(&self, name: &str, m: &Manifest) -> String {
        save_jsonl(m, &self.path(name)).unwrap();
        self.s(name)
    }

    fn write(&self, name: &str, text: &str) -> String {
        fs::write(self.path(name), text).unwrap();
        self.s(name)
    }

    fn lexicon(&self) -> String {
        let text = serde_json::to_string(&common::toy_lexicon()).unwrap();
        format!("lexicon:{}", self.write("lexicon.json", &text))
    }
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap()
}

#[test]
fn version_and_help() {
    let o = lrnlu(&["--version"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("index format 1"));
    assert_eq!(code(&lrnlu(&["--help"])), 0);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&lrnlu(&[])), 2);
    assert_eq!(code(&lrnlu(&["frobnicate"])), 2);
    assert_eq!(code(&lrnlu(&["mix"])), 2);
    let ws = Workspace::new();
    let m = ws.manifest("m.jsonl", &common::toy_manifest());
    assert_eq!(code(&lrnlu(&["augment", "--manifest", &m])), 2, "proposer is required");
    assert_eq!(code(&lrnlu(&["augment", "--manifest", &m, "--proposer", "magic"])), 2);
    assert_eq!(code(&lrnlu(&["--jobs", "0", "stats", &m])), 2);
    assert_eq!(
        code(&lrnlu(&["prompt", "render", "--corpus", &m, "--p-geom", "1.5"])),
        2
    );
}

#[test]
fn missing_input_is_data_error() {
    let o = lrnlu(&["stats", "/nonexistent/file.jsonl"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/file.jsonl"));
}

#[test]
fn tsv_ingestion_strict_and_lenient() {
    let ws = Workspace::new();
    let tsv = ws.write(
        "weather_train.tsv",
        "domain\tutterance\tsemantic_parse\n\
         weather\tHow ' s the weather in Sydney\t[IN:GET_WEATHER [SL:LOCATION Sydney ] ]\n\
         weather\tbroken row\t[in:get_weather [sl:location nowhere ] ]\n\
         reminder\tremind me\t[in:create_reminder [sl:person_reminded me ] ]\n",
    );
    let strict = lrnlu(&["validate", &tsv]);
    assert_eq!(code(&strict), 1);
    assert!(String::from_utf8_lossy(&strict.stderr).contains("line 3"));

    let lenient = lrnlu(&["validate", "--lenient", &tsv]);
    assert_eq!(code(&lenient), 1);
    let v = json_line(&lenient);
    assert_eq!(v["samples"], 2);
    assert_eq!(v["skipped"], 1);

    let stats = lrnlu(&["stats", "--lenient", &tsv]);
    assert_eq!(code(&stats), 0);
    let v = json_line(&stats);
    assert_eq!(v["samples"], 2);
    assert_eq!(v["by_split"]["train"], 2);
}

#[test]
fn eval_em_and_wer() {
    let ws = Workspace::new();
    let m = ws.manifest("m.jsonl", &common::toy_manifest());
    let o = lrnlu(&["eval", "em", "--hyp", &m, "--ref", &m]);
    assert_eq!(code(&o), 0);
    assert_eq!(json_line(&o)["accuracy"], 1.0);

    let hyp = ws.write("hyp.txt", "[IN:A x ]\n[in:b y ]\n");
    let reference = ws.write("ref.txt", "[in:a  x ]\n[in:b z ]\n");
    let o = lrnlu(&["eval", "em", "--hyp", &hyp, "--ref", &reference]);
    assert_eq!(json_line(&o)["accuracy"], 0.5);

    let hyp = ws.write("hyp_w.txt", "how ' s the weather in\n");
    let reference = ws.write("ref_w.txt", "how ' s the weather in sydney\n");
    let o = lrnlu(&["eval", "wer", "--hyp", &hyp, "--ref", &reference]);
    assert_eq!(code(&o), 0);
    let v = json_line(&o);
    assert_eq!(
        (v["sub"].as_u64(), v["del"].as_u64(), v["ins"].as_u64()),
        (Some(0), Some(1), Some(0))
    );
    assert!((v["wer"].as_f64().unwrap() - 1.0 / 7.0).abs() <= 1e-12);

    let short = ws.write("short.txt", "[in:a x ]\n");
    assert_eq!(
        code(&lrnlu(&["eval", "em", "--hyp", &short, "--ref", &ws.s("ref.txt")])),
        1
    );
}

#[test]
fn mix_counts() {
    let ws = Workspace::new();
    let held = ws.manifest("held.jsonl", &common::toy_manifest());
    let low_m = Manifest::new(
        common::toy_manifest()
            .into_samples()
            .into_iter()
            .map(|s| {
                let id = format!("low_{}", s.id());
                s.with_id(id)
            })
            .collect(),
        "low",
    )
    .unwrap();
    let low = ws.manifest("low.jsonl", &low_m);
    let out = ws.s("mixed.jsonl");
    let o = lrnlu(&["mix", "--held-in", &held, "--low", &low, "--seed", "4", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(load_jsonl(&ws.path("mixed.jsonl")).unwrap().len(), 20 + 20 * 20);
}

#[test]
fn augment_local_writes_outputs() {
    let ws = Workspace::new();
    let m = ws.manifest("m.jsonl", &common::toy_manifest());
    let lex = ws.lexicon();
    let (out, report, cands) = (ws.s("aug.jsonl"), ws.s("report.json"), ws.s("cands.jsonl"));
    let o = lrnlu(&[
        "augment",
        "--manifest",
        &m,
        "--proposer",
        &lex,
        "--oracle",
        "memorizing",
        "--factor",
        "4",
        "--seed",
        "2",
        "--out",
        &out,
        "--report",
        &report,
        "--candidates",
        &cands,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&read(&ws.path("report.json"))).unwrap();
    let kept = load_jsonl(&ws.path("aug.jsonl")).unwrap();
    assert_eq!(r["kept"].as_u64().unwrap() as usize, kept.len());
    let n_cands = fs::read_to_string(ws.path("cands.jsonl")).unwrap().lines().count();
    assert_eq!(r["candidates"].as_u64().unwrap() as usize, n_cands);
    assert_eq!(r["plans"], 80);
}

#[test]
fn augment_against_unreachable_bridge_exits_three() {
    let ws = Workspace::new();
    let m = ws.manifest("m.jsonl", &common::toy_manifest());
    let out = ws.s("aug.jsonl");
    let url = common::dead_url();
    let o = lrnlu(&[
        "augment",
        "--manifest",
        &m,
        "--proposer",
        "remote",
        "--oracle",
        "remote",
        "--bridge-url",
        &url,
        "--out",
        &out,
    ]);
    assert_eq!(code(&o), 3);
    assert!(!ws.path("aug.jsonl").exists());
}

#[test]
fn augment_with_unloaded_model_exits_three() {
    let ws = Workspace::new();
    let m = ws.manifest("m.jsonl", &common::toy_manifest());
    let lex = ws.lexicon();
    let bridge = common::start_mock_bridge(Default::default());
    bridge.state.unloaded.store(true, Ordering::SeqCst);
    let out = ws.s("aug.jsonl");
    let o = lrnlu(&[
        "augment",
        "--manifest",
        &m,
        "--proposer",
        &lex,
        "--oracle",
        "remote",
        "--bridge-url",
        &bridge.url,
        "--out",
        &out,
    ]);
    assert_eq!(code(&o), 3);
    assert!(!ws.path("aug.jsonl").exists());
}

#[test]
fn augment_through_mock_bridge() {
    let ws = Workspace::new();
    let toy = common::toy_manifest();
    let m = ws.manifest("m.jsonl", &toy);
    let bridge = common::start_mock_bridge(common::memory_of(&toy));
    let out = ws.s("aug.jsonl");
    let o = lrnlu(&[
        "augment",
        "--manifest",
        &m,
        "--proposer",
        "remote",
        "--oracle",
        "memorizing",
        "--bridge-url",
        &bridge.url,
        "--factor",
        "2",
        "--concurrency",
        "2",
        "--out",
        &out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(bridge.state.peak_in_flight.load(Ordering::SeqCst) <= 2);
    let kept = load_jsonl(&ws.path("aug.jsonl")).unwrap();
    let report: Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert_eq!(report["kept"].as_u64().unwrap() as usize, kept.len());
}

#[test]
fn config_file_merges_under_flags() {
    let ws = Workspace::new();
    let m = ws.manifest("m.jsonl", &common::toy_manifest());
    let lex = ws.lexicon();
    let bad = ws.write("bad.json", r#"{"seed": 1, "unknown_key": true}"#);
    assert_eq!(code(&lrnlu(&["--config", &bad, "stats", &m])), 2);
    let out_of_range = ws.write("range.json", r#"{"p_geom": 2.0}"#);
    assert_eq!(code(&lrnlu(&["--config", &out_of_range, "stats", &m])), 2);

    let cfg = ws.write(
        "cfg.json",
        &format!(r#"{{"seed": 9, "mask_factor": 3, "proposer": "{lex}", "oracle": "memorizing"}}"#),
    );
    let run = |extra: &[&str], out: &str| {
        let mut args = vec![
            "--config",
            cfg.as_str(),
            "augment",
            "--manifest",
            m.as_str(),
            "--candidates",
            out,
        ];
        args.extend_from_slice(extra);
        assert_eq!(code(&lrnlu(&args)), 0);
        read(Path::new(out))
    };
    let from_config = run(&[], &ws.s("a.jsonl"));
    let o = lrnlu(&[
        "augment",
        "--manifest",
        &m,
        "--proposer",
        &lex,
        "--seed",
        "9",
        "--factor",
        "3",
        "--candidates",
        &ws.s("b.jsonl"),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(from_config, read(&ws.path("b.jsonl")));
    let overridden = run(&["--seed", "10"], &ws.s("c.jsonl"));
    assert_ne!(from_config, overridden);
}

#[test]
fn index_build_and_query() {
    let ws = Workspace::new();
    let m = ws.manifest("m.jsonl", &common::toy_manifest());
    let index = ws.s("index.json");
    assert_eq!(code(&lrnlu(&["index", "build", "--manifest", &m, "--out", &index])), 0);
    let o = lrnlu(&[
        "index",
        "query",
        "--index",
        &index,
        "--text",
        common::WEATHER_X,
        "--k",
        "3",
    ]);
    assert_eq!(code(&o), 0);
    let hits: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(hits.len(), 3);
    assert_eq!(hits[0]["sample_id"], "toy00");
    assert!((hits[0]["score"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let o = lrnlu(&[
        "index",
        "query",
        "--index",
        &index,
        "--text",
        common::WEATHER_X,
        "--exclude",
        "toy00",
    ]);
    assert!(stdout(&o).lines().all(|l| !l.contains("\"toy00\"")));

    let corrupt = ws.write("corrupt.json", "{\"format_version\": 99}");
    assert_eq!(code(&lrnlu(&["index", "query", "--index", &corrupt, "--text", "x"])), 1);
}

#[test]
fn prompt_render_modes() {
    let ws = Workspace::new();
    let m = ws.manifest("m.jsonl", &common::toy_manifest());
    let out = ws.s("p.jsonl");
    let o = lrnlu(&[
        "prompt",
        "render",
        "--corpus",
        &m,
        "--mode",
        "sample",
        "--seed",
        "1",
        "--resample-epochs",
        "2",
        "--out",
        &out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let recs: Vec<Value> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(recs.len(), 40);
    for r in &recs {
        assert_eq!(r["exemplar_ids"].as_array().unwrap().len(), 4);
        assert!(!r["exemplar_ids"].as_array().unwrap().contains(&r["id"]));
        assert_eq!(r["rendered"].as_str().unwrap().split(" ; ").count(), 9);
    }

    let o = lrnlu(&["prompt", "render", "--corpus", &m, "--k", "2", "--separator", " | "]);
    assert_eq!(code(&o), 0);
    let first: Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert_eq!(
        first["exemplar_ids"][0], first["id"],
        "top-k keeps the query itself by default"
    );
    assert_eq!(first["rendered"].as_str().unwrap().split(" | ").count(), 5);
}
